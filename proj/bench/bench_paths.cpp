// Times the Monte Carlo path kernel with the serial reference loop and with
// the OpenMP worker pool, and checks that both produce identical bits.
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <string>

#include "mfglab/config_load.hpp"
#include "mfglab/meanfield.hpp"
#include "mfglab/offset.hpp"
#include "mfglab/parallel.hpp"
#include "mfglab/sim.hpp"

using namespace mfglab;

namespace {

double time_run(const ModelSpec& spec, const MeanFieldGains& mf,
                const OffsetEstimator& offsets, int N, int paths,
                FiniteSimResult* out) {
  const auto t0 = std::chrono::steady_clock::now();
  *out = simulate_finite(spec, mf, offsets, N, paths, 20240601);
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
      .count();
}

}  // namespace

int main(int argc, char** argv) {
  std::string model = "models/coupled_2type.json";
  int paths = 256;
  int N = 20;
  if (argc > 1) model = argv[1];
  if (argc > 2) paths = std::atoi(argv[2]);
  if (argc > 3) N = std::atoi(argv[3]);

  try {
    const ModelSpec spec = load_model(model);
    const MeanFieldGains mf = solve_consistency(spec);
    const OffsetEstimator offsets = solve_joint_offsets(spec, mf, 512, 99);

    FiniteSimResult serial, parallel;
    set_worker_count(1);
    const double t_serial = time_run(spec, mf, offsets, N, paths, &serial);
    set_worker_count(0);  // library default: one worker per core
    const double t_parallel = time_run(spec, mf, offsets, N, paths, &parallel);

    const bool identical =
        serial.major_total == parallel.major_total &&
        serial.minor_total == parallel.minor_total &&
        serial.moment_by_node == parallel.moment_by_node;

    std::printf("model=%s N=%d paths=%d\n", model.c_str(), N, paths);
    std::printf("serial:   %8.3fs (%7.1f paths/s)\n", t_serial,
                paths / t_serial);
    std::printf("parallel: %8.3fs (%7.1f paths/s, speedup %.2fx)\n",
                t_parallel, paths / t_parallel, t_serial / t_parallel);
    std::printf("bit-identical results: %s\n", identical ? "yes" : "NO");
    return identical ? 0 : 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "bench_paths: %s\n", e.what());
    return 1;
  }
}
