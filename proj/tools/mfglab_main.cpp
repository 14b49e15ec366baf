#include <chrono>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mfglab/artifacts.hpp"
#include "mfglab/config_load.hpp"
#include "mfglab/errors.hpp"
#include "mfglab/meanfield.hpp"
#include "mfglab/model.hpp"
#include "mfglab/nash.hpp"
#include "mfglab/offset.hpp"
#include "mfglab/parallel.hpp"
#include "mfglab/sim.hpp"

namespace fs = std::filesystem;
using namespace mfglab;

namespace {

// Exit codes: 0 success, 1 I/O or unexpected, 2 model validation,
// 3 consistency iteration, 4 offset regression, 5 simulation, 6 gap search.
enum ExitCode {
  kOk = 0,
  kGenericError = 1,
  kValidationError = 2,
  kConsistencyError = 3,
  kOffsetError = 4,
  kSimulationError = 5,
  kGapError = 6,
};

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                       start)
      .count();
}

std::set<std::string> parse_stages(const std::string& arg) {
  static const std::set<std::string> known = {"consistency", "offsets",
                                              "simulate", "gaps"};
  if (arg == "all") return known;
  std::set<std::string> out;
  std::stringstream ss(arg);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    if (!known.count(item)) {
      throw ConfigError("unknown stage \"" + item +
                        "\" (expected consistency, offsets, simulate, gaps)");
    }
    out.insert(item);
  }
  if (out.empty()) throw ConfigError("empty stage selection");
  return out;
}

void prepare_outdir(const std::string& outdir, bool overwrite) {
  const fs::path dir(outdir);
  if (fs::exists(dir)) {
    if (!fs::is_directory(dir)) {
      throw IoError(outdir + " exists and is not a directory");
    }
    if (!fs::is_empty(dir) && !overwrite) {
      throw IoError(outdir +
                    " is not empty; pass --overwrite to reuse it");
    }
  } else {
    fs::create_directories(dir);
  }
}

struct RunFlags {
  std::string model;
  std::string outdir = "out";
  std::string stages = "all";
  std::uint64_t seed = 0;
  int workers = 1;
  double tol = 1e-10;
  double damping = 0.5;
  int max_iterations = 100;
  int offset_paths = 512;
  int sim_paths = 256;
  int gap_paths = 128;
  int gap_evaluations = 120;
  int gap_segments = 4;
  std::string gap_role = "minor";
  int gap_type = 0;
  std::vector<int> N_override;
  bool overwrite = false;
  bool store_trajectories = false;
};

int run_pipeline(const RunFlags& flags) {
  const std::set<std::string> stages = parse_stages(flags.stages);
  prepare_outdir(flags.outdir, flags.overwrite);
  set_worker_count(flags.workers);

  RunManifest man;
  man.model_path = flags.model;
  man.seed = flags.seed;
  man.workers = flags.workers;
  man.consistency_tol = flags.tol;
  man.consistency_damping = flags.damping;
  man.max_iterations = flags.max_iterations;
  man.offset_paths = flags.offset_paths;
  man.sim_paths = flags.sim_paths;
  man.gap_paths = flags.gap_paths;
  man.gap_evaluations = flags.gap_evaluations;
  const fs::path out(flags.outdir);
  const auto artifact = [&](const std::string& name) {
    man.artifacts.push_back(name);
    return (out / name).string();
  };
  const auto finish_manifest = [&] {
    save_manifest((out / "manifest.json").string(), man);
  };

  // ---- load + validate (always) ----
  ModelSpec spec;
  {
    StageRecord rec{"validate", true, 0.0, ""};
    const auto t0 = std::chrono::steady_clock::now();
    try {
      spec = load_model(flags.model);
      const ValidationReport report = validate(spec);
      if (!report.ok()) {
        std::fprintf(stderr, "%s", report.summary().c_str());
        return kValidationError;
      }
      rec.detail = "ok";
    } catch (const ConfigError& e) {
      std::fprintf(stderr, "validation: %s\n", e.what());
      return kValidationError;
    } catch (const IoError& e) {
      std::fprintf(stderr, "validation: %s\n", e.what());
      return kGenericError;
    }
    rec.wall_seconds = seconds_since(t0);
    man.stages.push_back(rec);
    std::printf("validate: ok (%.3fs)\n", rec.wall_seconds);
  }
  man.N_schedule = flags.N_override.empty() ? spec.population.N_schedule
                                            : flags.N_override;

  // ---- consistency ----
  MeanFieldGains mf;
  bool have_gains = false;
  if (stages.count("consistency")) {
    StageRecord rec{"consistency", true, 0.0, ""};
    const auto t0 = std::chrono::steady_clock::now();
    try {
      mf = solve_consistency(spec, flags.tol, flags.damping,
                             flags.max_iterations);
      have_gains = true;
      const HurwitzReport hz = check_hurwitz(spec, mf);
      save_gains(artifact("gains.json"), mf);
      std::ostringstream detail;
      detail << "iterations=" << mf.iterations << " residual=" << mf.residual
             << " hurwitz_max_real=" << hz.max_real_part;
      rec.detail = detail.str();
      if (!hz.hurwitz) {
        std::fprintf(stderr,
                     "consistency: warning: closed-loop minor block is not "
                     "Hurwitz (max real part %.6g)\n",
                     hz.max_real_part);
      }
    } catch (const Error& e) {
      std::fprintf(stderr, "consistency: %s\n", e.what());
      finish_manifest();
      return kConsistencyError;
    }
    rec.wall_seconds = seconds_since(t0);
    man.stages.push_back(rec);
    std::printf("consistency: %s (%.3fs)\n", rec.detail.c_str(),
                rec.wall_seconds);
  }

  const auto ensure_gains = [&]() -> MeanFieldGains& {
    if (!have_gains) {
      mf = load_gains((out / "gains.json").string(), spec);
      have_gains = true;
    }
    return mf;
  };

  // ---- offsets ----
  OffsetEstimator offsets;
  bool have_offsets = false;
  if (stages.count("offsets")) {
    StageRecord rec{"offsets", true, 0.0, ""};
    const auto t0 = std::chrono::steady_clock::now();
    try {
      offsets = solve_joint_offsets(spec, ensure_gains(), flags.offset_paths,
                                    flags.seed);
      have_offsets = true;
      save_offsets(artifact("offsets.json"), offsets, flags.offset_paths);
      std::ostringstream detail;
      detail << "paths=" << flags.offset_paths
             << " slice0_sd=" << offsets.slice0_target_sd;
      rec.detail = detail.str();
    } catch (const Error& e) {
      std::fprintf(stderr, "offsets: %s\n", e.what());
      finish_manifest();
      return kOffsetError;
    }
    rec.wall_seconds = seconds_since(t0);
    man.stages.push_back(rec);
    std::printf("offsets: %s (%.3fs)\n", rec.detail.c_str(), rec.wall_seconds);
  }

  const auto ensure_offsets = [&]() -> OffsetEstimator& {
    if (!have_offsets) {
      offsets =
          load_offsets((out / "offsets.json").string(), spec, ensure_gains());
      have_offsets = true;
    }
    return offsets;
  };

  // ---- simulate ----
  if (stages.count("simulate")) {
    StageRecord rec{"simulate", true, 0.0, ""};
    const auto t0 = std::chrono::steady_clock::now();
    try {
      SimOptions opts;
      opts.store_trajectories = flags.store_trajectories;
      std::vector<FiniteSimResult> runs;
      for (const int N : man.N_schedule) {
        runs.push_back(simulate_finite(spec, ensure_gains(), ensure_offsets(),
                                       N, flags.sim_paths, flags.seed, opts));
      }
      const MeanFieldSimResult limit = simulate_meanfield(
          spec, ensure_gains(), ensure_offsets(), flags.sim_paths, flags.seed,
          opts);
      export_cost_csv(artifact("costs.csv"), spec, runs, limit);
      export_moment_csv(artifact("moments.csv"), spec.grid, runs);
      std::ostringstream detail;
      detail << "paths=" << flags.sim_paths << " limit_major_mean="
             << Welford::mean(limit.major_total);
      rec.detail = detail.str();
    } catch (const Error& e) {
      std::fprintf(stderr, "simulate: %s\n", e.what());
      finish_manifest();
      return kSimulationError;
    }
    rec.wall_seconds = seconds_since(t0);
    man.stages.push_back(rec);
    std::printf("simulate: %s (%.3fs)\n", rec.detail.c_str(),
                rec.wall_seconds);
  }

  // ---- gaps ----
  if (stages.count("gaps")) {
    StageRecord rec{"gaps", true, 0.0, ""};
    const auto t0 = std::chrono::steady_clock::now();
    try {
      GapSearchOptions gopts;
      gopts.max_evaluations = flags.gap_evaluations;
      gopts.segments = flags.gap_segments;
      const DeviationPolicy::Role role = flags.gap_role == "major"
                                             ? DeviationPolicy::Role::Major
                                             : DeviationPolicy::Role::Minor;
      const std::vector<GapEstimate> curve =
          gap_curve(spec, ensure_gains(), ensure_offsets(), man.N_schedule,
                    flags.gap_paths, flags.seed, role, flags.gap_type, gopts);
      export_gap_csv(artifact("gaps.csv"), curve);
      std::ostringstream detail;
      detail << "role=" << flags.gap_role;
      for (const GapEstimate& g : curve) {
        detail << " eps(" << g.N << ")=" << g.gap;
      }
      rec.detail = detail.str();
    } catch (const Error& e) {
      std::fprintf(stderr, "gaps: %s\n", e.what());
      finish_manifest();
      return kGapError;
    }
    rec.wall_seconds = seconds_since(t0);
    man.stages.push_back(rec);
    std::printf("gaps: %s (%.3fs)\n", rec.detail.c_str(), rec.wall_seconds);
  }

  finish_manifest();
  std::printf("wrote %s\n", (out / "manifest.json").string().c_str());
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "mfglab: equilibrium solver and simulation laboratory for "
      "major-minor LQG mean field games with a latent-chain common process"};
  app.require_subcommand(1);

  std::string validate_model;
  CLI::App* vcmd =
      app.add_subcommand("validate", "check a model file and print a report");
  vcmd->add_option("model", validate_model, "model JSON file")->required();

  RunFlags flags;
  CLI::App* rcmd = app.add_subcommand(
      "run", "run the pipeline: validate, consistency, offsets, simulate, gaps");
  rcmd->add_option("model", flags.model, "model JSON file")->required();
  rcmd->add_option("-o,--out", flags.outdir, "output directory")
      ->capture_default_str();
  rcmd->add_option("--seed", flags.seed, "master seed (mandatory)")
      ->required();
  rcmd->add_option("--stages", flags.stages,
                   "comma list of consistency,offsets,simulate,gaps or all")
      ->capture_default_str();
  rcmd->add_option("--workers", flags.workers,
                   "worker threads (1 = serial reference, 0 = library default)")
      ->capture_default_str();
  rcmd->add_option("--tol", flags.tol, "consistency fixed-point tolerance")
      ->capture_default_str();
  rcmd->add_option("--damping", flags.damping,
                   "consistency damping factor in (0, 1]")
      ->capture_default_str();
  rcmd->add_option("--max-iterations", flags.max_iterations,
                   "consistency iteration cap")
      ->capture_default_str();
  rcmd->add_option("--offset-paths", flags.offset_paths,
                   "Monte Carlo paths for the offset regression")
      ->capture_default_str();
  rcmd->add_option("--sim-paths", flags.sim_paths,
                   "Monte Carlo paths per population size")
      ->capture_default_str();
  rcmd->add_option("--gap-paths", flags.gap_paths,
                   "Monte Carlo paths per gap-search candidate")
      ->capture_default_str();
  rcmd->add_option("--gap-evaluations", flags.gap_evaluations,
                   "candidate budget per population size")
      ->capture_default_str();
  rcmd->add_option("--gap-segments", flags.gap_segments,
                   "piecewise-constant segments of the deviation offset")
      ->capture_default_str();
  rcmd->add_option("--gap-role", flags.gap_role, "deviating agent: minor|major")
      ->check(CLI::IsMember({"minor", "major"}))
      ->capture_default_str();
  rcmd->add_option("--gap-type", flags.gap_type,
                   "type of the deviating minor agent")
      ->capture_default_str();
  rcmd->add_option("--population", flags.N_override,
                   "override the model's population schedule")
      ->delimiter(',');
  rcmd->add_flag("--overwrite", flags.overwrite,
                 "allow writing into a non-empty output directory");
  rcmd->add_flag("--store-trajectories", flags.store_trajectories,
                 "keep full trajectories in memory during simulation");

  CLI11_PARSE(app, argc, argv);

  try {
    if (vcmd->parsed()) {
      const ModelSpec spec = load_model(validate_model);
      const ValidationReport report = validate(spec);
      std::printf("%s", report.summary().c_str());
      return report.ok() ? kOk : kValidationError;
    }
    return run_pipeline(flags);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kValidationError;
  } catch (const IoError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kGenericError;
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kGenericError;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "unexpected error: %s\n", e.what());
    return kGenericError;
  }
}
