#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "mfglab/config_load.hpp"
#include "mfglab/meanfield.hpp"
#include "mfglab/nash.hpp"
#include "mfglab/offset.hpp"
#include "mfglab/sim.hpp"

using namespace mfglab;

namespace {

std::string model_file(const char* name) {
  return std::string(MFGLAB_MODELS_DIR) + "/" + name;
}

struct Lab {
  ModelSpec spec;
  MeanFieldGains mf;
  OffsetEstimator est;
};

Lab make_lab(const char* name, double damping = 0.5, int offset_paths = 256) {
  Lab lab{load_model(model_file(name)), {}, {}};
  lab.mf = solve_consistency(lab.spec, 1e-10, damping, 100);
  lab.est = solve_joint_offsets(lab.spec, lab.mf, offset_paths, 7);
  return lab;
}

}  // namespace

TEST_CASE("policy containers expose the documented layout") {
  CHECK(DeviationPolicy::obs_dim(DeviationPolicy::Role::Minor, 1, 1, 2) == 5);
  CHECK(DeviationPolicy::obs_dim(DeviationPolicy::Role::Major, 1, 1, 2) == 4);
  CHECK(DeviationPolicy::obs_dim(DeviationPolicy::Role::Minor, 2, 2, 3) == 12);

  const DeviationPolicy z =
      DeviationPolicy::zero(DeviationPolicy::Role::Minor, 1, 1, 1, 2, 1, 4);
  CHECK(z.is_zero());
  CHECK(z.type_k == 1);
  CHECK(z.segments() == 4);
  CHECK(z.dL.rows() == 1);
  CHECK(z.dL.cols() == 5);

  DeviationPolicy p = z;
  p.dm.setZero();
  p.dm(0, 0) = -1.0;
  p.dm(0, 3) = 2.0;
  CHECK_FALSE(p.is_zero());
  CHECK(p.offset_at(0.0, 1.0)[0] == -1.0);
  CHECK(p.offset_at(0.2, 1.0)[0] == -1.0);
  CHECK(p.offset_at(0.99, 1.0)[0] == 2.0);
  CHECK(p.offset_at(1.0, 1.0)[0] == 2.0);  // T lands in the last segment
}

TEST_CASE("the zero candidate reproduces the baseline bit for bit") {
  const Lab lab = make_lab("coupled_2type.json");
  GapSearchOptions o;
  o.max_evaluations = 1;  // baseline only
  const GapEstimate g = estimate_gap(lab.spec, lab.mf, lab.est, 3, 16, 13,
                                     DeviationPolicy::Role::Minor, 1, o);
  CHECK(g.budget_exhausted);
  CHECK(g.evaluations == 1);
  CHECK(g.gap == 0.0);
  CHECK(g.best_mean == g.baseline_mean);

  // replicate the baseline by hand: zero policy, agent 0 pinned to type 1
  const DeviationPolicy zero = DeviationPolicy::zero(
      DeviationPolicy::Role::Minor, 1, lab.spec.dims.n, lab.spec.dims.d,
      lab.spec.K(), lab.spec.dims.m, o.segments);
  SimOptions opts;
  opts.deviation = &zero;
  opts.store_trajectories = true;
  const FiniteSimResult run =
      simulate_finite(lab.spec, lab.mf, lab.est, 3, 16, 13, opts);
  CHECK(run.minor_total.col(0).mean() == g.baseline_mean);
  for (int p = 0; p < run.paths; ++p) {
    CHECK(run.types[p][0] == 1);
  }

  // a zero major deviation leaves the plain run untouched
  const DeviationPolicy mzero = DeviationPolicy::zero(
      DeviationPolicy::Role::Major, 0, lab.spec.dims.n, lab.spec.dims.d,
      lab.spec.K(), lab.spec.dims.m, o.segments);
  SimOptions mopts;
  mopts.deviation = &mzero;
  const FiniteSimResult with =
      simulate_finite(lab.spec, lab.mf, lab.est, 3, 16, 13, mopts);
  const FiniteSimResult without =
      simulate_finite(lab.spec, lab.mf, lab.est, 3, 16, 13);
  CHECK(with.major_total == without.major_total);
  CHECK(with.minor_total == without.minor_total);
}

TEST_CASE("a two-agent population leaves profitable deviations") {
  const Lab lab = make_lab("coupled_2type.json");
  GapSearchOptions o;
  o.max_evaluations = 60;
  o.segments = 2;
  const GapEstimate g = estimate_gap(lab.spec, lab.mf, lab.est, 2, 64, 13,
                                     DeviationPolicy::Role::Minor, 0, o);
  CHECK(g.budget_exhausted);
  CHECK(g.evaluations == 60);
  CHECK(g.gap > 0.01);
  CHECK(g.gap > 5.0 * g.gap_se);
  CHECK(g.best_mean == g.baseline_mean - g.gap);
  CHECK_FALSE(g.best_policy.is_zero());
}

TEST_CASE("without coupling the equilibrium leaves nothing to gain") {
  const Lab lab = make_lab("decoupled_scalar.json", 1.0, 64);
  GapSearchOptions o;
  o.max_evaluations = 60;
  o.segments = 2;
  for (const auto role :
       {DeviationPolicy::Role::Minor, DeviationPolicy::Role::Major}) {
    const GapEstimate g =
        estimate_gap(lab.spec, lab.mf, lab.est, 5, 64, 13, role, 0, o);
    // the search may surf Monte Carlo noise; anything inside three paired
    // standard errors (or an absolute floor) counts as zero
    CHECK(g.gap <= std::max(3.0 * g.gap_se, 1e-3));
  }
}

TEST_CASE("type out of range is rejected") {
  const Lab lab = make_lab("decoupled_scalar.json", 1.0, 64);
  CHECK_THROWS_AS(estimate_gap(lab.spec, lab.mf, lab.est, 2, 4, 1,
                               DeviationPolicy::Role::Minor, 3, {}),
                  ConfigError);
}

TEST_CASE("gap curves export one row per population size") {
  const Lab lab = make_lab("coupled_2type.json");
  GapSearchOptions o;
  o.max_evaluations = 12;
  o.segments = 2;
  const std::vector<GapEstimate> curve =
      gap_curve(lab.spec, lab.mf, lab.est, {2, 5}, 24, 5,
                DeviationPolicy::Role::Minor, 0, o);
  REQUIRE(curve.size() == 2);
  CHECK(curve[0].N == 2);
  CHECK(curve[1].N == 5);
  CHECK(curve[0].gap >= 0.0);
  CHECK(curve[1].gap >= 0.0);

  const std::string path = "/tmp/mfglab_test_gaps.csv";
  export_gap_csv(path, curve);
  std::ifstream in(path);
  std::string header, row1, row2, extra;
  REQUIRE(std::getline(in, header));
  CHECK(header ==
        "N,role,type,baseline,baseline_se,best,gap,gap_se,evals,"
        "budget_exhausted");
  REQUIRE(std::getline(in, row1));
  REQUIRE(std::getline(in, row2));
  CHECK_FALSE(std::getline(in, extra));
  CHECK(row1.rfind("2,minor,0,", 0) == 0);
  CHECK(row2.rfind("5,minor,0,", 0) == 0);
  std::remove(path.c_str());
}
