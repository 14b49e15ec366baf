#include "mfglab/nash.hpp"

#include <cmath>
#include <cstdio>

#include "mfglab/errors.hpp"
#include "mfglab/model.hpp"
#include "mfglab/sim.hpp"

namespace mfglab {

namespace {

// Deviator's realized cost per path under one candidate policy. Every
// candidate reuses the same seed, so path noise is common across the search
// and paired differences are meaningful.
VectorXd eval_candidate(const ModelSpec& spec, const MeanFieldGains& mf,
                        const OffsetEstimator& offsets, int N, int paths,
                        std::uint64_t seed, const DeviationPolicy& pol) {
  SimOptions opts;
  opts.deviation = &pol;
  const FiniteSimResult run =
      simulate_finite(spec, mf, offsets, N, paths, seed, opts);
  if (pol.role == DeviationPolicy::Role::Major) return run.major_total;
  return run.minor_total.col(0);
}

}  // namespace

GapEstimate estimate_gap(const ModelSpec& spec, const MeanFieldGains& mf,
                         const OffsetEstimator& offsets, int N, int paths,
                         std::uint64_t seed, DeviationPolicy::Role role,
                         int type_k, const GapSearchOptions& opts) {
  if (role == DeviationPolicy::Role::Minor && (type_k < 0 || type_k >= spec.K())) {
    throw ConfigError("deviating minor type out of range");
  }
  const int n = spec.dims.n, m = spec.dims.m, d = spec.dims.d;
  const int K = spec.K();

  GapEstimate out;
  out.N = N;
  out.role = role;
  out.type_k = role == DeviationPolicy::Role::Minor ? type_k : -1;

  DeviationPolicy cur =
      DeviationPolicy::zero(role, std::max(type_k, 0), n, d, K, m, opts.segments);
  const VectorXd baseline =
      eval_candidate(spec, mf, offsets, N, paths, seed, cur);
  out.baseline_mean = Welford::mean(baseline);
  out.baseline_se = Welford::se(baseline);

  VectorXd cur_costs = baseline;
  double cur_mean = out.baseline_mean;
  int evals = 1;

  // Coordinate descent over the entries of (dL, dm) with a shrinking step.
  // Acceptance is by the common-random-number mean, so the search returns an
  // honest lower bound on the best linear deviation.
  const int gain_params = static_cast<int>(cur.dL.size());
  const int offset_params = static_cast<int>(cur.dm.size());
  const int params = gain_params + offset_params;

  double step = opts.initial_step;
  bool exhausted = false;
  while (step >= opts.min_step && !exhausted) {
    bool improved = false;
    for (int c = 0; c < params && !exhausted; ++c) {
      double* slot = c < gain_params ? cur.dL.data() + c
                                     : cur.dm.data() + (c - gain_params);
      const double saved = *slot;
      for (const double sgn : {1.0, -1.0}) {
        if (evals >= opts.max_evaluations) {
          exhausted = true;
          break;
        }
        *slot = saved + sgn * step;
        const VectorXd costs =
            eval_candidate(spec, mf, offsets, N, paths, seed, cur);
        ++evals;
        if (costs.mean() < cur_mean) {
          cur_mean = costs.mean();
          cur_costs = costs;
          improved = true;
          break;  // keep the move, go to the next coordinate
        }
        *slot = saved;
      }
    }
    if (!improved) step *= 0.5;
  }

  out.best_mean = cur_mean;
  out.evaluations = evals;
  out.budget_exhausted = exhausted;
  out.best_policy = cur;
  out.gap = std::max(0.0, out.baseline_mean - out.best_mean);
  out.gap_se = Welford::se(baseline - cur_costs);
  return out;
}

std::vector<GapEstimate> gap_curve(const ModelSpec& spec,
                                   const MeanFieldGains& mf,
                                   const OffsetEstimator& offsets,
                                   const std::vector<int>& N_schedule,
                                   int paths, std::uint64_t seed,
                                   DeviationPolicy::Role role, int type_k,
                                   const GapSearchOptions& opts) {
  std::vector<GapEstimate> curve;
  curve.reserve(N_schedule.size());
  for (const int N : N_schedule) {
    // the same master seed couples the noise across population sizes
    curve.push_back(
        estimate_gap(spec, mf, offsets, N, paths, seed, role, type_k, opts));
  }
  return curve;
}

void export_gap_csv(const std::string& path,
                    const std::vector<GapEstimate>& curve) {
  std::FILE* f = std::fopen(path.c_str(), "w");
  if (!f) throw IoError("cannot open " + path + " for writing");
  std::fprintf(f,
               "N,role,type,baseline,baseline_se,best,gap,gap_se,evals,"
               "budget_exhausted\n");
  for (const GapEstimate& g : curve) {
    std::fprintf(f, "%d,%s,%d,%.17g,%.17g,%.17g,%.17g,%.17g,%d,%d\n", g.N,
                 g.role == DeviationPolicy::Role::Major ? "major" : "minor",
                 g.type_k, g.baseline_mean, g.baseline_se, g.best_mean, g.gap,
                 g.gap_se, g.evaluations, g.budget_exhausted ? 1 : 0);
  }
  if (std::fclose(f) != 0) throw IoError("failed writing " + path);
}

}  // namespace mfglab
