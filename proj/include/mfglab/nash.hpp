#pragma once

#include <algorithm>
#include <cstdint>
#include <string>
#include <vector>

#include "mfglab/linalg.hpp"

namespace mfglab {

struct ModelSpec;
struct MeanFieldGains;
class OffsetEstimator;

// One agent's unilateral departure from the equilibrium feedback law:
//   u = u_equilibrium + dL * obs + dm(t)
// where obs stacks the deviator's observables ([x_i; y; x0; xN] for a minor
// agent, [y; x0; xN] for the major; xN is the per-type empirical average)
// and dm is piecewise constant on `segments` equal sub-intervals.
struct DeviationPolicy {
  enum class Role { Major, Minor };
  Role role = Role::Minor;
  int type_k = 0;  // minor role: the deviating agent is pinned to this type
  MatrixXd dL;     // m x obs_dim
  MatrixXd dm;     // m x segments

  int segments() const { return static_cast<int>(dm.cols()); }
  VectorXd offset_at(double t, double T) const {
    const int seg = std::min(static_cast<int>(t / T * segments()),
                             segments() - 1);
    return dm.col(std::max(seg, 0));
  }
  bool is_zero() const { return max_abs(dL) == 0.0 && max_abs(dm) == 0.0; }

  static int obs_dim(Role role, int n, int d, int K) {
    return (role == Role::Minor ? n : 0) + d + n + n * K;
  }
  static DeviationPolicy zero(Role role, int type_k, int n, int d, int K,
                              int m, int segments) {
    DeviationPolicy p;
    p.role = role;
    p.type_k = type_k;
    p.dL = MatrixXd::Zero(m, obs_dim(role, n, d, K));
    p.dm = MatrixXd::Zero(m, segments);
    return p;
  }
};

struct GapSearchOptions {
  int max_evaluations = 120;
  int segments = 4;
  double initial_step = 0.25;
  double min_step = 1e-3;
};

struct GapEstimate {
  int N = 0;
  DeviationPolicy::Role role = DeviationPolicy::Role::Minor;
  int type_k = 0;
  double baseline_mean = 0.0;
  double baseline_se = 0.0;
  double best_mean = 0.0;
  double gap = 0.0;     // max(0, baseline - best)
  double gap_se = 0.0;  // paired standard error at the best candidate
  int evaluations = 0;
  bool budget_exhausted = false;
  DeviationPolicy best_policy;
};

// Derivative-free search (coordinate descent with shrinking steps) for a
// profitable unilateral deviation, on common random numbers: every candidate
// replays the same noise paths, co-players keep the equilibrium law. The
// zero candidate reproduces the baseline exactly.
GapEstimate estimate_gap(const ModelSpec& spec, const MeanFieldGains& mf,
                         const OffsetEstimator& offsets, int N, int paths,
                         std::uint64_t seed, DeviationPolicy::Role role,
                         int type_k, const GapSearchOptions& opts = {});

std::vector<GapEstimate> gap_curve(const ModelSpec& spec,
                                   const MeanFieldGains& mf,
                                   const OffsetEstimator& offsets,
                                   const std::vector<int>& N_schedule,
                                   int paths, std::uint64_t seed,
                                   DeviationPolicy::Role role, int type_k,
                                   const GapSearchOptions& opts = {});

void export_gap_csv(const std::string& path,
                    const std::vector<GapEstimate>& curve);

}  // namespace mfglab
