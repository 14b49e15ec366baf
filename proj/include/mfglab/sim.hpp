#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mfglab/linalg.hpp"
#include "mfglab/meanfield.hpp"
#include "mfglab/model.hpp"
#include "mfglab/nash.hpp"
#include "mfglab/offset.hpp"

namespace mfglab {

// Equilibrium feedback laws read off the consistency solution:
//   u0 = -R0^-1 (N0^T + B0^T Pi0) X0 - R0^-1 B0^T s0,  X0 = [y; x0; xbar]
//   ui = -Rk^-1 (Nk^T + Bk^T Pik) Xi - Rk^-1 Bk^T sbar_k,
//        Xi = [x_i; y; x0; xbar]
VectorXd control_major(const MeanFieldGains& mf, int node, const VectorXd& X0,
                       const VectorXd& s0);
VectorXd control_minor(const MeanFieldGains& mf, int k, int node,
                       const VectorXd& Xi, const VectorXd& sbar_k);

struct CostParts {
  double terminal = 0.0;
  double running_state = 0.0;
  double cross = 0.0;
  double control = 0.0;
  double total() const { return terminal + running_state + cross + control; }
};

// One stored trajectory (kept only on request; states and controls at every
// node so costs can be replayed exactly).
struct SimPath {
  MatrixXd yL;    // nodes x d
  MatrixXd y;     // nodes x d (finite run) or ybar (mean-field run)
  MatrixXd x0;    // nodes x n
  MatrixXd xbar;  // nodes x nK
  MatrixXd pi;    // nodes x M
  MatrixXd u0;    // nodes x m
  std::vector<int> chain;       // nodes
  std::vector<MatrixXd> x;      // per minor agent, nodes x n
  std::vector<MatrixXd> u;      // per minor agent, nodes x m
  std::vector<int> types;       // per minor agent
};

struct SimOptions {
  bool store_trajectories = false;
  // Optional unilateral deviation; when role == Minor the deviating agent is
  // agent 0 and its type is pinned to policy->type_k (pass the zero policy
  // to get the matching baseline on the same random numbers).
  const DeviationPolicy* deviation = nullptr;
  // Infinite-population runs only: number of independent representative
  // minors simulated per type on each common path. Reported per-type costs
  // average over the copies, tightening the limit-cost estimate without
  // touching the common layer. Copy 0 reproduces the rep_copies == 1 draws.
  int rep_copies = 1;
};

struct FiniteSimResult {
  int N = 0;
  int paths = 0;
  VectorXd major_total;                 // per path
  MatrixXd minor_total;                 // paths x N
  std::vector<std::vector<int>> types;  // per path, N entries
  MatrixXd type_mean_cost;              // paths x K, NaN when type absent
  VectorXd moment_sup;                  // per path, sup_t second-moment sum
  MatrixXd moment_by_node;              // paths x nodes
  std::vector<CostParts> major_parts;               // per path
  std::vector<std::vector<CostParts>> minor_parts;  // per path, per agent
  std::vector<SimPath> stored;
};

struct MeanFieldSimResult {
  int paths = 0;
  VectorXd major_total;      // per path
  MatrixXd rep_minor_total;  // paths x K, one representative agent per type
  VectorXd moment_sup;       // per path
  MatrixXd moment_by_node;   // paths x nodes
  std::vector<CostParts> major_parts;             // per path
  std::vector<std::vector<CostParts>> rep_parts;  // per path, per type
  std::vector<SimPath> stored;
};

CostParts mean_parts(const std::vector<CostParts>& parts);

// Euler-Maruyama on the shared grid. The common process carries the exact-
// clock latent chain; agents apply the infinite-population feedback laws,
// substituting the observed common process and a mean-field trajectory
// integrated from observed (y, x0). Trapezoid cost integration.
FiniteSimResult simulate_finite(const ModelSpec& spec,
                                const MeanFieldGains& mf,
                                const OffsetEstimator& offsets, int N,
                                int paths, std::uint64_t seed,
                                const SimOptions& opts = {});

// Infinite-population limit: (ybar, x0, xbar) plus one representative minor
// agent per type, each with its own idiosyncratic noise.
MeanFieldSimResult simulate_meanfield(const ModelSpec& spec,
                                      const MeanFieldGains& mf,
                                      const OffsetEstimator& offsets,
                                      int paths, std::uint64_t seed,
                                      const SimOptions& opts = {});

// Cost replay from a stored path; accumulation order matches the simulator,
// so results are bit-identical to the reported ones.
CostParts major_cost_from_path(const ModelSpec& spec, const SimPath& path);
CostParts minor_cost_from_path(const ModelSpec& spec, const SimPath& path,
                               int agent);

struct Welford {
  // mean/SE over paths for any per-path statistic
  static double mean(const VectorXd& v) { return v.mean(); }
  static double se(const VectorXd& v) {
    const int n = static_cast<int>(v.size());
    if (n < 2) return 0.0;
    const double mu = v.mean();
    const double var = (v.array() - mu).square().sum() / (n - 1);
    return std::sqrt(var / n);
  }
};

void export_cost_csv(const std::string& path, const ModelSpec& spec,
                     const std::vector<FiniteSimResult>& runs,
                     const MeanFieldSimResult& limit);

void export_moment_csv(const std::string& path, const TimeGrid& grid,
                       const std::vector<FiniteSimResult>& runs);

}  // namespace mfglab
