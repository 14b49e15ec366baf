#pragma once

#include <cstdint>
#include <vector>

#include "mfglab/grid.hpp"
#include "mfglab/linalg.hpp"
#include "mfglab/meanfield.hpp"
#include "mfglab/model.hpp"

namespace mfglab {

// The major and per-type offset processes solve coupled linear backward
// equations; stacked as S = [s0; sbar_1; ...; sbar_K] they obey
//   dS = -(Kmat(t) S + Phi(t) fhat_t + beta(t)) dt + (martingale part),
//   S(T) = 0,
// where fhat is the filtered drift of the unimpacted common process. This
// struct holds the per-node coefficient assembly.
struct OffsetCoefficients {
  int p0 = 0;   // dim of s0 (2n + nK)
  int pk = 0;   // dim of each sbar_k (3n + nK)
  int K = 0;
  int dim = 0;  // p0 + K * pk
  int d = 0;
  std::vector<MatrixXd> Kmat;  // per node, dim x dim
  std::vector<MatrixXd> Phi;   // per node, dim x d
  std::vector<VectorXd> beta;  // per node, dim
};

OffsetCoefficients assemble_offset_system(const ModelSpec& spec,
                                          const MeanFieldGains& mf);

// Total-degree-2 polynomial features in (yL, pi_1..pi_{M-1}); the last
// posterior component is dropped against the simplex constraint.
struct FeatureBasis {
  int d = 0;
  int M = 1;
  int vars() const { return d + std::max(M - 1, 0); }
  int size() const {
    const int p = vars();
    return 1 + p + p * (p + 1) / 2;
  }
  VectorXd eval(const VectorXd& y, const VectorXd& pi) const;
};

struct OffsetValues {
  VectorXd S;                  // stacked, dim
  VectorXd s0;                 // p0
  std::vector<VectorXd> sbar;  // per type, pk
  VectorXd rbar;               // mK: rbar_k = -R_k^-1 B_k^T sbar_k
  VectorXd mbar;               // nK: mbar_k = B_k rbar_k + b_k(t)
};

// One time slice of the regression: the feature columns kept at this node
// and the least-squares coefficients on them. Column selection is adaptive:
// constant columns and columns exactly dependent on earlier ones carry no
// extra information about the sample and are dropped (the fitted subspace
// is all the conditional expectation needs); near-dependent survivors are
// a genuinely ill-posed basis and raise RankDeficientRegression.
struct SliceRegression {
  std::vector<int> active;
  MatrixXd coef;  // |active| x target dim
};
SliceRegression regress_slice(const MatrixXd& features,
                              const MatrixXd& targets);

// Regression Monte Carlo solution of the joint backward system. Training
// runs backward from S(T) = 0; at each node the next values (plus half an
// explicit drift step) are regressed on the features, and the node value
// solves the implicit half step (I - dt/2 Kmat) S = fitted + dt/2 forcing.
// Feature columns with no sample variation are dropped per node, so the
// regression degenerates to a plain mean when paths coincide.
class OffsetEstimator {
 public:
  TimeGrid grid;
  FeatureBasis basis;
  OffsetCoefficients sys;
  std::vector<std::vector<int>> active;  // per node 0..steps-1
  std::vector<MatrixXd> coef;            // per node, |active| x dim
  // copies needed to map S into rbar / mbar without the model around
  std::vector<MatrixXd> rk_inv_bkT;  // per type, m x pk
  std::vector<MatrixXd> Bk;          // per type, n x m
  std::vector<DriftSignal> bk;       // per type
  CommonDrift drift;
  double slice0_target_sd = 0.0;  // Monte Carlo scale of the node-0 target

  OffsetValues evaluate(int node, const VectorXd& yL, const VectorXd& pi) const;
  VectorXd stacked_at(int node, const VectorXd& yL, const VectorXd& pi) const;

  // pieces shared with the pre-factored evaluator
  VectorXd regression_rhs(int node, const VectorXd& yL, const VectorXd& pi) const;
  OffsetValues values_from_stacked(int node, const VectorXd& S) const;
};

// Per-node LU factorizations of (I - dt/2 Kmat), built once per simulation
// run; OffsetEstimator::evaluate factors on every call.
class OffsetEvaluator {
 public:
  explicit OffsetEvaluator(const OffsetEstimator& est);
  OffsetValues at(int node, const VectorXd& yL, const VectorXd& pi) const;

 private:
  const OffsetEstimator* est_;
  std::vector<Eigen::PartialPivLU<MatrixXd>> lu_;
};

OffsetEstimator solve_joint_offsets(const ModelSpec& spec,
                                    const MeanFieldGains& mf, int paths,
                                    std::uint64_t seed);

// Forward sample of (yL, posterior, filtered drift) used both for training
// and for diagnostics.
struct CommonPath {
  std::vector<VectorXd> y;     // per node
  std::vector<VectorXd> pi;    // per node
  std::vector<VectorXd> fhat;  // per node
  std::vector<int> chain;      // latent state per node (simulation truth)
};
CommonPath sample_common_path(const ModelSpec& spec, std::uint64_t seed,
                              std::uint64_t path_id);

// Zero-mean test of the discrete backward residual on fresh paths; a slice
// passes when every component (within every feature bin) has |mean| within
// 3 standard errors.
struct MartingaleReport {
  int slices = 0;
  int passed = 0;
  double pass_fraction = 0.0;
  double worst_t_stat = 0.0;
};
MartingaleReport martingale_residual_test(const ModelSpec& spec,
                                          const OffsetEstimator& est,
                                          int paths, std::uint64_t seed,
                                          int bins = 1);

// Backward RK4 integration of the offset system when the forcing is
// deterministic (single chain state, drift independent of y). Oracle for
// the regression solver and fast path for deterministic models.
std::vector<VectorXd> solve_offsets_deterministic(const ModelSpec& spec,
                                                  const MeanFieldGains& mf);

}  // namespace mfglab
