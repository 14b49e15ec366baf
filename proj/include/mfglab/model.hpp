#pragma once

#include <string>
#include <vector>

#include "mfglab/grid.hpp"
#include "mfglab/linalg.hpp"

namespace mfglab {

// Deterministic time signal on the shared grid: either a constant vector or
// one sample per grid node.
struct DriftSignal {
  enum class Kind { Constant, Sampled };
  Kind kind = Kind::Constant;
  VectorXd value;                 // Constant
  std::vector<VectorXd> samples;  // Sampled, one per node

  const VectorXd& at(int node) const {
    return kind == Kind::Constant ? value : samples[node];
  }
  static DriftSignal constant(const VectorXd& v) {
    DriftSignal s;
    s.kind = Kind::Constant;
    s.value = v;
    return s;
  }
};

// Drift of the unimpacted common process, per latent chain state:
//   Affine   f(t, y, state j) = intercept[j] + slope[j] * y
//   Sampled  f(t, y, state j) = samples[j][node]   (time-only forcing)
struct CommonDrift {
  enum class Kind { Affine, Sampled };
  Kind kind = Kind::Affine;
  std::vector<VectorXd> intercept;             // per state, size d
  std::vector<MatrixXd> slope;                 // per state, d x d
  std::vector<std::vector<VectorXd>> samples;  // per state, per node

  VectorXd eval(int node, const VectorXd& y, int state) const {
    if (kind == Kind::Sampled) return samples[state][node];
    return intercept[state] + slope[state] * y;
  }
  bool depends_on_y() const {
    if (kind == Kind::Sampled) return false;
    for (const auto& S : slope)
      if (max_abs(S) > 0.0) return true;
    return false;
  }
};

struct MajorDynamics {
  MatrixXd A0;      // n x n
  MatrixXd B0;      // n x m
  MatrixXd sigma0;  // n x r
  DriftSignal b0;   // size n
};

struct MinorTypeDynamics {
  MatrixXd A;      // n x n
  MatrixXd B;      // n x m
  MatrixXd sigma;  // n x r
  DriftSignal b;   // size n
};

// Finite-state latent chain: rates(i,j) is the jump intensity i -> j.
struct LatentChainSpec {
  std::vector<VectorXd> states;  // labels gamma_j (informational)
  MatrixXd rates;                // M x M, diagonal ignored
  VectorXd initial_dist;         // simplex over M states

  int M() const { return static_cast<int>(initial_dist.size()); }
  VectorXd exit_rates() const {
    const int Ms = M();
    VectorXd v = VectorXd::Zero(Ms);
    for (int i = 0; i < Ms; ++i)
      for (int j = 0; j < Ms; ++j)
        if (j != i) v[i] += rates(i, j);
    return v;
  }
  MatrixXd generator() const {
    MatrixXd Q = rates;
    Q.diagonal().setZero();
    Q.diagonal() = -Q.rowwise().sum();
    return Q;
  }
  // Stationary distribution of the generator (null left eigenvector).
  VectorXd stationary() const;
};

// Common process y = yL + accumulated impacts. Impact blocks are per minor
// type: block k weighs that type's average control / state.
struct CommonProcessSpec {
  CommonDrift drift;
  MatrixXd sigma;          // d x r
  std::vector<MatrixXd> F; // K blocks, each d x m
  MatrixXd F0;             // d x m
  std::vector<MatrixXd> H; // K blocks, each d x n
  MatrixXd H0;             // d x n
  VectorXd y0;             // initial yL
};

// Quadratic stage/terminal weights acting on z (major: [y; x0], minor:
// [x_i; y]), both of size 2n.
struct CostWeights {
  MatrixXd G;  // 2n x 2n
  MatrixXd Q;  // 2n x 2n
  MatrixXd N;  // 2n x m
  MatrixXd R;  // m x m
};

struct PopulationSpec {
  VectorXd type_fractions;      // simplex over K types
  std::vector<int> N_schedule;  // population sizes for finite runs
  MatrixXd wiener_cov;          // r x r, identity if empty
};

struct InitialStateSpec {
  enum class Kind { Zero, Gaussian };
  Kind kind = Kind::Zero;
  double major_std = 0.0;
  double minor_std = 0.0;
};

struct Dims {
  int n = 0;  // agent state
  int m = 0;  // control
  int r = 0;  // each Wiener process
  int d = 0;  // common process (must equal n for the extended systems)
};

struct ModelSpec {
  Dims dims;
  TimeGrid grid;
  MajorDynamics major;
  std::vector<MinorTypeDynamics> minors;   // K entries
  CostWeights major_cost;
  std::vector<CostWeights> minor_costs;    // K entries
  LatentChainSpec chain;
  CommonProcessSpec common;
  PopulationSpec population;
  InitialStateSpec init;
  double convexity_delta = 0.5;

  int K() const { return static_cast<int>(minors.size()); }
  int M() const { return chain.M(); }
  // Effective noise loadings: configured sigma right-scaled by the
  // Cholesky factor of wiener_cov (agents then see standard noise).
  MatrixXd sigma0_eff() const;
  MatrixXd sigma_k_eff(int k) const;
};

struct ValidationItem {
  std::string name;
  bool pass = false;
  std::string detail;
};

struct ValidationReport {
  std::vector<ValidationItem> items;
  bool ok() const {
    for (const auto& it : items)
      if (!it.pass) return false;
    return true;
  }
  std::string summary() const;
};

// Checks dimensions, weight convexity (R - delta*I and Q - N R^-1 N^T and G
// positive semidefinite), chain rates, simplex constraints, and grid sanity.
ValidationReport validate(const ModelSpec& spec);

// Throws DimensionMismatch / ConvexityViolation on the first failing item.
void require_valid(const ModelSpec& spec);

// Stacked feedback gains of the minor population on the shared grid:
//   ubar = C xbar + D x0 + E ybar + rbar  (rbar comes from the offsets)
// plus the induced mean-field dynamics xbar' = Abar xbar + Gbar x0 + Lbar y.
struct GainTrajectories {
  std::vector<MatrixXd> C;     // mK x nK per node
  std::vector<MatrixXd> D;     // mK x n
  std::vector<MatrixXd> E;     // mK x n
  std::vector<MatrixXd> Abar;  // nK x nK
  std::vector<MatrixXd> Gbar;  // nK x n
  std::vector<MatrixXd> Lbar;  // nK x n
};

GainTrajectories zero_gains(const ModelSpec& spec);

// Extended major system on X0 = [ybar; x0; xbar] in R^{2n+nK}. A varies in
// time through the gains; the remaining blocks are constant.
struct ExtendedMajorSystem {
  int n = 0, m = 0, K = 0, dim = 0;
  TimeGrid grid;
  std::vector<MatrixXd> A;  // per node, dim x dim
  MatrixXd B;               // dim x m
  MatrixXd Sigma;           // dim x (2r + rK)
  MatrixXd Qx;              // dim x dim
  MatrixXd Nx;              // dim x m
  MatrixXd R;               // m x m
  MatrixXd Gx;              // dim x dim
};

// Extended minor system on X_i = [x_i; ybar; x0; xbar] in R^{3n+nK}; the
// lower-right block of A is the closed-loop extended major matrix, so the
// major Riccati trajectory enters here.
struct ExtendedMinorSystem {
  int n = 0, m = 0, K = 0, dim = 0;
  TimeGrid grid;
  std::vector<MatrixXd> A;
  MatrixXd B;
  MatrixXd Sigma;
  MatrixXd Qx;
  MatrixXd Nx;
  MatrixXd R;
  MatrixXd Gx;
};

ExtendedMajorSystem build_extended_major(const ModelSpec& spec,
                                         const GainTrajectories& gains);

ExtendedMinorSystem build_extended_minor(const ModelSpec& spec, int k,
                                         const ExtendedMajorSystem& major,
                                         const std::vector<MatrixXd>& Pi0);

}  // namespace mfglab
