#pragma once

#include <vector>

#include "mfglab/model.hpp"
#include "mfglab/riccati.hpp"

namespace mfglab {

// Block layout of the extended minor state [x_i; ybar; x0; xbar]: three n
// blocks followed by one nK block.
inline int minor_block_offset(int n, int K, int blk) {
  (void)K;
  return blk < 3 ? blk * n : 3 * n;
}
inline int minor_block_size(int n, int K, int blk) { return blk < 3 ? n : n * K; }

inline MatrixXd pik_block(const MatrixXd& Pi, int n, int K, int row_blk,
                          int col_blk) {
  return Pi.block(minor_block_offset(n, K, row_blk),
                  minor_block_offset(n, K, col_blk),
                  minor_block_size(n, K, row_blk),
                  minor_block_size(n, K, col_blk));
}

inline MatrixXd nk_block(const MatrixXd& Nx, int n, int K, int blk) {
  return Nx.middleRows(minor_block_offset(n, K, blk),
                       minor_block_size(n, K, blk));
}

// Converged equilibrium data: feedback gain trajectories, the Riccati
// trajectories they induce, and the extended systems assembled from them.
struct MeanFieldGains {
  GainTrajectories gains;
  RiccatiSolution Pi0;
  std::vector<RiccatiSolution> Pik;
  ExtendedMajorSystem major;
  std::vector<ExtendedMinorSystem> minors;
  int iterations = 0;
  double residual = 0.0;
  bool converged = false;
  std::vector<double> residual_history;
};

// Damped Picard iteration on the gain trajectories: each sweep solves the
// major Riccati equation, then every type's minor Riccati equation, reads
// new gains off the Pi_k blocks, and mixes them into the current iterate.
// The residual is the fixed-point gap max over nodes and gain families of
// the Frobenius norm before damping.
MeanFieldGains solve_consistency(const ModelSpec& spec, double tol = 1e-10,
                                 double damping = 0.5, int max_iter = 100);

// One application of the fixed-point map: gains -> (systems, Riccatis, new
// gains). solve_consistency iterates this; tests use it for re-substitution.
struct ConsistencyMapResult {
  ExtendedMajorSystem major;
  RiccatiSolution Pi0;
  std::vector<ExtendedMinorSystem> minors;
  std::vector<RiccatiSolution> Pik;
  GainTrajectories new_gains;
};
ConsistencyMapResult apply_consistency_map(const ModelSpec& spec,
                                           const GainTrajectories& gains);

double gain_distance(const GainTrajectories& a, const GainTrajectories& b);

// Stability of the aggregate minor closed loop at t = 0: the block-diagonal
// matrix diag_k(A_k - B_k R_k^-1 (N_k1^T + B_k^T Pi_k11(0))).
struct HurwitzReport {
  MatrixXd M1;
  Eigen::VectorXcd eigenvalues;
  double max_real_part = 0.0;
  bool hurwitz = false;
};
HurwitzReport check_hurwitz(const ModelSpec& spec, const MeanFieldGains& mf);

}  // namespace mfglab
