#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

namespace mfglab {

using Eigen::MatrixXd;
using Eigen::VectorXd;

inline MatrixXd symmetrize(const MatrixXd& A) { return 0.5 * (A + A.transpose()); }

inline double min_eigenvalue_sym(const MatrixXd& A) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(symmetrize(A),
                                             Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

inline bool is_psd(const MatrixXd& A, double tol = 1e-9) {
  if (A.rows() != A.cols()) return false;
  const double scale = std::max(1.0, A.cwiseAbs().maxCoeff());
  if ((A - A.transpose()).cwiseAbs().maxCoeff() > tol * scale) return false;
  return min_eigenvalue_sym(A) >= -tol * scale;
}

// Horizontal concatenation of per-type impact blocks: [F_1 F_2 ... F_K].
inline MatrixXd stacked_impact(const std::vector<MatrixXd>& blocks) {
  const int rows = static_cast<int>(blocks.front().rows());
  int cols = 0;
  for (const auto& b : blocks) cols += static_cast<int>(b.cols());
  MatrixXd out(rows, cols);
  int c = 0;
  for (const auto& b : blocks) {
    out.middleCols(c, b.cols()) = b;
    c += static_cast<int>(b.cols());
  }
  return out;
}

// Population-weighted impact: block k scaled by fraction pi_k, so the
// result acts on the stacked per-type mean field.
inline MatrixXd scaled_impact(const std::vector<MatrixXd>& blocks,
                              const VectorXd& pi) {
  std::vector<MatrixXd> scaled(blocks.size());
  for (size_t k = 0; k < blocks.size(); ++k) scaled[k] = pi[k] * blocks[k];
  return stacked_impact(scaled);
}

// Embedding e_k: n x nK matrix equal to I_n in the k-th block column.
inline MatrixXd type_embed(int n, int K, int k) {
  MatrixXd e = MatrixXd::Zero(n, n * K);
  e.middleCols(n * k, n) = MatrixXd::Identity(n, n);
  return e;
}

inline double max_abs(const MatrixXd& A) {
  return A.size() == 0 ? 0.0 : A.cwiseAbs().maxCoeff();
}

}  // namespace mfglab
