#pragma once

#include <vector>

#include "mfglab/grid.hpp"
#include "mfglab/linalg.hpp"
#include "mfglab/model.hpp"

namespace mfglab {

// Posterior over latent chain states, advanced along one observation path of
// the unimpacted common process.
struct FilterState {
  VectorXd pi;          // posterior over M states
  int node = 0;         // grid node
  VectorXd y;           // current observation point yL(t)
  VectorXd fhat;        // posterior-mean drift at (node, y)
  VectorXd innovation;  // accumulated innovation process
  int clip_warnings = 0;
};

// Posterior update driven by observation increments:
//   dpi_j = (pi^T Q)_j dt + pi_j (f_j - fhat)^T (sigma sigma^T)^-1 (dy - fhat dt)
// (Euler step, then clip to [0,1] and renormalize). The innovation increment
// is sigma^+ (dy - fhat dt) with the Moore-Penrose right inverse of sigma.
class WonhamFilter {
 public:
  explicit WonhamFilter(const ModelSpec& spec);

  FilterState init(const VectorXd& y0) const;
  FilterState init() const;  // starts at the model's y0

  // Advances node -> node+1 given dy = yL(node+1) - yL(node).
  FilterState step(const FilterState& s, const VectorXd& dy) const;

  VectorXd posterior_drift(int node, const VectorXd& y,
                           const VectorXd& pi) const;
  VectorXd innovation_increment(const FilterState& s, const VectorXd& dy) const;

  bool degenerate() const { return degenerate_; }
  int states() const { return M_; }

 private:
  const ModelSpec* spec_;
  TimeGrid grid_;
  int M_ = 0;
  MatrixXd generator_;   // M x M
  MatrixXd ssT_inv_;     // d x d
  MatrixXd sigma_pinv_;  // r x d
  bool degenerate_ = false;
};

// CSV export of a filtered path: t, posterior components, filtered drift.
void export_filter_csv(const std::string& path, const TimeGrid& grid,
                       const std::vector<FilterState>& states);

}  // namespace mfglab
