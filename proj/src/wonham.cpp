#include "mfglab/wonham.hpp"

#include <Eigen/Dense>
#include <fstream>

#include "mfglab/errors.hpp"

namespace mfglab {

WonhamFilter::WonhamFilter(const ModelSpec& spec)
    : spec_(&spec), grid_(spec.grid), M_(spec.M()) {
  generator_ = spec.chain.generator();
  const MatrixXd& sigma = spec.common.sigma;
  const MatrixXd ssT = sigma * sigma.transpose();
  Eigen::FullPivLU<MatrixXd> lu(ssT);
  if (lu.isInvertible()) {
    ssT_inv_ = lu.inverse();
    sigma_pinv_ = sigma.transpose() * ssT_inv_;
  } else {
    if (M_ > 1) {
      throw SingularSigma(
          "filter: sigma sigma^T is singular but the chain has " +
          std::to_string(M_) + " states");
    }
    degenerate_ = true;  // nothing to infer; update term never used
    ssT_inv_ = MatrixXd::Zero(ssT.rows(), ssT.cols());
    sigma_pinv_ = MatrixXd::Zero(sigma.cols(), sigma.rows());
  }
}

FilterState WonhamFilter::init(const VectorXd& y0) const {
  FilterState s;
  s.pi = spec_->chain.initial_dist;
  s.node = 0;
  s.y = y0;
  s.fhat = posterior_drift(0, y0, s.pi);
  s.innovation = VectorXd::Zero(spec_->dims.r);
  return s;
}

FilterState WonhamFilter::init() const { return init(spec_->common.y0); }

VectorXd WonhamFilter::posterior_drift(int node, const VectorXd& y,
                                       const VectorXd& pi) const {
  VectorXd f = VectorXd::Zero(spec_->dims.d);
  for (int j = 0; j < M_; ++j) {
    if (pi[j] == 0.0) continue;
    f += pi[j] * spec_->common.drift.eval(node, y, j);
  }
  return f;
}

FilterState WonhamFilter::step(const FilterState& s, const VectorXd& dy) const {
  const double dt = grid_.dt();
  FilterState out;
  out.clip_warnings = s.clip_warnings;

  VectorXd pi = s.pi;
  if (M_ > 1) {
    const VectorXd fhat = posterior_drift(s.node, s.y, s.pi);
    const VectorXd residual = dy - fhat * dt;
    VectorXd raw(M_);
    const VectorXd chain_flow = generator_.transpose() * s.pi;
    for (int j = 0; j < M_; ++j) {
      const VectorXd fj = spec_->common.drift.eval(s.node, s.y, j);
      const double update =
          s.pi[j] * (fj - fhat).dot(ssT_inv_ * residual);
      raw[j] = s.pi[j] + chain_flow[j] * dt + update;
    }
    if (raw.minCoeff() < -0.01) out.clip_warnings++;
    VectorXd clipped = raw.cwiseMax(0.0);
    const double mass = clipped.sum();
    if (mass <= 0.0) {
      throw DegenerateFilter("filter: posterior mass vanished at t = " +
                             std::to_string(grid_.t(s.node)));
    }
    pi = clipped / mass;
  }

  out.pi = pi;
  out.node = s.node + 1;
  out.y = s.y + dy;
  out.fhat = posterior_drift(out.node, out.y, out.pi);
  out.innovation = s.innovation + innovation_increment(s, dy);
  return out;
}

VectorXd WonhamFilter::innovation_increment(const FilterState& s,
                                            const VectorXd& dy) const {
  if (degenerate_) {
    // Single-state model with flat sigma: the innovation is undefined and
    // unused; report a zero increment.
    return VectorXd::Zero(spec_->dims.r);
  }
  const VectorXd fhat = posterior_drift(s.node, s.y, s.pi);
  return sigma_pinv_ * (dy - fhat * grid_.dt());
}

void export_filter_csv(const std::string& path, const TimeGrid& grid,
                       const std::vector<FilterState>& states) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  const int M = static_cast<int>(states.front().pi.size());
  const int d = static_cast<int>(states.front().fhat.size());
  out << "t";
  for (int j = 0; j < M; ++j) out << ",pi" << j + 1;
  for (int c = 0; c < d; ++c) out << ",fhat" << c + 1;
  out << "\n";
  char buf[32];
  for (const auto& s : states) {
    std::snprintf(buf, sizeof(buf), "%.17g", grid.t(s.node));
    out << buf;
    for (int j = 0; j < M; ++j) {
      std::snprintf(buf, sizeof(buf), "%.17g", s.pi[j]);
      out << "," << buf;
    }
    for (int c = 0; c < d; ++c) {
      std::snprintf(buf, sizeof(buf), "%.17g", s.fhat[c]);
      out << "," << buf;
    }
    out << "\n";
  }
}

}  // namespace mfglab
