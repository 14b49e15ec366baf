#pragma once

// Independent reference implementations used to cross-check the solver
// modules: backward RK4 integrators for terminal-value problems, a bootstrap
// particle filter with systematic resampling, closed-form OU moments, and
// the quadratic value function of a time-varying tracking problem. These
// share no solver code with the library; they only read the model structs
// and the converged Riccati data they are asked to verify.

#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "mfglab/grid.hpp"
#include "mfglab/meanfield.hpp"
#include "mfglab/model.hpp"

namespace oracles {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// ---------------------------------------------------------------------------
// Backward RK4 for dv/dt = rhs(t, v), v(T) = terminal; returns all nodes.
inline std::vector<VectorXd> rk4_backward(
    const std::function<VectorXd(double, const VectorXd&)>& rhs,
    const VectorXd& terminal, const mfglab::TimeGrid& grid) {
  std::vector<VectorXd> v(grid.nodes());
  v[grid.steps] = terminal;
  const double h = grid.dt();
  for (int i = grid.steps; i > 0; --i) {
    const double t = grid.t(i);
    const VectorXd& x = v[i];
    const VectorXd k1 = rhs(t, x);
    const VectorXd k2 = rhs(t - 0.5 * h, x - 0.5 * h * k1);
    const VectorXd k3 = rhs(t - 0.5 * h, x - 0.5 * h * k2);
    const VectorXd k4 = rhs(t - h, x - h * k3);
    v[i - 1] = x - (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }
  return v;
}

inline std::vector<MatrixXd> rk4_backward_mat(
    const std::function<MatrixXd(double, const MatrixXd&)>& rhs,
    const MatrixXd& terminal, const mfglab::TimeGrid& grid) {
  const int rows = static_cast<int>(terminal.rows());
  const int cols = static_cast<int>(terminal.cols());
  const auto vec_rhs = [&](double t, const VectorXd& x) -> VectorXd {
    const MatrixXd X = Eigen::Map<const MatrixXd>(x.data(), rows, cols);
    const MatrixXd D = rhs(t, X);
    return Eigen::Map<const VectorXd>(D.data(), D.size());
  };
  const VectorXd term = Eigen::Map<const VectorXd>(terminal.data(),
                                                   terminal.size());
  const std::vector<VectorXd> flat = rk4_backward(vec_rhs, term, grid);
  std::vector<MatrixXd> out(flat.size());
  for (size_t i = 0; i < flat.size(); ++i) {
    out[i] = Eigen::Map<const MatrixXd>(flat[i].data(), rows, cols);
  }
  return out;
}

// Riccati terminal-value problem with cross weights:
//   -dPi/dt = A(t)' Pi + Pi A(t) + Q - (Pi B + N) R^-1 (B' Pi + N'),
//   Pi(T) = G.
inline std::vector<MatrixXd> lqr_backward(
    const std::function<MatrixXd(double)>& A, const MatrixXd& B,
    const MatrixXd& Q, const MatrixXd& N, const MatrixXd& R, const MatrixXd& G,
    const mfglab::TimeGrid& grid) {
  const MatrixXd Rinv = R.inverse();
  const auto rhs = [&](double t, const MatrixXd& Pi) -> MatrixXd {
    const MatrixXd At = A(t);
    const MatrixXd gain = B.transpose() * Pi + N.transpose();
    const MatrixXd F =
        At.transpose() * Pi + Pi * At + Q - gain.transpose() * Rinv * gain;
    return -F;  // backward direction
  };
  return rk4_backward_mat(rhs, G, grid);
}

// Linear interpolation of per-node samples, for feeding RK4 substages.
inline std::function<MatrixXd(double)> interp_nodes(
    const std::vector<MatrixXd>& samples, const mfglab::TimeGrid& grid) {
  return [&samples, grid](double t) -> MatrixXd {
    const double x = std::min(std::max(t / grid.dt(), 0.0),
                              static_cast<double>(grid.steps));
    const int lo = std::min(static_cast<int>(x), grid.steps - 1);
    const double w = x - lo;
    return (1.0 - w) * samples[lo] + w * samples[lo + 1];
  };
}

inline std::function<VectorXd(double)> interp_vec_nodes(
    const std::vector<VectorXd>& samples, const mfglab::TimeGrid& grid) {
  return [&samples, grid](double t) -> VectorXd {
    const double x = std::min(std::max(t / grid.dt(), 0.0),
                              static_cast<double>(grid.steps));
    const int lo = std::min(static_cast<int>(x), grid.steps - 1);
    const double w = x - lo;
    return (1.0 - w) * samples[lo] + w * samples[lo + 1];
  };
}

// ---------------------------------------------------------------------------
// Quadratic value function of the tracking problem
//   dz = (A(t) z + B u + c(t)) dt,  J = 1/2 z_T' G z_T +
//   1/2 int (z'Qz + 2 z'Nu + u'Ru) dt,
// V(t, z) = 1/2 z' Pi(t) z + s(t)' z + kappa(t):
//   -Pi' = A'Pi + Pi A + Q - (Pi B + N) R^-1 (B'Pi + N')
//   -s'  = (A - B R^-1 (B'Pi + N'))' s + Pi c
//   -k'  = c's - 1/2 s' B R^-1 B' s
struct TrackingValue {
  std::vector<MatrixXd> Pi;
  std::vector<VectorXd> s;
  std::vector<double> kappa;

  double value(int node, const VectorXd& z) const {
    return 0.5 * z.dot(Pi[node] * z) + s[node].dot(z) + kappa[node];
  }
};

inline TrackingValue tracking_value(const std::function<MatrixXd(double)>& A,
                                    const MatrixXd& B, const MatrixXd& Q,
                                    const MatrixXd& N, const MatrixXd& R,
                                    const MatrixXd& G,
                                    const std::function<VectorXd(double)>& c,
                                    const mfglab::TimeGrid& grid) {
  const int dim = static_cast<int>(G.rows());
  const MatrixXd Rinv = R.inverse();
  const auto rhs = [&](double t, const VectorXd& x) -> VectorXd {
    const MatrixXd Pi = Eigen::Map<const MatrixXd>(x.data(), dim, dim);
    const VectorXd s = x.segment(dim * dim, dim);
    const MatrixXd At = A(t);
    const VectorXd ct = c(t);
    const MatrixXd gain = B.transpose() * Pi + N.transpose();
    const MatrixXd F_Pi =
        At.transpose() * Pi + Pi * At + Q - gain.transpose() * Rinv * gain;
    const MatrixXd Acl = At - B * Rinv * gain;
    const VectorXd F_s = Acl.transpose() * s + Pi * ct;
    const VectorXd Bs = B.transpose() * s;
    const double F_k = ct.dot(s) - 0.5 * Bs.dot(Rinv * Bs);
    VectorXd out(dim * dim + dim + 1);
    Eigen::Map<MatrixXd>(out.data(), dim, dim) = -F_Pi;
    out.segment(dim * dim, dim) = -F_s;
    out[dim * dim + dim] = -F_k;
    return out;
  };
  VectorXd term = VectorXd::Zero(dim * dim + dim + 1);
  Eigen::Map<MatrixXd>(term.data(), dim, dim) = G;
  const std::vector<VectorXd> flat = rk4_backward(rhs, term, grid);
  TrackingValue tv;
  tv.Pi.resize(flat.size());
  tv.s.resize(flat.size());
  tv.kappa.resize(flat.size());
  for (size_t i = 0; i < flat.size(); ++i) {
    tv.Pi[i] = Eigen::Map<const MatrixXd>(flat[i].data(), dim, dim);
    tv.s[i] = flat[i].segment(dim * dim, dim);
    tv.kappa[i] = flat[i][dim * dim + dim];
  }
  return tv;
}

// ---------------------------------------------------------------------------
// Independent backward integration of the equilibrium offsets when the
// forcing is deterministic (single chain state, time-constant drift): the
// major offset s0 and the per-type offsets sbar_k form a coupled linear ODE
// through the average control offsets. The right side is assembled here
// directly from the converged Riccati data and integrated with the oracle
// RK4; nothing is shared with the library's offset module.
inline std::vector<VectorXd> deterministic_offset_oracle(
    const mfglab::ModelSpec& spec, const mfglab::MeanFieldGains& mf) {
  const int n = spec.dims.n, K = spec.K(), d = spec.dims.d;
  const auto& maj = mf.major;
  const int p0 = maj.dim;
  const int pk = mf.minors[0].dim;

  auto A0t = interp_nodes(maj.A, spec.grid);
  auto Pi0t = interp_nodes(mf.Pi0.Pi, spec.grid);
  std::vector<std::function<MatrixXd(double)>> Akt, Pikt;
  for (int k = 0; k < K; ++k) {
    Akt.push_back(interp_nodes(mf.minors[k].A, spec.grid));
    Pikt.push_back(interp_nodes(mf.Pik[k].Pi, spec.grid));
  }
  const MatrixXd R0inv = maj.R.inverse();
  const VectorXd f = spec.common.drift.eval(0, VectorXd::Zero(d), 0);

  const auto rhs = [&](double t, const VectorXd& v) -> VectorXd {
    const MatrixXd Pi0 = Pi0t(t);
    const MatrixXd Acl0 =
        A0t(t) -
        maj.B * R0inv * (maj.B.transpose() * Pi0 + maj.Nx.transpose());
    const VectorXd s0 = v.head(p0);

    // forcing of the closed-loop extended major system
    VectorXd yforce = f;
    VectorXd mbar = VectorXd::Zero(n * K);
    for (int k = 0; k < K; ++k) {
      const VectorXd skx = v.segment(p0 + k * pk, n);
      const VectorXd rk = -spec.minor_costs[k].R.inverse() *
                          spec.minors[k].B.transpose() * skx;
      yforce += spec.population.type_fractions[k] * spec.common.F[k] * rk;
      mbar.segment(k * n, n) = spec.minors[k].B * rk + spec.minors[k].b.at(0);
    }
    VectorXd c0(p0);
    c0.head(d) = yforce;
    c0.segment(d, n) = spec.major.b0.at(0);
    c0.tail(n * K) = mbar;

    VectorXd out(v.size());
    out.head(p0) = -(Acl0.transpose() * s0 + Pi0 * c0);

    // minors additionally see the major control offset through their
    // environment block
    const VectorXd env_force =
        c0 + maj.B * (-R0inv * (maj.B.transpose() * s0));
    for (int k = 0; k < K; ++k) {
      const auto& mk = mf.minors[k];
      const MatrixXd Pik = Pikt[k](t);
      const MatrixXd Aclk =
          Akt[k](t) -
          mk.B * mk.R.inverse() * (mk.B.transpose() * Pik + mk.Nx.transpose());
      VectorXd ck(pk);
      ck.head(n) = spec.minors[k].b.at(0);
      ck.tail(p0) = env_force;
      const VectorXd sk = v.segment(p0 + k * pk, pk);
      out.segment(p0 + k * pk, pk) = -(Aclk.transpose() * sk + Pik * ck);
    }
    return out;
  };
  return rk4_backward(rhs, VectorXd::Zero(p0 + K * pk), spec.grid);
}

// ---------------------------------------------------------------------------
// Bootstrap particle filter for the latent chain observed through
//   dy = f(t, y, state) dt + sigma dW.
// Particles carry chain states, propagate through exact exponential clocks,
// get reweighted by the Gaussian increment likelihood, and are resampled
// systematically every step. Posterior estimates are taken before resampling.
inline std::vector<VectorXd> particle_posteriors(
    const mfglab::LatentChainSpec& chain, const mfglab::CommonDrift& drift,
    const MatrixXd& sigma, const mfglab::TimeGrid& grid,
    const std::vector<VectorXd>& y_path, int particles, std::uint64_t seed) {
  const int M = chain.M();
  const double dt = grid.dt();
  const MatrixXd cov_inv = (sigma * sigma.transpose() * dt).inverse();
  const VectorXd exit = chain.exit_rates();

  std::mt19937_64 eng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const auto categorical = [&](const VectorXd& probs) {
    const double u = unif(eng);
    double acc = 0.0;
    for (int j = 0; j + 1 < static_cast<int>(probs.size()); ++j) {
      acc += probs[j];
      if (u <= acc) return j;
    }
    return static_cast<int>(probs.size()) - 1;
  };

  std::vector<int> state(particles);
  for (int p = 0; p < particles; ++p) state[p] = categorical(chain.initial_dist);

  std::vector<VectorXd> post(grid.nodes());
  post[0] = chain.initial_dist;

  std::vector<double> logw(particles);
  std::vector<int> resampled(particles);
  for (int i = 0; i < grid.steps; ++i) {
    // exact-clock propagation over [t_i, t_{i+1}]
    for (int p = 0; p < particles; ++p) {
      double remain = dt;
      while (exit[state[p]] > 0.0) {
        const double tau = -std::log(1.0 - unif(eng)) / exit[state[p]];
        if (tau > remain) break;
        remain -= tau;
        VectorXd w = chain.rates.row(state[p]).transpose();
        w[state[p]] = 0.0;
        w /= w.sum();
        state[p] = categorical(w);
      }
    }
    // weight by the observed increment
    const VectorXd dy = y_path[i + 1] - y_path[i];
    double max_lw = -1e300;
    for (int p = 0; p < particles; ++p) {
      const VectorXd res = dy - drift.eval(i, y_path[i], state[p]) * dt;
      logw[p] = -0.5 * res.dot(cov_inv * res);
      max_lw = std::max(max_lw, logw[p]);
    }
    double total = 0.0;
    VectorXd byst = VectorXd::Zero(M);
    for (int p = 0; p < particles; ++p) {
      const double w = std::exp(logw[p] - max_lw);
      logw[p] = w;
      total += w;
      byst[state[p]] += w;
    }
    post[i + 1] = byst / total;
    // systematic resampling
    const double u0 = unif(eng) / particles;
    double cum = logw[0] / total;
    int src = 0;
    for (int p = 0; p < particles; ++p) {
      const double target = u0 + static_cast<double>(p) / particles;
      while (cum < target && src + 1 < particles) {
        ++src;
        cum += logw[src] / total;
      }
      resampled[p] = state[src];
    }
    state = resampled;
  }
  return post;
}

// Exact two-point Bayes posterior for a chain that never jumps: likelihood
// ratio of constant-drift Gaussian paths (scalar observation).
inline VectorXd static_bayes_posterior(const VectorXd& prior,
                                       const std::vector<double>& f,
                                       double sigma, double y_minus_y0,
                                       double t) {
  const int M = static_cast<int>(prior.size());
  VectorXd logl(M);
  for (int j = 0; j < M; ++j) {
    logl[j] = (f[j] * y_minus_y0 - 0.5 * f[j] * f[j] * t) / (sigma * sigma);
  }
  const double mx = logl.maxCoeff();
  VectorXd post(M);
  for (int j = 0; j < M; ++j) post[j] = prior[j] * std::exp(logl[j] - mx);
  return post / post.sum();
}

// ---------------------------------------------------------------------------
// Scalar OU moments for dx = (a x + c) dt + s dW.
inline double ou_mean(double a, double c, double s, double x0, double T) {
  (void)s;
  if (a == 0.0) return x0 + c * T;
  return std::exp(a * T) * x0 + (c / a) * (std::exp(a * T) - 1.0);
}

inline double ou_var(double a, double s, double v0, double T) {
  if (a == 0.0) return v0 + s * s * T;
  return std::exp(2.0 * a * T) * v0 +
         (s * s) / (2.0 * a) * (std::exp(2.0 * a * T) - 1.0);
}

}  // namespace oracles
