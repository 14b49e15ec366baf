#include "mfglab/meanfield.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "mfglab/errors.hpp"
#include "mfglab/parallel.hpp"

namespace mfglab {

namespace {

// Zero feedback with the mean-field matrix it induces (Abar_k = A_k e_k), so
// structural identities hold for the initial iterate and, by linearity, for
// every damped combination thereafter.
GainTrajectories initial_gains(const ModelSpec& spec) {
  GainTrajectories g = zero_gains(spec);
  const int n = spec.dims.n, K = spec.K();
  MatrixXd abar = MatrixXd::Zero(n * K, n * K);
  for (int k = 0; k < K; ++k) {
    abar.block(n * k, 0, n, n * K) = spec.minors[k].A * type_embed(n, K, k);
  }
  for (auto& A : g.Abar) A = abar;
  return g;
}

GainTrajectories mix(const GainTrajectories& a, const GainTrajectories& b,
                     double lambda) {
  GainTrajectories out = a;
  for (size_t i = 0; i < a.C.size(); ++i) {
    out.C[i] = (1 - lambda) * a.C[i] + lambda * b.C[i];
    out.D[i] = (1 - lambda) * a.D[i] + lambda * b.D[i];
    out.E[i] = (1 - lambda) * a.E[i] + lambda * b.E[i];
    out.Abar[i] = (1 - lambda) * a.Abar[i] + lambda * b.Abar[i];
    out.Gbar[i] = (1 - lambda) * a.Gbar[i] + lambda * b.Gbar[i];
    out.Lbar[i] = (1 - lambda) * a.Lbar[i] + lambda * b.Lbar[i];
  }
  return out;
}

}  // namespace

double gain_distance(const GainTrajectories& a, const GainTrajectories& b) {
  double worst = 0.0;
  auto upd = [&](const std::vector<MatrixXd>& x, const std::vector<MatrixXd>& y) {
    for (size_t i = 0; i < x.size(); ++i) {
      worst = std::max(worst, (x[i] - y[i]).norm());
    }
  };
  upd(a.C, b.C);
  upd(a.D, b.D);
  upd(a.E, b.E);
  upd(a.Abar, b.Abar);
  upd(a.Gbar, b.Gbar);
  upd(a.Lbar, b.Lbar);
  return worst;
}

ConsistencyMapResult apply_consistency_map(const ModelSpec& spec,
                                           const GainTrajectories& gains) {
  const int n = spec.dims.n, K = spec.K();
  const TimeGrid& grid = spec.grid;
  const int nodes = grid.nodes();

  ConsistencyMapResult res;
  res.major = build_extended_major(spec, gains);

  RiccatiProblem p0;
  p0.A = interpolant(res.major.A, grid);
  p0.B = res.major.B;
  p0.Q = res.major.Qx;
  p0.N = res.major.Nx;
  p0.R = res.major.R;
  p0.G = res.major.Gx;
  res.Pi0 = solve_backward(p0, grid);

  res.minors.resize(K);
  res.Pik.resize(K);
  parallel_for_index(K, [&](std::int64_t k) {
    res.minors[k] = build_extended_minor(spec, static_cast<int>(k), res.major,
                                         res.Pi0.Pi);
    RiccatiProblem pk;
    pk.A = interpolant(res.minors[k].A, grid);
    pk.B = res.minors[k].B;
    pk.Q = res.minors[k].Qx;
    pk.N = res.minors[k].Nx;
    pk.R = res.minors[k].R;
    pk.G = res.minors[k].Gx;
    res.Pik[k] = solve_backward(pk, grid);
  });

  GainTrajectories out = zero_gains(spec);
  for (int k = 0; k < K; ++k) {
    const auto& mk = spec.minors[k];
    const MatrixXd Rk_inv = spec.minor_costs[k].R.inverse();
    const MatrixXd ek = type_embed(n, K, k);
    const MatrixXd& Nx = res.minors[k].Nx;
    const MatrixXd N1t = nk_block(Nx, n, K, 0).transpose();
    const MatrixXd N2t = nk_block(Nx, n, K, 1).transpose();
    const MatrixXd N3t = nk_block(Nx, n, K, 2).transpose();
    const MatrixXd N4t = nk_block(Nx, n, K, 3).transpose();
    for (int i = 0; i < nodes; ++i) {
      const MatrixXd& Pi = res.Pik[k].Pi[i];
      const MatrixXd Bt = mk.B.transpose();
      const MatrixXd Ck =
          -Rk_inv * ((N1t + Bt * pik_block(Pi, n, K, 0, 0)) * ek) -
          Rk_inv * (N4t + Bt * pik_block(Pi, n, K, 0, 3));
      const MatrixXd Dk = -Rk_inv * (N3t + Bt * pik_block(Pi, n, K, 0, 2));
      const MatrixXd Ek = -Rk_inv * (N2t + Bt * pik_block(Pi, n, K, 0, 1));
      out.C[i].middleRows(spec.dims.m * k, spec.dims.m) = Ck;
      out.D[i].middleRows(spec.dims.m * k, spec.dims.m) = Dk;
      out.E[i].middleRows(spec.dims.m * k, spec.dims.m) = Ek;
      out.Abar[i].middleRows(n * k, n) = mk.A * ek + mk.B * Ck;
      out.Gbar[i].middleRows(n * k, n) = mk.B * Dk;
      out.Lbar[i].middleRows(n * k, n) = mk.B * Ek;
    }
  }
  res.new_gains = std::move(out);
  return res;
}

MeanFieldGains solve_consistency(const ModelSpec& spec, double tol,
                                 double damping, int max_iter) {
  if (damping <= 0.0 || damping > 1.0) {
    throw ConfigError("consistency: damping must lie in (0, 1]");
  }
  GainTrajectories gains = initial_gains(spec);

  MeanFieldGains mf;
  double prev_residual = std::numeric_limits<double>::infinity();
  int grow_streak = 0;

  for (int iter = 1; iter <= max_iter; ++iter) {
    ConsistencyMapResult step = apply_consistency_map(spec, gains);
    const double residual = gain_distance(step.new_gains, gains);
    mf.residual_history.push_back(residual);
    mf.iterations = iter;
    mf.residual = residual;

    if (residual < tol) {
      mf.gains = std::move(gains);
      mf.major = std::move(step.major);
      mf.Pi0 = std::move(step.Pi0);
      mf.minors = std::move(step.minors);
      mf.Pik = std::move(step.Pik);
      mf.converged = true;
      return mf;
    }
    if (residual > prev_residual) {
      if (++grow_streak >= 3) {
        throw DivergenceDetected(
            "consistency: residual grew three sweeps in a row, last = " +
            std::to_string(residual));
      }
    } else {
      grow_streak = 0;
    }
    prev_residual = residual;
    gains = mix(gains, step.new_gains, damping);
  }
  throw NoConvergence("consistency: residual " + std::to_string(mf.residual) +
                      " after " + std::to_string(max_iter) + " sweeps");
}

HurwitzReport check_hurwitz(const ModelSpec& spec, const MeanFieldGains& mf) {
  const int n = spec.dims.n, K = spec.K();
  HurwitzReport rep;
  rep.M1 = MatrixXd::Zero(n * K, n * K);
  for (int k = 0; k < K; ++k) {
    const auto& mk = spec.minors[k];
    const MatrixXd Rk_inv = spec.minor_costs[k].R.inverse();
    const MatrixXd N1t = nk_block(mf.minors[k].Nx, n, K, 0).transpose();
    const MatrixXd Pi11 = pik_block(mf.Pik[k].Pi[0], n, K, 0, 0);
    rep.M1.block(n * k, n * k, n, n) =
        mk.A - mk.B * Rk_inv * (N1t + mk.B.transpose() * Pi11);
  }
  Eigen::EigenSolver<MatrixXd> es(rep.M1);
  rep.eigenvalues = es.eigenvalues();
  rep.max_real_part = es.eigenvalues().real().maxCoeff();
  rep.hurwitz = rep.max_real_part < 0.0;
  return rep;
}

}  // namespace mfglab
