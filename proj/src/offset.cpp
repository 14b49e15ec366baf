#include "mfglab/offset.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <string>

#include "mfglab/errors.hpp"
#include "mfglab/parallel.hpp"
#include "mfglab/rng.hpp"
#include "mfglab/wonham.hpp"

namespace mfglab {

namespace {

// Deterministic part of the major forcing: [0; b0(t); stacked b_k(t)].
VectorXd major_forcing_const(const ModelSpec& spec, int node) {
  const int n = spec.dims.n, K = spec.K();
  VectorXd c = VectorXd::Zero(2 * n + n * K);
  c.segment(n, n) = spec.major.b0.at(node);
  for (int k = 0; k < K; ++k) {
    c.segment(2 * n + n * k, n) = spec.minors[k].b.at(node);
  }
  return c;
}

}  // namespace

OffsetCoefficients assemble_offset_system(const ModelSpec& spec,
                                          const MeanFieldGains& mf) {
  const int n = spec.dims.n, d = spec.dims.d, K = spec.K();
  const int nodes = spec.grid.nodes();
  require_same_grid(spec.grid, mf.Pi0.grid, "offset assembly");

  OffsetCoefficients sys;
  sys.p0 = mf.major.dim;
  sys.pk = mf.minors.front().dim;
  sys.K = K;
  sys.dim = sys.p0 + K * sys.pk;
  sys.d = d;

  const MatrixXd R0_inv = mf.major.R.inverse();
  const MatrixXd& B0 = mf.major.B;
  const MatrixXd B0R0B0t = B0 * R0_inv * B0.transpose();
  const MatrixXd B0R0N0t = B0 * R0_inv * mf.major.Nx.transpose();

  // U_k maps sbar_k into the major forcing: the population reaction enters
  // the common process through Fpi rbar and the mean field through mbar.
  std::vector<MatrixXd> U(K);
  std::vector<MatrixXd> RinvBt(K);
  const VectorXd& frac = spec.population.type_fractions;
  for (int k = 0; k < K; ++k) {
    RinvBt[k] = spec.minor_costs[k].R.inverse() *
                mf.minors[k].B.transpose();  // m x pk
    U[k] = MatrixXd::Zero(sys.p0, sys.pk);
    U[k].topRows(n) = -frac[k] * spec.common.F[k] * RinvBt[k];
    U[k].middleRows(2 * n + n * k, n) = -spec.minors[k].B * RinvBt[k];
  }

  sys.Kmat.assign(nodes, MatrixXd::Zero(sys.dim, sys.dim));
  sys.Phi.assign(nodes, MatrixXd::Zero(sys.dim, d));
  sys.beta.assign(nodes, VectorXd::Zero(sys.dim));

  MatrixXd Jf = MatrixXd::Zero(sys.p0, d);  // fhat enters the y row
  Jf.topRows(d) = MatrixXd::Identity(d, d);

  for (int i = 0; i < nodes; ++i) {
    const MatrixXd& Pi0 = mf.Pi0.Pi[i];
    const MatrixXd K0 =
        (mf.major.A[i] - B0R0N0t).transpose() - Pi0 * B0R0B0t;
    const VectorXd c0 = major_forcing_const(spec, i);

    MatrixXd& Km = sys.Kmat[i];
    Km.block(0, 0, sys.p0, sys.p0) = K0;
    for (int k = 0; k < K; ++k) {
      Km.block(0, sys.p0 + sys.pk * k, sys.p0, sys.pk) = Pi0 * U[k];
    }
    sys.Phi[i].topRows(sys.p0) = Pi0 * Jf;
    sys.beta[i].head(sys.p0) = Pi0 * c0;

    for (int k = 0; k < K; ++k) {
      const MatrixXd& Pik = mf.Pik[k].Pi[i];
      const MatrixXd& Bk = mf.minors[k].B;
      const MatrixXd BkRkBkt = Bk * RinvBt[k];
      const MatrixXd Kk =
          (mf.minors[k].A[i] - Bk * spec.minor_costs[k].R.inverse() *
                                   mf.minors[k].Nx.transpose())
              .transpose() -
          Pik * BkRkBkt;

      // sbar_k forcing [b_k; M0 - B0 R0^-1 B0^T s0] expanded in s0, sbar_l.
      MatrixXd W0 = MatrixXd::Zero(sys.pk, sys.p0);
      W0.bottomRows(sys.p0) = -B0R0B0t;
      MatrixXd Jfk = MatrixXd::Zero(sys.pk, d);
      Jfk.middleRows(n, d) = MatrixXd::Identity(d, d);
      VectorXd ck = VectorXd::Zero(sys.pk);
      ck.head(n) = spec.minors[k].b.at(i);
      ck.tail(sys.p0) = c0;

      const int row = sys.p0 + sys.pk * k;
      Km.block(row, 0, sys.pk, sys.p0) = Pik * W0;
      for (int l = 0; l < K; ++l) {
        MatrixXd Wl = MatrixXd::Zero(sys.pk, sys.pk);
        Wl.bottomRows(sys.p0) = U[l];
        MatrixXd blk = Pik * Wl;
        if (l == k) blk += Kk;
        Km.block(row, sys.p0 + sys.pk * l, sys.pk, sys.pk) = blk;
      }
      sys.Phi[i].middleRows(row, sys.pk) = Pik * Jfk;
      sys.beta[i].segment(row, sys.pk) = Pik * ck;
    }
  }
  return sys;
}

VectorXd FeatureBasis::eval(const VectorXd& y, const VectorXd& pi) const {
  const int p = vars();
  VectorXd v(p);
  v.head(d) = y;
  for (int j = 0; j + 1 < M; ++j) v[d + j] = pi[j];
  VectorXd phi(size());
  phi[0] = 1.0;
  phi.segment(1, p) = v;
  int idx = 1 + p;
  for (int i = 0; i < p; ++i) {
    for (int j = i; j < p; ++j) phi[idx++] = v[i] * v[j];
  }
  return phi;
}

CommonPath sample_common_path(const ModelSpec& spec, std::uint64_t seed,
                              std::uint64_t path_id) {
  const TimeGrid& grid = spec.grid;
  const double dt = grid.dt();
  const double sdt = std::sqrt(dt);
  const int nodes = grid.nodes();
  const int r = spec.dims.r, M = spec.M();

  RngStream chain_rng(seed, path_id, streams::kChain);
  RngStream wiener(seed, path_id, streams::kLatentWiener);
  WonhamFilter filter(spec);

  CommonPath out;
  out.y.resize(nodes);
  out.pi.resize(nodes);
  out.fhat.resize(nodes);
  out.chain.resize(nodes);

  // Latent chain with exact exponential clocks; the state seen by the grid
  // at node i is the exact state at t_i.
  int state = chain_rng.categorical(spec.chain.initial_dist);
  const VectorXd exit = spec.chain.exit_rates();
  double next_jump = exit[state] > 0
                         ? chain_rng.exponential(exit[state])
                         : std::numeric_limits<double>::infinity();

  FilterState fs = filter.init();
  VectorXd y = spec.common.y0;
  out.y[0] = y;
  out.pi[0] = fs.pi;
  out.fhat[0] = fs.fhat;
  out.chain[0] = state;

  for (int i = 0; i < grid.steps; ++i) {
    const VectorXd f = spec.common.drift.eval(i, y, state);
    VectorXd dw(r);
    for (int c = 0; c < r; ++c) dw[c] = sdt * wiener.normal();
    const VectorXd dy = f * dt + spec.common.sigma * dw;

    fs = filter.step(fs, dy);
    y += dy;

    const double t_next = grid.t(i + 1);
    while (next_jump <= t_next) {
      const double at = next_jump;
      // jump destination weighted by the off-diagonal rates
      VectorXd w = spec.chain.rates.row(state).transpose();
      w[state] = 0.0;
      const double tot = w.sum();
      if (tot <= 0) {
        next_jump = std::numeric_limits<double>::infinity();
        break;
      }
      w /= tot;
      state = chain_rng.categorical(w);
      next_jump = exit[state] > 0
                      ? at + chain_rng.exponential(exit[state])
                      : std::numeric_limits<double>::infinity();
    }

    out.y[i + 1] = y;
    out.pi[i + 1] = fs.pi;
    out.fhat[i + 1] = fs.fhat;
    out.chain[i + 1] = state;
  }
  (void)M;
  return out;
}

namespace {

MatrixXd gather_columns(const MatrixXd& features, const std::vector<int>& cols) {
  MatrixXd X(features.rows(), static_cast<Eigen::Index>(cols.size()));
  for (size_t c = 0; c < cols.size(); ++c) X.col(c) = features.col(cols[c]);
  return X;
}

}  // namespace

SliceRegression regress_slice(const MatrixXd& features,
                              const MatrixXd& targets) {
  const int paths = static_cast<int>(features.rows());
  const int q = static_cast<int>(features.cols());
  SliceRegression out;

  // Column 0 is the intercept and enters the candidate set unconditionally;
  // other columns are skipped when they do not vary across paths.
  out.active.push_back(0);
  for (int c = 1; c < q; ++c) {
    const double mean = features.col(c).mean();
    const double sq = (features.col(c).array() - mean).matrix().squaredNorm();
    const double sd = std::sqrt(sq / std::max(paths - 1, 1));
    if (sd > 1e-12 * std::max(1.0, std::abs(mean))) out.active.push_back(c);
  }
  MatrixXd X = gather_columns(features, out.active);

  // Columns that are exact (machine-level) linear combinations of the others
  // add nothing to the fitted subspace; keep the pivot-selected independent
  // set. This happens structurally, e.g. one step after a deterministic
  // start the posterior is an affine function of the observed state.
  Eigen::ColPivHouseholderQR<MatrixXd> probe(X);
  probe.setThreshold(1e-12);
  const Eigen::Index exact_rank = probe.rank();
  if (exact_rank < X.cols()) {
    const auto& perm = probe.colsPermutation().indices();
    std::vector<int> kept(perm.data(), perm.data() + exact_rank);
    std::sort(kept.begin(), kept.end());
    std::vector<int> active;
    active.reserve(kept.size());
    for (int c : kept) active.push_back(out.active[c]);
    out.active = std::move(active);
    X = gather_columns(features, out.active);
  }

  // Survivors that are still nearly dependent mean the basis is ill-posed
  // for this path budget rather than structurally degenerate.
  Eigen::ColPivHouseholderQR<MatrixXd> qr(X);
  qr.setThreshold(1e-8);
  if (qr.rank() < X.cols()) {
    throw RankDeficientRegression(
        "offset regression: feature matrix rank " +
        std::to_string(qr.rank()) + " < " + std::to_string(X.cols()) +
        " independent columns (near-collinear basis)");
  }
  out.coef = qr.solve(targets);
  return out;
}

OffsetEstimator solve_joint_offsets(const ModelSpec& spec,
                                    const MeanFieldGains& mf, int paths,
                                    std::uint64_t seed) {
  const TimeGrid& grid = spec.grid;
  const double dt = grid.dt();
  const int K = spec.K();

  OffsetEstimator est;
  est.grid = grid;
  est.basis.d = spec.dims.d;
  est.basis.M = spec.M();
  if (paths < 10 * est.basis.size()) {
    throw PathBudgetTooSmall("offset regression: " + std::to_string(paths) +
                             " paths < 10 x " +
                             std::to_string(est.basis.size()) + " features");
  }
  est.sys = assemble_offset_system(spec, mf);
  for (int k = 0; k < K; ++k) {
    est.rk_inv_bkT.push_back(spec.minor_costs[k].R.inverse() *
                             mf.minors[k].B.transpose());
    est.Bk.push_back(spec.minors[k].B);
    est.bk.push_back(spec.minors[k].b);
  }
  est.drift = spec.common.drift;

  // Forward pass: one (yL, posterior) path per Monte Carlo sample.
  std::vector<CommonPath> sample(paths);
  parallel_for_index(paths, [&](std::int64_t p) {
    sample[p] = sample_common_path(spec, seed, static_cast<std::uint64_t>(p));
  });

  const int q = est.basis.size();
  const int dim = est.sys.dim;
  est.active.assign(grid.steps, {});
  est.coef.assign(grid.steps, MatrixXd());

  // Backward pass with a trapezoid drift: regress the explicit half step,
  // then solve the implicit half step once per node (shared LU).
  MatrixXd S = MatrixXd::Zero(paths, dim);  // values at node j+1
  MatrixXd Y(paths, dim);
  MatrixXd features(paths, q);

  for (int j = grid.steps - 1; j >= 0; --j) {
    const MatrixXd& K_next = est.sys.Kmat[j + 1];
    const MatrixXd& Phi_next = est.sys.Phi[j + 1];
    const VectorXd& beta_next = est.sys.beta[j + 1];
    parallel_for_index(paths, [&](std::int64_t p) {
      const VectorXd Sp = S.row(p).transpose();
      const VectorXd drift =
          K_next * Sp + Phi_next * sample[p].fhat[j + 1] + beta_next;
      Y.row(p) = (Sp + 0.5 * dt * drift).transpose();
      features.row(p) =
          est.basis.eval(sample[p].y[j], sample[p].pi[j]).transpose();
    });

    SliceRegression reg = regress_slice(features, Y);
    MatrixXd X(paths, reg.active.size());
    for (size_t c = 0; c < reg.active.size(); ++c) {
      X.col(c) = features.col(reg.active[c]);
    }
    const MatrixXd fitted = X * reg.coef;

    Eigen::PartialPivLU<MatrixXd> lu(MatrixXd::Identity(dim, dim) -
                                     0.5 * dt * est.sys.Kmat[j]);
    const MatrixXd& Phi_j = est.sys.Phi[j];
    const VectorXd& beta_j = est.sys.beta[j];
    parallel_for_index(paths, [&](std::int64_t p) {
      const VectorXd rhs = fitted.row(p).transpose() +
                           0.5 * dt * (Phi_j * sample[p].fhat[j] + beta_j);
      S.row(p) = lu.solve(rhs).transpose();
    });

    est.active[j] = std::move(reg.active);
    est.coef[j] = std::move(reg.coef);

    if (j == 0) {
      double acc = 0.0;
      const VectorXd mean = Y.colwise().mean();
      for (int p = 0; p < paths; ++p) {
        acc += (Y.row(p).transpose() - mean).squaredNorm();
      }
      est.slice0_target_sd = std::sqrt(acc / std::max(paths - 1, 1));
    }
  }
  return est;
}

VectorXd OffsetEstimator::regression_rhs(int node, const VectorXd& yL,
                                         const VectorXd& pi) const {
  if (node < 0 || node >= grid.steps) {
    throw OffGrid("offset regression rhs requested outside the solved range");
  }
  const VectorXd phi = basis.eval(yL, pi);
  VectorXd fitted = VectorXd::Zero(sys.dim);
  const auto& act = active[node];
  for (size_t c = 0; c < act.size(); ++c) {
    fitted += phi[act[c]] * coef[node].row(c).transpose();
  }
  VectorXd fhat = VectorXd::Zero(sys.d);
  for (int s = 0; s < basis.M; ++s) {
    if (pi[s] == 0.0) continue;
    fhat += pi[s] * drift.eval(node, yL, s);
  }
  const double dt = grid.dt();
  return fitted + 0.5 * dt * (sys.Phi[node] * fhat + sys.beta[node]);
}

VectorXd OffsetEstimator::stacked_at(int node, const VectorXd& yL,
                                     const VectorXd& pi) const {
  const int dim = sys.dim;
  if (node == grid.steps) return VectorXd::Zero(dim);
  if (node < 0 || node > grid.steps) {
    throw OffGrid("offset evaluation outside the grid");
  }
  const double dt = grid.dt();
  return (MatrixXd::Identity(dim, dim) - 0.5 * dt * sys.Kmat[node])
      .partialPivLu()
      .solve(regression_rhs(node, yL, pi));
}

OffsetValues OffsetEstimator::values_from_stacked(int node,
                                                  const VectorXd& S) const {
  OffsetValues out;
  out.S = S;
  out.s0 = out.S.head(sys.p0);
  const int K = sys.K;
  const int m = static_cast<int>(rk_inv_bkT.front().rows());
  const int n = static_cast<int>(Bk.front().rows());
  out.sbar.resize(K);
  out.rbar = VectorXd::Zero(m * K);
  out.mbar = VectorXd::Zero(n * K);
  for (int k = 0; k < K; ++k) {
    out.sbar[k] = out.S.segment(sys.p0 + sys.pk * k, sys.pk);
    const VectorXd rk = -rk_inv_bkT[k] * out.sbar[k];
    out.rbar.segment(m * k, m) = rk;
    out.mbar.segment(n * k, n) = Bk[k] * rk + bk[k].at(node);
  }
  return out;
}

OffsetValues OffsetEstimator::evaluate(int node, const VectorXd& yL,
                                       const VectorXd& pi) const {
  return values_from_stacked(node, stacked_at(node, yL, pi));
}

OffsetEvaluator::OffsetEvaluator(const OffsetEstimator& est) : est_(&est) {
  const int dim = est.sys.dim;
  const double dt = est.grid.dt();
  lu_.reserve(est.grid.steps);
  for (int j = 0; j < est.grid.steps; ++j) {
    lu_.emplace_back(MatrixXd::Identity(dim, dim) - 0.5 * dt * est.sys.Kmat[j]);
  }
}

OffsetValues OffsetEvaluator::at(int node, const VectorXd& yL,
                                 const VectorXd& pi) const {
  if (node == est_->grid.steps) {
    return est_->values_from_stacked(node, VectorXd::Zero(est_->sys.dim));
  }
  if (node < 0 || node > est_->grid.steps) {
    throw OffGrid("offset evaluation outside the grid");
  }
  const VectorXd S = lu_[node].solve(est_->regression_rhs(node, yL, pi));
  return est_->values_from_stacked(node, S);
}

MartingaleReport martingale_residual_test(const ModelSpec& spec,
                                          const OffsetEstimator& est,
                                          int paths, std::uint64_t seed,
                                          int bins) {
  const TimeGrid& grid = est.grid;
  const double dt = grid.dt();
  const int dim = est.sys.dim;

  std::vector<CommonPath> sample(paths);
  parallel_for_index(paths, [&](std::int64_t p) {
    sample[p] = sample_common_path(spec, seed, static_cast<std::uint64_t>(p));
  });

  // Evaluate S along every path once.
  std::vector<MatrixXd> Spath(paths);
  parallel_for_index(paths, [&](std::int64_t p) {
    MatrixXd S(grid.nodes(), dim);
    for (int j = 0; j <= grid.steps; ++j) {
      S.row(j) = est.stacked_at(j, sample[p].y[j], sample[p].pi[j]).transpose();
    }
    Spath[p] = std::move(S);
  });

  MartingaleReport rep;
  for (int j = 0; j < grid.steps; ++j) {
    // Residual rho = S_{j+1} - S_j + dt/2 (drift_j + drift_{j+1}).
    MatrixXd rho(paths, dim);
    for (int p = 0; p < paths; ++p) {
      const VectorXd Sj = Spath[p].row(j).transpose();
      const VectorXd Sn = Spath[p].row(j + 1).transpose();
      const VectorXd drift_j =
          est.sys.Kmat[j] * Sj + est.sys.Phi[j] * sample[p].fhat[j] +
          est.sys.beta[j];
      const VectorXd drift_n = est.sys.Kmat[j + 1] * Sn +
                               est.sys.Phi[j + 1] * sample[p].fhat[j + 1] +
                               est.sys.beta[j + 1];
      rho.row(p) = (Sn - Sj + 0.5 * dt * (drift_j + drift_n)).transpose();
    }

    // Bin paths on the first observation coordinate at node j.
    std::vector<int> order(paths);
    for (int p = 0; p < paths; ++p) order[p] = p;
    if (bins > 1) {
      std::sort(order.begin(), order.end(), [&](int a, int b) {
        return sample[a].y[j][0] < sample[b].y[j][0];
      });
    }
    const int nb = std::max(1, bins);
    bool pass = true;
    double worst = 0.0;
    for (int b = 0; b < nb; ++b) {
      const int lo = static_cast<int>(static_cast<std::int64_t>(paths) * b / nb);
      const int hi =
          static_cast<int>(static_cast<std::int64_t>(paths) * (b + 1) / nb);
      const int count = hi - lo;
      if (count < 8) continue;
      for (int c = 0; c < dim; ++c) {
        double mean = 0.0;
        for (int p = lo; p < hi; ++p) mean += rho(order[p], c);
        mean /= count;
        double var = 0.0;
        for (int p = lo; p < hi; ++p) {
          const double e = rho(order[p], c) - mean;
          var += e * e;
        }
        var /= std::max(count - 1, 1);
        const double se = std::sqrt(var / count);
        const double scale = 1e-14 * std::max(1.0, std::abs(mean));
        const double t = se > scale ? std::abs(mean) / se : 0.0;
        worst = std::max(worst, t);
        if (t > 3.0) pass = false;
      }
    }
    rep.slices++;
    if (pass) rep.passed++;
    rep.worst_t_stat = std::max(rep.worst_t_stat, worst);
  }
  rep.pass_fraction =
      rep.slices == 0 ? 1.0 : static_cast<double>(rep.passed) / rep.slices;
  return rep;
}

std::vector<VectorXd> solve_offsets_deterministic(const ModelSpec& spec,
                                                  const MeanFieldGains& mf) {
  if (spec.M() != 1 || spec.common.drift.depends_on_y()) {
    throw ConfigError(
        "deterministic offset solve needs a single chain state and a drift "
        "independent of the observation");
  }
  const TimeGrid& grid = spec.grid;
  const double h = grid.dt();
  OffsetCoefficients sys = assemble_offset_system(spec, mf);

  const VectorXd ydummy = VectorXd::Zero(spec.dims.d);
  std::vector<VectorXd> force(grid.nodes());
  for (int i = 0; i < grid.nodes(); ++i) {
    force[i] = sys.Phi[i] * spec.common.drift.eval(i, ydummy, 0) + sys.beta[i];
  }

  auto Kf = interpolant(sys.Kmat, grid);
  std::vector<MatrixXd> force_m(grid.nodes());
  for (int i = 0; i < grid.nodes(); ++i) force_m[i] = force[i];
  auto Ff = interpolant(force_m, grid);

  auto rhs = [&](double t, const VectorXd& S) -> VectorXd {
    return Kf(t) * S + VectorXd(Ff(t));
  };

  std::vector<VectorXd> out(grid.nodes());
  out[grid.steps] = VectorXd::Zero(sys.dim);
  for (int i = grid.steps; i > 0; --i) {
    const double t = grid.t(i);
    const VectorXd& S = out[i];
    const VectorXd k1 = rhs(t, S);
    const VectorXd k2 = rhs(t - 0.5 * h, S + 0.5 * h * k1);
    const VectorXd k3 = rhs(t - 0.5 * h, S + 0.5 * h * k2);
    const VectorXd k4 = rhs(t - h, S + h * k3);
    out[i - 1] = S + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }
  return out;
}

}  // namespace mfglab
