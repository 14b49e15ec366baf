#include "mfglab/sim.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <stdexcept>

#include "mfglab/chain.hpp"
#include "mfglab/errors.hpp"
#include "mfglab/parallel.hpp"
#include "mfglab/rng.hpp"
#include "mfglab/wonham.hpp"

namespace mfglab {

VectorXd control_major(const MeanFieldGains& mf, int node, const VectorXd& X0,
                       const VectorXd& s0) {
  const ExtendedMajorSystem& sys = mf.major;
  return -sys.R.ldlt().solve(sys.Nx.transpose() * X0 +
                             sys.B.transpose() * (mf.Pi0.at(node) * X0 + s0));
}

VectorXd control_minor(const MeanFieldGains& mf, int k, int node,
                       const VectorXd& Xi, const VectorXd& sbar_k) {
  const ExtendedMinorSystem& sys = mf.minors.at(k);
  return -sys.R.ldlt().solve(
      sys.Nx.transpose() * Xi +
      sys.B.transpose() * (mf.Pik.at(k).at(node) * Xi + sbar_k));
}

namespace {

// Feedback operators sampled once per node so the path loops only do
// mat-vec products:
//   u = Kfb(t) X + smap s,  Kfb = -R^-1 (N^T + B^T Pi(t)),  smap = -R^-1 B^T
struct FeedbackLaws {
  std::vector<MatrixXd> Kmaj;
  MatrixXd smap0;
  std::vector<std::vector<MatrixXd>> Kmin;
  std::vector<MatrixXd> smapk;
};

FeedbackLaws build_laws(const MeanFieldGains& mf) {
  FeedbackLaws law;
  const ExtendedMajorSystem& maj = mf.major;
  const int nodes = maj.grid.nodes();
  Eigen::LDLT<MatrixXd> r0(maj.R);
  law.smap0 = -r0.solve(maj.B.transpose());
  law.Kmaj.resize(nodes);
  for (int i = 0; i < nodes; ++i) {
    law.Kmaj[i] =
        -r0.solve(maj.Nx.transpose() + maj.B.transpose() * mf.Pi0.at(i));
  }
  const int K = static_cast<int>(mf.minors.size());
  law.Kmin.resize(K);
  law.smapk.resize(K);
  for (int k = 0; k < K; ++k) {
    const ExtendedMinorSystem& sys = mf.minors[k];
    Eigen::LDLT<MatrixXd> rk(sys.R);
    law.smapk[k] = -rk.solve(sys.B.transpose());
    law.Kmin[k].resize(nodes);
    for (int i = 0; i < nodes; ++i) {
      law.Kmin[k][i] =
          -rk.solve(sys.Nx.transpose() + sys.B.transpose() * mf.Pik[k].at(i));
    }
  }
  return law;
}

// Trapezoid accumulation of the three running integrands; the replay
// helpers reuse this so reported costs reproduce bit-for-bit.
struct CostAccum {
  double gs = 0.0, gc = 0.0, gu = 0.0;
  double is = 0.0, ic = 0.0, iu = 0.0;
  bool started = false;

  void add(const CostWeights& w, const VectorXd& z, const VectorXd& u,
           double dt) {
    const double s = z.dot(w.Q * z);
    const double c = 2.0 * z.dot(w.N * u);
    const double q = u.dot(w.R * u);
    if (started) {
      is += 0.5 * dt * (gs + s);
      ic += 0.5 * dt * (gc + c);
      iu += 0.5 * dt * (gu + q);
    }
    gs = s;
    gc = c;
    gu = q;
    started = true;
  }

  CostParts finish(const CostWeights& w, const VectorXd& zT) const {
    CostParts p;
    p.terminal = 0.5 * zT.dot(w.G * zT);
    p.running_state = 0.5 * is;
    p.cross = 0.5 * ic;
    p.control = 0.5 * iu;
    return p;
  }
};

VectorXd stack2(const VectorXd& a, const VectorXd& b) {
  VectorXd out(a.size() + b.size());
  out << a, b;
  return out;
}

VectorXd stack3(const VectorXd& a, const VectorXd& b, const VectorXd& c) {
  VectorXd out(a.size() + b.size() + c.size());
  out << a, b, c;
  return out;
}

VectorXd stack4(const VectorXd& a, const VectorXd& b, const VectorXd& c,
                const VectorXd& d) {
  VectorXd out(a.size() + b.size() + c.size() + d.size());
  out << a, b, c, d;
  return out;
}

VectorXd draw_normals(RngStream& rng, int count, double scale) {
  VectorXd v(count);
  for (int i = 0; i < count; ++i) v[i] = scale * rng.normal();
  return v;
}

// Per-type empirical averages stacked into R^{nK}; absent types give a zero
// block. Summation runs in ascending agent order so tests can reproduce the
// values bit-for-bit from stored states.
VectorXd stacked_empirical(const std::vector<VectorXd>& x,
                           const std::vector<int>& types, int n, int K) {
  VectorXd sum = VectorXd::Zero(n * K);
  std::vector<int> cnt(K, 0);
  for (size_t a = 0; a < x.size(); ++a) {
    sum.segment(n * types[a], n) += x[a];
    ++cnt[types[a]];
  }
  for (int k = 0; k < K; ++k) {
    if (cnt[k] > 0) sum.segment(n * k, n) /= cnt[k];
  }
  return sum;
}

void check_stable(double second_moment, int path_id) {
  if (std::isfinite(second_moment) && second_moment < 1e18) return;
  throw UnstableTrajectory("state norm exceeded 1e9 on path " +
                           std::to_string(path_id));
}

}  // namespace

CostParts mean_parts(const std::vector<CostParts>& parts) {
  CostParts mean;
  if (parts.empty()) return mean;
  for (const CostParts& p : parts) {
    mean.terminal += p.terminal;
    mean.running_state += p.running_state;
    mean.cross += p.cross;
    mean.control += p.control;
  }
  const double inv = 1.0 / static_cast<double>(parts.size());
  mean.terminal *= inv;
  mean.running_state *= inv;
  mean.cross *= inv;
  mean.control *= inv;
  return mean;
}

FiniteSimResult simulate_finite(const ModelSpec& spec,
                                const MeanFieldGains& mf,
                                const OffsetEstimator& offsets, int N,
                                int paths, std::uint64_t seed,
                                const SimOptions& opts) {
  if (N < 1) throw ConfigError("simulate_finite needs N >= 1");
  if (paths < 1) throw ConfigError("simulate_finite needs paths >= 1");
  require_same_grid(spec.grid, offsets.grid, "simulation vs offsets");
  require_same_grid(spec.grid, mf.major.grid, "simulation vs gains");

  const TimeGrid& grid = spec.grid;
  const int steps = grid.steps, nodes = grid.nodes();
  const double dt = grid.dt(), sdt = std::sqrt(dt), T = grid.T;
  const int n = spec.dims.n, m = spec.dims.m, r = spec.dims.r, d = spec.dims.d;
  const int K = spec.K();

  const FeedbackLaws law = build_laws(mf);
  const OffsetEvaluator evaluator(offsets);
  const WonhamFilter filter(spec);
  const MatrixXd sigma0e = spec.sigma0_eff();
  std::vector<MatrixXd> sigmake(K);
  for (int k = 0; k < K; ++k) sigmake[k] = spec.sigma_k_eff(k);
  const bool gauss_init = spec.init.kind == InitialStateSpec::Kind::Gaussian;
  const DeviationPolicy* dev = opts.deviation;
  const bool dev_major = dev && dev->role == DeviationPolicy::Role::Major;
  const bool dev_minor = dev && dev->role == DeviationPolicy::Role::Minor;

  FiniteSimResult res;
  res.N = N;
  res.paths = paths;
  res.major_total.resize(paths);
  res.minor_total.resize(paths, N);
  res.types.resize(paths);
  res.type_mean_cost.resize(paths, K);
  res.moment_sup.resize(paths);
  res.moment_by_node.resize(paths, nodes);
  res.major_parts.resize(paths);
  res.minor_parts.assign(paths, std::vector<CostParts>(N));
  if (opts.store_trajectories) res.stored.resize(paths);

  parallel_for_index(paths, [&](std::int64_t p) {
    const std::uint64_t pid = static_cast<std::uint64_t>(p);
    RngStream chain_rng(seed, pid, streams::kChain);
    RngStream wlat(seed, pid, streams::kLatentWiener);
    RngStream wmaj(seed, pid, streams::kMajorAgent);
    RngStream trng(seed, pid, streams::kTypeAssign);
    std::vector<RngStream> wmin;
    wmin.reserve(N);
    for (int a = 0; a < N; ++a) {
      wmin.emplace_back(seed, pid, streams::kMinorAgentBase + a);
    }

    // Type assignment consumes one draw per agent regardless of any pinning
    // so deviation candidates stay on common random numbers.
    std::vector<int> types(N);
    for (int a = 0; a < N; ++a) {
      types[a] = trng.categorical(spec.population.type_fractions);
    }
    if (dev_minor) types[0] = dev->type_k;

    ChainSampler chain(spec.chain, chain_rng);
    FilterState fs = filter.init();

    VectorXd yL = spec.common.y0;
    VectorXd y = yL;
    VectorXd x0v = gauss_init ? draw_normals(wmaj, n, spec.init.major_std)
                              : VectorXd::Zero(n);
    std::vector<VectorXd> xv(N);
    for (int a = 0; a < N; ++a) {
      xv[a] = gauss_init ? draw_normals(wmin[a], n, spec.init.minor_std)
                         : VectorXd::Zero(n);
    }
    VectorXd xbar = VectorXd::Zero(n * K);

    CostAccum major_acc;
    std::vector<CostAccum> minor_acc(N);
    std::vector<VectorXd> u(N);
    double sup = 0.0;

    SimPath store;
    if (opts.store_trajectories) {
      store.yL.resize(nodes, d);
      store.y.resize(nodes, d);
      store.x0.resize(nodes, n);
      store.xbar.resize(nodes, n * K);
      store.pi.resize(nodes, spec.M());
      store.u0.resize(nodes, m);
      store.chain.resize(nodes);
      store.x.assign(N, MatrixXd(nodes, n));
      store.u.assign(N, MatrixXd(nodes, m));
      store.types = types;
    }

    VectorXd u0;
    for (int i = 0; i < nodes; ++i) {
      const double t = grid.t(i);
      const VectorXd xN = stacked_empirical(xv, types, n, K);
      const OffsetValues off = evaluator.at(i, yL, fs.pi);

      const VectorXd X0 = stack3(y, x0v, xbar);
      u0 = law.Kmaj[i] * X0 + law.smap0 * off.s0;
      if (dev_major) {
        u0 += dev->dL * stack3(y, x0v, xN) + dev->offset_at(t, T);
      }
      for (int a = 0; a < N; ++a) {
        const int k = types[a];
        const VectorXd Xi = stack4(xv[a], y, x0v, xbar);
        u[a] = law.Kmin[k][i] * Xi + law.smapk[k] * off.sbar[k];
        if (dev_minor && a == 0) {
          u[a] += dev->dL * stack4(xv[a], y, x0v, xN) + dev->offset_at(t, T);
        }
      }

      major_acc.add(spec.major_cost, stack2(y, x0v), u0, dt);
      for (int a = 0; a < N; ++a) {
        minor_acc[a].add(spec.minor_costs[types[a]], stack2(xv[a], y), u[a],
                         dt);
      }

      double mom = 0.0;
      for (int a = 0; a < N; ++a) mom += xv[a].squaredNorm();
      mom = mom / N + xN.squaredNorm() + xbar.squaredNorm() + y.squaredNorm();
      res.moment_by_node(p, i) = mom;
      sup = std::max(sup, mom);
      check_stable(mom + x0v.squaredNorm(), static_cast<int>(p));

      if (opts.store_trajectories) {
        store.yL.row(i) = yL.transpose();
        store.y.row(i) = y.transpose();
        store.x0.row(i) = x0v.transpose();
        store.xbar.row(i) = xbar.transpose();
        store.pi.row(i) = fs.pi.transpose();
        store.u0.row(i) = u0.transpose();
        store.chain[i] = chain.state();
        for (int a = 0; a < N; ++a) {
          store.x[a].row(i) = xv[a].transpose();
          store.u[a].row(i) = u[a].transpose();
        }
      }

      if (i == steps) break;

      // One Euler-Maruyama step. The empirical impact enters y only; the
      // filter runs on the exactly reconstructed unimpacted increment.
      VectorXd pool = VectorXd::Zero(d);
      for (int a = 0; a < N; ++a) {
        pool += spec.common.F[types[a]] * u[a] + spec.common.H[types[a]] * xv[a];
      }
      const VectorXd impact =
          spec.common.F0 * u0 + spec.common.H0 * x0v + pool / N;
      const VectorXd f = spec.common.drift.eval(i, yL, chain.state());
      const VectorXd dyL = f * dt + spec.common.sigma * draw_normals(wlat, r, sdt);
      const VectorXd dy = dyL + impact * dt;

      fs = filter.step(fs, dyL);
      chain.advance_to(grid.t(i + 1), chain_rng);

      const VectorXd dx0 =
          (spec.major.A0 * x0v + spec.major.B0 * u0 + spec.major.b0.at(i)) * dt +
          sigma0e * draw_normals(wmaj, r, sdt);
      std::vector<VectorXd> dx(N);
      for (int a = 0; a < N; ++a) {
        const MinorTypeDynamics& dyn = spec.minors[types[a]];
        dx[a] = (dyn.A * xv[a] + dyn.B * u[a] + dyn.b.at(i)) * dt +
                sigmake[types[a]] * draw_normals(wmin[a], r, sdt);
      }
      const VectorXd dxbar = (mf.gains.Abar[i] * xbar + mf.gains.Gbar[i] * x0v +
                              mf.gains.Lbar[i] * y + off.mbar) *
                             dt;

      yL += dyL;
      y += dy;
      x0v += dx0;
      for (int a = 0; a < N; ++a) xv[a] += dx[a];
      xbar += dxbar;
    }

    res.major_parts[p] = major_acc.finish(spec.major_cost, stack2(y, x0v));
    res.major_total[p] = res.major_parts[p].total();
    for (int a = 0; a < N; ++a) {
      res.minor_parts[p][a] = minor_acc[a].finish(spec.minor_costs[types[a]],
                                                  stack2(xv[a], y));
      res.minor_total(p, a) = res.minor_parts[p][a].total();
    }
    res.types[p] = types;
    res.moment_sup[p] = sup;

    for (int k = 0; k < K; ++k) {
      double acc = 0.0;
      int cnt = 0;
      for (int a = 0; a < N; ++a) {
        if (types[a] != k) continue;
        acc += res.minor_total(p, a);
        ++cnt;
      }
      res.type_mean_cost(p, k) =
          cnt > 0 ? acc / cnt : std::numeric_limits<double>::quiet_NaN();
    }
    if (opts.store_trajectories) res.stored[p] = std::move(store);
  });

  return res;
}

MeanFieldSimResult simulate_meanfield(const ModelSpec& spec,
                                      const MeanFieldGains& mf,
                                      const OffsetEstimator& offsets,
                                      int paths, std::uint64_t seed,
                                      const SimOptions& opts) {
  if (paths < 1) throw ConfigError("simulate_meanfield needs paths >= 1");
  require_same_grid(spec.grid, offsets.grid, "simulation vs offsets");
  require_same_grid(spec.grid, mf.major.grid, "simulation vs gains");

  const TimeGrid& grid = spec.grid;
  const int steps = grid.steps, nodes = grid.nodes();
  const double dt = grid.dt(), sdt = std::sqrt(dt);
  const int n = spec.dims.n, m = spec.dims.m, r = spec.dims.r, d = spec.dims.d;
  const int K = spec.K();

  const FeedbackLaws law = build_laws(mf);
  const OffsetEvaluator evaluator(offsets);
  const WonhamFilter filter(spec);
  const MatrixXd sigma0e = spec.sigma0_eff();
  std::vector<MatrixXd> sigmake(K);
  for (int k = 0; k < K; ++k) sigmake[k] = spec.sigma_k_eff(k);
  const MatrixXd Fpi =
      scaled_impact(spec.common.F, spec.population.type_fractions);
  const MatrixXd Hpi =
      scaled_impact(spec.common.H, spec.population.type_fractions);
  const bool gauss_init = spec.init.kind == InitialStateSpec::Kind::Gaussian;
  const int copies = std::max(1, opts.rep_copies);
  const int reps = K * copies;  // representative minor j realizes type j % K

  MeanFieldSimResult res;
  res.paths = paths;
  res.major_total.resize(paths);
  res.rep_minor_total.resize(paths, K);
  res.moment_sup.resize(paths);
  res.moment_by_node.resize(paths, nodes);
  res.major_parts.resize(paths);
  res.rep_parts.assign(paths, std::vector<CostParts>(K));
  if (opts.store_trajectories) res.stored.resize(paths);

  parallel_for_index(paths, [&](std::int64_t p) {
    const std::uint64_t pid = static_cast<std::uint64_t>(p);
    RngStream chain_rng(seed, pid, streams::kChain);
    RngStream wlat(seed, pid, streams::kLatentWiener);
    RngStream wmaj(seed, pid, streams::kMajorAgent);
    std::vector<RngStream> wrep;
    wrep.reserve(reps);
    for (int j = 0; j < reps; ++j) {
      wrep.emplace_back(seed, pid, streams::kMinorAgentBase + j);
    }

    ChainSampler chain(spec.chain, chain_rng);
    FilterState fs = filter.init();

    VectorXd yL = spec.common.y0;
    VectorXd ybar = yL;
    VectorXd x0v = gauss_init ? draw_normals(wmaj, n, spec.init.major_std)
                              : VectorXd::Zero(n);
    std::vector<VectorXd> xrep(reps);
    for (int j = 0; j < reps; ++j) {
      xrep[j] = gauss_init ? draw_normals(wrep[j], n, spec.init.minor_std)
                           : VectorXd::Zero(n);
    }
    VectorXd xbar = VectorXd::Zero(n * K);

    CostAccum major_acc;
    std::vector<CostAccum> rep_acc(reps);
    std::vector<VectorXd> urep(reps);
    double sup = 0.0;

    SimPath store;
    if (opts.store_trajectories) {
      store.yL.resize(nodes, d);
      store.y.resize(nodes, d);
      store.x0.resize(nodes, n);
      store.xbar.resize(nodes, n * K);
      store.pi.resize(nodes, spec.M());
      store.u0.resize(nodes, m);
      store.chain.resize(nodes);
      store.x.assign(reps, MatrixXd(nodes, n));
      store.u.assign(reps, MatrixXd(nodes, m));
      store.types.resize(reps);
      for (int j = 0; j < reps; ++j) store.types[j] = j % K;
    }

    VectorXd u0;
    for (int i = 0; i < nodes; ++i) {
      const OffsetValues off = evaluator.at(i, yL, fs.pi);
      const VectorXd X0 = stack3(ybar, x0v, xbar);
      u0 = law.Kmaj[i] * X0 + law.smap0 * off.s0;
      const VectorXd ubar = mf.gains.C[i] * xbar + mf.gains.D[i] * x0v +
                            mf.gains.E[i] * ybar + off.rbar;
      for (int j = 0; j < reps; ++j) {
        const int k = j % K;
        const VectorXd Xi = stack4(xrep[j], ybar, x0v, xbar);
        urep[j] = law.Kmin[k][i] * Xi + law.smapk[k] * off.sbar[k];
      }

      major_acc.add(spec.major_cost, stack2(ybar, x0v), u0, dt);
      for (int j = 0; j < reps; ++j) {
        rep_acc[j].add(spec.minor_costs[j % K], stack2(xrep[j], ybar), urep[j],
                       dt);
      }

      double mom = 0.0;
      for (int j = 0; j < reps; ++j) mom += xrep[j].squaredNorm();
      mom = mom / reps + xbar.squaredNorm() + ybar.squaredNorm();
      res.moment_by_node(p, i) = mom;
      sup = std::max(sup, mom);
      check_stable(mom + x0v.squaredNorm(), static_cast<int>(p));

      if (opts.store_trajectories) {
        store.yL.row(i) = yL.transpose();
        store.y.row(i) = ybar.transpose();
        store.x0.row(i) = x0v.transpose();
        store.xbar.row(i) = xbar.transpose();
        store.pi.row(i) = fs.pi.transpose();
        store.u0.row(i) = u0.transpose();
        store.chain[i] = chain.state();
        for (int j = 0; j < reps; ++j) {
          store.x[j].row(i) = xrep[j].transpose();
          store.u[j].row(i) = urep[j].transpose();
        }
      }

      if (i == steps) break;

      const VectorXd impact =
          Fpi * ubar + spec.common.F0 * u0 + Hpi * xbar + spec.common.H0 * x0v;
      const VectorXd f = spec.common.drift.eval(i, yL, chain.state());
      const VectorXd dyL = f * dt + spec.common.sigma * draw_normals(wlat, r, sdt);
      const VectorXd dybar = dyL + impact * dt;

      fs = filter.step(fs, dyL);
      chain.advance_to(grid.t(i + 1), chain_rng);

      const VectorXd dx0 =
          (spec.major.A0 * x0v + spec.major.B0 * u0 + spec.major.b0.at(i)) * dt +
          sigma0e * draw_normals(wmaj, r, sdt);
      std::vector<VectorXd> dx(reps);
      for (int j = 0; j < reps; ++j) {
        const int k = j % K;
        const MinorTypeDynamics& dyn = spec.minors[k];
        dx[j] = (dyn.A * xrep[j] + dyn.B * urep[j] + dyn.b.at(i)) * dt +
                sigmake[k] * draw_normals(wrep[j], r, sdt);
      }
      const VectorXd dxbar = (mf.gains.Abar[i] * xbar + mf.gains.Gbar[i] * x0v +
                              mf.gains.Lbar[i] * ybar + off.mbar) *
                             dt;

      yL += dyL;
      ybar += dybar;
      x0v += dx0;
      for (int j = 0; j < reps; ++j) xrep[j] += dx[j];
      xbar += dxbar;
    }

    res.major_parts[p] = major_acc.finish(spec.major_cost, stack2(ybar, x0v));
    res.major_total[p] = res.major_parts[p].total();
    for (int k = 0; k < K; ++k) {
      CostParts avg;
      for (int c = 0; c < copies; ++c) {
        const int j = c * K + k;
        const CostParts parts =
            rep_acc[j].finish(spec.minor_costs[k], stack2(xrep[j], ybar));
        avg.terminal += parts.terminal;
        avg.running_state += parts.running_state;
        avg.cross += parts.cross;
        avg.control += parts.control;
      }
      avg.terminal /= copies;
      avg.running_state /= copies;
      avg.cross /= copies;
      avg.control /= copies;
      res.rep_parts[p][k] = avg;
      res.rep_minor_total(p, k) = avg.total();
    }
    res.moment_sup[p] = sup;
    if (opts.store_trajectories) res.stored[p] = std::move(store);
  });

  return res;
}

CostParts major_cost_from_path(const ModelSpec& spec, const SimPath& path) {
  const TimeGrid& grid = spec.grid;
  const double dt = grid.dt();
  CostAccum acc;
  VectorXd z;
  for (int i = 0; i < grid.nodes(); ++i) {
    z = stack2(path.y.row(i).transpose(), path.x0.row(i).transpose());
    acc.add(spec.major_cost, z, path.u0.row(i).transpose(), dt);
  }
  return acc.finish(spec.major_cost, z);
}

CostParts minor_cost_from_path(const ModelSpec& spec, const SimPath& path,
                               int agent) {
  const TimeGrid& grid = spec.grid;
  const double dt = grid.dt();
  const CostWeights& w = spec.minor_costs.at(path.types.at(agent));
  CostAccum acc;
  VectorXd z;
  for (int i = 0; i < grid.nodes(); ++i) {
    z = stack2(path.x[agent].row(i).transpose(), path.y.row(i).transpose());
    acc.add(w, z, path.u[agent].row(i).transpose(), dt);
  }
  return acc.finish(w, z);
}

namespace {

void write_cost_rows(std::FILE* f, int N, const char* role, int agent,
                     int type, int path, double cost, const CostParts& parts) {
  std::fprintf(f, "%d,%d,%s,%d,%d,%.17g,%.17g,%.17g,%.17g,%.17g\n", N, path,
               role, agent, type, cost, parts.terminal, parts.running_state,
               parts.cross, parts.control);
}

}  // namespace

void export_cost_csv(const std::string& path, const ModelSpec& spec,
                     const std::vector<FiniteSimResult>& runs,
                     const MeanFieldSimResult& limit) {
  std::FILE* f = std::fopen(path.c_str(), "w");
  if (!f) throw IoError("cannot open " + path + " for writing");
  std::fprintf(f,
               "N,path,role,agent,type,cost,terminal,running_state,cross,"
               "control\n");
  for (const FiniteSimResult& run : runs) {
    for (int p = 0; p < run.paths; ++p) {
      write_cost_rows(f, run.N, "major", -1, -1, p, run.major_total[p],
                      run.major_parts[p]);
      for (int a = 0; a < run.N; ++a) {
        write_cost_rows(f, run.N, "minor", a, run.types[p][a], p,
                        run.minor_total(p, a), run.minor_parts[p][a]);
      }
    }
  }
  // Mean-field rows carry N = -1; the representative agent of type k is
  // reported with agent = -1 and its type.
  for (int p = 0; p < limit.paths; ++p) {
    write_cost_rows(f, -1, "major", -1, -1, p, limit.major_total[p],
                    limit.major_parts[p]);
    for (int k = 0; k < static_cast<int>(limit.rep_parts[p].size()); ++k) {
      write_cost_rows(f, -1, "minor", -1, k, p, limit.rep_minor_total(p, k),
                      limit.rep_parts[p][k]);
    }
  }
  if (std::fclose(f) != 0) throw IoError("failed writing " + path);
  (void)spec;
}

void export_moment_csv(const std::string& path, const TimeGrid& grid,
                       const std::vector<FiniteSimResult>& runs) {
  std::FILE* f = std::fopen(path.c_str(), "w");
  if (!f) throw IoError("cannot open " + path + " for writing");
  std::fprintf(f, "N,t,mean_moment,max_moment\n");
  for (const FiniteSimResult& run : runs) {
    if (run.paths == 0 || run.moment_by_node.cols() != grid.nodes()) continue;
    for (int i = 0; i < grid.nodes(); ++i) {
      const double mean = run.moment_by_node.col(i).mean();
      const double mx = run.moment_by_node.col(i).maxCoeff();
      std::fprintf(f, "%d,%.17g,%.17g,%.17g\n", run.N, grid.t(i), mean, mx);
    }
  }
  if (std::fclose(f) != 0) throw IoError("failed writing " + path);
}

}  // namespace mfglab
