#include "mfglab/model.hpp"

#include <Eigen/Dense>
#include <sstream>

#include "mfglab/errors.hpp"

namespace mfglab {

VectorXd LatentChainSpec::stationary() const {
  const int Ms = M();
  const MatrixXd Q = generator();
  // Solve pi^T Q = 0 with sum(pi) = 1 as a least-squares system.
  MatrixXd A(Ms + 1, Ms);
  A.topRows(Ms) = Q.transpose();
  A.bottomRows(1).setOnes();
  VectorXd b = VectorXd::Zero(Ms + 1);
  b[Ms] = 1.0;
  return A.colPivHouseholderQr().solve(b);
}

MatrixXd ModelSpec::sigma0_eff() const {
  if (population.wiener_cov.size() == 0) return major.sigma0;
  Eigen::LLT<MatrixXd> llt(population.wiener_cov);
  return major.sigma0 * MatrixXd(llt.matrixL());
}

MatrixXd ModelSpec::sigma_k_eff(int k) const {
  if (population.wiener_cov.size() == 0) return minors[k].sigma;
  Eigen::LLT<MatrixXd> llt(population.wiener_cov);
  return minors[k].sigma * MatrixXd(llt.matrixL());
}

std::string ValidationReport::summary() const {
  std::ostringstream os;
  for (const auto& it : items) {
    os << (it.pass ? "pass" : "FAIL") << "  " << it.name;
    if (!it.detail.empty()) os << "  (" << it.detail << ")";
    os << "\n";
  }
  return os.str();
}

namespace {

void push(ValidationReport& rep, const std::string& name, bool pass,
          const std::string& detail = "") {
  rep.items.push_back({name, pass, detail});
}

bool shape_is(const MatrixXd& A, int rows, int cols) {
  return A.rows() == rows && A.cols() == cols;
}

std::string shape_str(const MatrixXd& A) {
  return std::to_string(A.rows()) + "x" + std::to_string(A.cols());
}

void check_shape(ValidationReport& rep, const std::string& name,
                 const MatrixXd& A, int rows, int cols) {
  push(rep, name + " shape", shape_is(A, rows, cols),
       shape_is(A, rows, cols)
           ? ""
           : "got " + shape_str(A) + ", want " + std::to_string(rows) + "x" +
                 std::to_string(cols));
}

void check_signal(ValidationReport& rep, const std::string& name,
                  const DriftSignal& s, int size, int nodes) {
  if (s.kind == DriftSignal::Kind::Constant) {
    push(rep, name + " size", s.value.size() == size);
  } else {
    bool ok = static_cast<int>(s.samples.size()) == nodes;
    for (const auto& v : s.samples) ok = ok && v.size() == size;
    push(rep, name + " samples", ok,
         ok ? "" : "need one length-" + std::to_string(size) +
                       " sample per grid node");
  }
}

void check_weights(ValidationReport& rep, const std::string& who,
                   const CostWeights& w, int n, int m, double delta) {
  check_shape(rep, who + ".G", w.G, 2 * n, 2 * n);
  check_shape(rep, who + ".Q", w.Q, 2 * n, 2 * n);
  check_shape(rep, who + ".N", w.N, 2 * n, m);
  check_shape(rep, who + ".R", w.R, m, m);
  if (!shape_is(w.G, 2 * n, 2 * n) || !shape_is(w.Q, 2 * n, 2 * n) ||
      !shape_is(w.N, 2 * n, m) || !shape_is(w.R, m, m)) {
    return;  // value-level checks need the shapes first
  }
  push(rep, who + ".G psd", is_psd(w.G),
       is_psd(w.G) ? "" : "min eig " + std::to_string(min_eigenvalue_sym(w.G)));
  const MatrixXd r_margin = w.R - delta * MatrixXd::Identity(m, m);
  push(rep, who + ".R - delta*I psd", is_psd(r_margin),
       is_psd(r_margin) ? ""
                        : "min eig " + std::to_string(min_eigenvalue_sym(w.R)) +
                              " < delta " + std::to_string(delta));
  if (min_eigenvalue_sym(w.R) > 0.0) {
    const MatrixXd schur = w.Q - w.N * w.R.inverse() * w.N.transpose();
    push(rep, who + ".Q - N R^-1 N^T psd", is_psd(schur),
         is_psd(schur)
             ? ""
             : "min eig " + std::to_string(min_eigenvalue_sym(schur)));
  } else {
    push(rep, who + ".Q - N R^-1 N^T psd", false, "R not positive definite");
  }
}

}  // namespace

ValidationReport validate(const ModelSpec& spec) {
  ValidationReport rep;
  const int n = spec.dims.n, m = spec.dims.m, r = spec.dims.r, d = spec.dims.d;
  const int K = spec.K(), M = spec.M();
  const int nodes = spec.grid.nodes();

  push(rep, "dims positive", n > 0 && m > 0 && r > 0 && d > 0);
  push(rep, "common dim matches agent dim", d == n,
       d == n ? "" : "extended states stack y with x, need d == n");
  push(rep, "grid", spec.grid.T > 0 && spec.grid.steps >= 1);
  push(rep, "has minor types", K >= 1);
  push(rep, "minor costs per type",
       static_cast<int>(spec.minor_costs.size()) == K);
  push(rep, "convexity delta positive", spec.convexity_delta > 0);
  if (!rep.ok()) return rep;

  check_shape(rep, "major.A0", spec.major.A0, n, n);
  check_shape(rep, "major.B0", spec.major.B0, n, m);
  check_shape(rep, "major.sigma0", spec.major.sigma0, n, r);
  check_signal(rep, "major.b0", spec.major.b0, n, nodes);
  for (int k = 0; k < K; ++k) {
    const auto& mk = spec.minors[k];
    const std::string who = "minor[" + std::to_string(k) + "]";
    check_shape(rep, who + ".A", mk.A, n, n);
    check_shape(rep, who + ".B", mk.B, n, m);
    check_shape(rep, who + ".sigma", mk.sigma, n, r);
    check_signal(rep, who + ".b", mk.b, n, nodes);
  }

  check_weights(rep, "major_cost", spec.major_cost, n, m,
                spec.convexity_delta);
  for (int k = 0; k < K; ++k) {
    check_weights(rep, "minor_cost[" + std::to_string(k) + "]",
                  spec.minor_costs[k], n, m, spec.convexity_delta);
  }

  // Latent chain
  push(rep, "chain has states", M >= 1 && spec.chain.rates.rows() == M &&
                                    spec.chain.rates.cols() == M);
  {
    bool nonneg = true;
    for (int i = 0; i < M; ++i)
      for (int j = 0; j < M; ++j)
        if (i != j && spec.chain.rates(i, j) < 0) nonneg = false;
    push(rep, "chain rates nonnegative", nonneg);
    const double mass = spec.chain.initial_dist.sum();
    push(rep, "chain initial distribution simplex",
         spec.chain.initial_dist.minCoeff() >= 0 &&
             std::abs(mass - 1.0) < 1e-9);
    bool label_ok = static_cast<int>(spec.chain.states.size()) == M;
    push(rep, "chain state labels", label_ok);
  }

  // Common process
  check_shape(rep, "common.sigma", spec.common.sigma, d, r);
  push(rep, "common.y0 size", spec.common.y0.size() == d);
  push(rep, "common impact blocks",
       static_cast<int>(spec.common.F.size()) == K &&
           static_cast<int>(spec.common.H.size()) == K);
  for (int k = 0; k < K; ++k) {
    if (k < static_cast<int>(spec.common.F.size()))
      check_shape(rep, "common.F[" + std::to_string(k) + "]",
                  spec.common.F[k], d, m);
    if (k < static_cast<int>(spec.common.H.size()))
      check_shape(rep, "common.H[" + std::to_string(k) + "]",
                  spec.common.H[k], d, n);
  }
  check_shape(rep, "common.F0", spec.common.F0, d, m);
  check_shape(rep, "common.H0", spec.common.H0, d, n);
  {
    const auto& dr = spec.common.drift;
    bool ok = true;
    std::string why;
    if (dr.kind == CommonDrift::Kind::Affine) {
      ok = static_cast<int>(dr.intercept.size()) == M &&
           static_cast<int>(dr.slope.size()) == M;
      for (int j = 0; ok && j < M; ++j)
        ok = dr.intercept[j].size() == d && shape_is(dr.slope[j], d, d);
      if (!ok) why = "need one intercept (d) and slope (dxd) per chain state";
    } else {
      ok = static_cast<int>(dr.samples.size()) == M;
      for (int j = 0; ok && j < M; ++j) {
        ok = static_cast<int>(dr.samples[j].size()) == nodes;
        for (const auto& v : dr.samples[j]) ok = ok && v.size() == d;
      }
      if (!ok) why = "need one length-d sample per node per chain state";
    }
    push(rep, "common.drift", ok, why);
  }
  {
    // The posterior update divides by sigma sigma^T; a rank-deficient sigma
    // is only tolerable when there is nothing to infer (single chain state).
    const MatrixXd ssT =
        spec.common.sigma * spec.common.sigma.transpose();
    const bool invertible =
        ssT.rows() == d && ssT.cols() == d &&
        Eigen::FullPivLU<MatrixXd>(ssT).isInvertible();
    push(rep, "common.sigma full row rank", invertible || M == 1,
         invertible ? "" : "filter degenerate; allowed only with one state");
  }

  // Population
  push(rep, "type fractions simplex",
       spec.population.type_fractions.size() == K &&
           spec.population.type_fractions.minCoeff() >= 0 &&
           std::abs(spec.population.type_fractions.sum() - 1.0) < 1e-9);
  {
    bool ok = !spec.population.N_schedule.empty();
    for (int N : spec.population.N_schedule) ok = ok && N >= 1;
    push(rep, "population schedule", ok);
  }
  if (spec.population.wiener_cov.size() != 0) {
    push(rep, "wiener covariance psd",
         shape_is(spec.population.wiener_cov, r, r) &&
             is_psd(spec.population.wiener_cov));
  }

  push(rep, "initial state std nonnegative",
       spec.init.major_std >= 0 && spec.init.minor_std >= 0);
  return rep;
}

void require_valid(const ModelSpec& spec) {
  const ValidationReport rep = validate(spec);
  for (const auto& it : rep.items) {
    if (it.pass) continue;
    const bool shape = it.name.find("shape") != std::string::npos ||
                       it.name.find("size") != std::string::npos ||
                       it.name.find("dim") != std::string::npos ||
                       it.name.find("blocks") != std::string::npos ||
                       it.name.find("samples") != std::string::npos ||
                       it.name.find("per type") != std::string::npos;
    const std::string msg = it.name + (it.detail.empty() ? "" : ": " + it.detail);
    if (shape) throw DimensionMismatch(msg);
    throw ConvexityViolation(msg);
  }
}

GainTrajectories zero_gains(const ModelSpec& spec) {
  const int n = spec.dims.n, m = spec.dims.m, K = spec.K();
  const int nodes = spec.grid.nodes();
  GainTrajectories g;
  g.C.assign(nodes, MatrixXd::Zero(m * K, n * K));
  g.D.assign(nodes, MatrixXd::Zero(m * K, n));
  g.E.assign(nodes, MatrixXd::Zero(m * K, n));
  g.Abar.assign(nodes, MatrixXd::Zero(n * K, n * K));
  g.Gbar.assign(nodes, MatrixXd::Zero(n * K, n));
  g.Lbar.assign(nodes, MatrixXd::Zero(n * K, n));
  return g;
}

ExtendedMajorSystem build_extended_major(const ModelSpec& spec,
                                         const GainTrajectories& gains) {
  const int n = spec.dims.n, m = spec.dims.m, r = spec.dims.r, K = spec.K();
  if (spec.dims.d != n) {
    throw DimensionMismatch("extended major system needs d == n");
  }
  const int nodes = spec.grid.nodes();
  if (static_cast<int>(gains.C.size()) != nodes) {
    throw GridMismatch("gain trajectories not on the model grid");
  }
  const int dim = 2 * n + n * K;

  ExtendedMajorSystem sys;
  sys.n = n;
  sys.m = m;
  sys.K = K;
  sys.dim = dim;
  sys.grid = spec.grid;

  const VectorXd& frac = spec.population.type_fractions;
  const MatrixXd Fpi = scaled_impact(spec.common.F, frac);  // n x mK
  const MatrixXd Hpi = scaled_impact(spec.common.H, frac);  // n x nK

  sys.A.resize(nodes);
  for (int i = 0; i < nodes; ++i) {
    MatrixXd A = MatrixXd::Zero(dim, dim);
    A.block(0, 0, n, n) = Fpi * gains.E[i];
    A.block(0, n, n, n) = Fpi * gains.D[i] + spec.common.H0;
    A.block(0, 2 * n, n, n * K) = Fpi * gains.C[i] + Hpi;
    A.block(n, n, n, n) = spec.major.A0;
    A.block(2 * n, 0, n * K, n) = gains.Lbar[i];
    A.block(2 * n, n, n * K, n) = gains.Gbar[i];
    A.block(2 * n, 2 * n, n * K, n * K) = gains.Abar[i];
    sys.A[i] = A;
  }

  sys.B = MatrixXd::Zero(dim, m);
  sys.B.topRows(n) = spec.common.F0;
  sys.B.middleRows(n, n) = spec.major.B0;

  sys.Sigma = MatrixXd::Zero(dim, 2 * r + r * K);
  sys.Sigma.block(0, 0, n, r) = spec.common.sigma;
  sys.Sigma.block(n, r, n, r) = spec.sigma0_eff();

  MatrixXd lift = MatrixXd::Zero(2 * n, dim);  // z0 = [y; x0] selector
  lift.leftCols(2 * n) = MatrixXd::Identity(2 * n, 2 * n);
  sys.Qx = lift.transpose() * spec.major_cost.Q * lift;
  sys.Gx = lift.transpose() * spec.major_cost.G * lift;
  sys.Nx = MatrixXd::Zero(dim, m);
  sys.Nx.topRows(2 * n) = spec.major_cost.N;
  sys.R = spec.major_cost.R;
  return sys;
}

ExtendedMinorSystem build_extended_minor(const ModelSpec& spec, int k,
                                         const ExtendedMajorSystem& major,
                                         const std::vector<MatrixXd>& Pi0) {
  const int n = spec.dims.n, m = spec.dims.m, r = spec.dims.r, K = spec.K();
  const int nodes = spec.grid.nodes();
  require_same_grid(spec.grid, major.grid, "extended minor");
  if (static_cast<int>(Pi0.size()) != nodes) {
    throw GridMismatch("major Riccati trajectory not on the model grid");
  }
  const int mdim = major.dim;
  const int dim = n + mdim;

  ExtendedMinorSystem sys;
  sys.n = n;
  sys.m = m;
  sys.K = K;
  sys.dim = dim;
  sys.grid = spec.grid;

  const MatrixXd R0inv = major.R.inverse();
  const auto& mk = spec.minors[k];

  sys.A.resize(nodes);
  for (int i = 0; i < nodes; ++i) {
    MatrixXd A = MatrixXd::Zero(dim, dim);
    A.block(0, 0, n, n) = mk.A;
    A.block(n, n, mdim, mdim) =
        major.A[i] - major.B * R0inv * major.Nx.transpose() -
        major.B * R0inv * major.B.transpose() * Pi0[i];
    sys.A[i] = A;
  }

  sys.B = MatrixXd::Zero(dim, m);
  sys.B.topRows(n) = mk.B;

  sys.Sigma = MatrixXd::Zero(dim, r + major.Sigma.cols());
  sys.Sigma.block(0, 0, n, r) = spec.sigma_k_eff(k);
  sys.Sigma.block(n, r, mdim, major.Sigma.cols()) = major.Sigma;

  MatrixXd lift = MatrixXd::Zero(2 * n, dim);  // z_i = [x_i; y] selector
  lift.leftCols(2 * n) = MatrixXd::Identity(2 * n, 2 * n);
  const auto& w = spec.minor_costs[k];
  sys.Qx = lift.transpose() * w.Q * lift;
  sys.Gx = lift.transpose() * w.G * lift;
  sys.Nx = MatrixXd::Zero(dim, m);
  sys.Nx.topRows(2 * n) = w.N;
  sys.R = w.R;
  return sys;
}

}  // namespace mfglab
