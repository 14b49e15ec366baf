#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <string>

#include "mfglab/config_load.hpp"
#include "mfglab/errors.hpp"
#include "mfglab/meanfield.hpp"
#include "oracles.hpp"

using namespace mfglab;

namespace {

std::string model_file(const char* name) {
  return std::string(MFGLAB_MODELS_DIR) + "/" + name;
}

MatrixXd scalar(double v) { return MatrixXd::Constant(1, 1, v); }

}  // namespace

TEST_CASE("decoupled model collapses to independent tracking problems") {
  const ModelSpec spec = load_model(model_file("decoupled_scalar.json"));
  const MeanFieldGains mf = solve_consistency(spec, 1e-10, 1.0, 10);

  CHECK(mf.converged);
  CHECK(mf.iterations == 2);
  CHECK(mf.residual == 0.0);
  CHECK(mf.residual_history.size() == 2);

  const int n = spec.dims.n;
  const int nodes = spec.grid.nodes();

  // nothing feeds back from the environment into the minor control
  for (int i = 0; i < nodes; ++i) {
    CHECK(max_abs(mf.gains.D[i]) == 0.0);
    CHECK(max_abs(mf.gains.E[i]) == 0.0);
    CHECK(max_abs(mf.gains.Gbar[i]) == 0.0);
    CHECK(max_abs(mf.gains.Lbar[i]) == 0.0);
  }

  // the own-state block of the minor Riccati trajectory must coincide with
  // the standalone regulator for (A, B, Q_xx, R, G_xx)
  const auto Ak = [&](double) { return scalar(-0.6); };
  const std::vector<MatrixXd> minor_lqr =
      oracles::lqr_backward(Ak, scalar(1.0), scalar(1.0), MatrixXd::Zero(1, 1),
                            scalar(1.0), scalar(0.5), spec.grid);
  double minor_gap = 0.0;
  double off_block = 0.0;
  for (int i = 0; i < nodes; ++i) {
    const MatrixXd& Pi = mf.Pik[0].Pi[i];
    minor_gap = std::max(
        minor_gap, (Pi.block(0, 0, n, n) - minor_lqr[i]).norm());
    MatrixXd rest = Pi;
    rest.block(0, 0, n, n).setZero();
    off_block = std::max(off_block, max_abs(rest));
  }
  CHECK(minor_gap < 1e-10);
  CHECK(off_block == 0.0);

  // same story for the major block of the extended major Riccati solution
  const auto A0 = [&](double) { return scalar(-0.5); };
  const std::vector<MatrixXd> major_lqr =
      oracles::lqr_backward(A0, scalar(1.0), scalar(1.0), MatrixXd::Zero(1, 1),
                            scalar(1.0), scalar(0.5), spec.grid);
  double major_gap = 0.0;
  for (int i = 0; i < nodes; ++i) {
    major_gap = std::max(
        major_gap, (mf.Pi0.Pi[i].block(n, n, n, n) - major_lqr[i]).norm());
  }
  CHECK(major_gap < 1e-10);

  // population-average feedback is the regulator gain acting on xbar
  for (int i = 0; i < nodes; ++i) {
    const MatrixXd expected = -minor_lqr[i];  // -R^-1 B^T Pi with B = R = 1
    CHECK((mf.gains.C[i] - expected).cwiseAbs().maxCoeff() < 1e-10);
    CHECK((mf.gains.Abar[i] - (scalar(-0.6) + mf.gains.C[i]))
              .cwiseAbs()
              .maxCoeff() == 0.0);
  }
}

TEST_CASE("coupled model reaches a consistent fixed point") {
  const ModelSpec spec = load_model(model_file("coupled_2type.json"));
  const MeanFieldGains mf = solve_consistency(spec);

  CHECK(mf.converged);
  CHECK(mf.iterations <= 100);
  CHECK(mf.residual < 1e-10);
  CHECK(static_cast<int>(mf.residual_history.size()) == mf.iterations);

  // re-substitution: one more sweep must return (numerically) the same gains
  const ConsistencyMapResult again = apply_consistency_map(spec, mf.gains);
  CHECK(gain_distance(again.new_gains, mf.gains) < 1e-9);

  // the coupling is real: the environment feedback gains are not zero
  double d_mag = 0.0, e_mag = 0.0;
  for (int i = 0; i < spec.grid.nodes(); ++i) {
    d_mag = std::max(d_mag, max_abs(mf.gains.D[i]));
    e_mag = std::max(e_mag, max_abs(mf.gains.E[i]));
  }
  CHECK(d_mag > 1e-4);
  CHECK(e_mag > 1e-4);
}

TEST_CASE("aggregate minor closed loop is Hurwitz at time zero") {
  const ModelSpec spec = load_model(model_file("coupled_2type.json"));
  const MeanFieldGains mf = solve_consistency(spec);
  const HurwitzReport rep = check_hurwitz(spec, mf);

  CHECK(rep.hurwitz);
  CHECK(rep.M1.rows() == spec.dims.n * spec.K());
  CHECK(rep.eigenvalues.size() == spec.dims.n * spec.K());
  CHECK(rep.max_real_part < 0.0);
  // frozen from the converged run of this model
  CHECK(rep.max_real_part == doctest::Approx(-0.933612).epsilon(1e-3));
}

TEST_CASE("extended minor embeds the closed-loop major environment") {
  const ModelSpec spec = load_model(model_file("coupled_2type.json"));
  const MeanFieldGains mf = solve_consistency(spec);

  const int n = spec.dims.n;
  const ExtendedMajorSystem& maj = mf.major;
  for (int k = 0; k < spec.K(); ++k) {
    const ExtendedMinorSystem& mk = mf.minors[k];
    REQUIRE(mk.dim == n + maj.dim);
    for (int i = 0; i < spec.grid.nodes(); ++i) {
      const MatrixXd gain = maj.R.ldlt().solve(
          maj.B.transpose() * mf.Pi0.Pi[i] + maj.Nx.transpose());
      const MatrixXd closed = maj.A[i] - maj.B * gain;
      const MatrixXd env = mk.A[i].block(n, n, maj.dim, maj.dim);
      CHECK((env - closed).cwiseAbs().maxCoeff() < 1e-12);
    }
  }
}

TEST_CASE("iteration budget exhaustion raises an error") {
  const ModelSpec spec = load_model(model_file("coupled_2type.json"));
  CHECK_THROWS_AS(solve_consistency(spec, 1e-14, 0.5, 1), NoConvergence);
  CHECK_THROWS_AS(solve_consistency(spec, 1e-10, 0.0, 5), ConfigError);
}
