#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <string>

#include "mfglab/config_load.hpp"
#include "mfglab/errors.hpp"
#include "mfglab/linalg.hpp"
#include "mfglab/model.hpp"

using namespace mfglab;

namespace {
std::string model_file(const char* name) {
  return std::string(MFGLAB_MODELS_DIR) + "/" + name;
}
}  // namespace

TEST_CASE("reference models load and validate") {
  const ModelSpec coupled = load_model(model_file("coupled_2type.json"));
  CHECK(coupled.K() == 2);
  CHECK(coupled.M() == 2);
  CHECK(coupled.dims.n == 1);
  CHECK(coupled.grid.steps == 100);
  CHECK(validate(coupled).ok());

  const ModelSpec dec = load_model(model_file("decoupled_scalar.json"));
  CHECK(dec.K() == 1);
  CHECK(dec.M() == 1);
  CHECK(validate(dec).ok());

  const ModelSpec det = load_model(model_file("deterministic_forcing.json"));
  CHECK(det.M() == 1);
  CHECK(max_abs(det.common.sigma) == 0.0);
  CHECK(validate(det).ok());
}

TEST_CASE("indefinite terminal weight is rejected with the failing item") {
  const ModelSpec bad = load_model(model_file("invalid_g.json"));
  const ValidationReport rep = validate(bad);
  CHECK_FALSE(rep.ok());
  bool found = false;
  for (const auto& item : rep.items) {
    if (!item.pass) {
      CHECK(item.name == "major_cost.G psd");
      found = true;
    }
  }
  CHECK(found);
  CHECK_THROWS_AS(require_valid(bad), ConvexityViolation);
}

TEST_CASE("unknown keys and shape errors are rejected at load") {
  ModelSpec good = load_model(model_file("decoupled_scalar.json"));
  (void)good;
  CHECK_THROWS_AS(load_model_from_string("{\"dims\": {\"n\": 1}, \"oops\": 3}"),
                  ConfigError);
  try {
    load_model_from_string("{\"dims\": {\"n\": 1}, \"oops\": 3}");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("oops") != std::string::npos);
  }
}

TEST_CASE("validation items catch in-memory inconsistencies") {
  ModelSpec spec = load_model(model_file("decoupled_scalar.json"));

  SUBCASE("common dim must match agent dim") {
    spec.dims.d = 2;
    const ValidationReport rep = validate(spec);
    CHECK_FALSE(rep.ok());
  }
  SUBCASE("R must clear the convexity margin") {
    spec.minor_costs[0].R(0, 0) = 1e-9;
    CHECK_FALSE(validate(spec).ok());
    CHECK_THROWS_AS(require_valid(spec), ConvexityViolation);
  }
  SUBCASE("wrong B0 shape throws a dimension error") {
    spec.major.B0 = MatrixXd::Zero(2, 1);
    CHECK_FALSE(validate(spec).ok());
    CHECK_THROWS_AS(require_valid(spec), DimensionMismatch);
  }
  SUBCASE("type fractions must be a simplex") {
    spec.population.type_fractions[0] = 0.7;
    CHECK_FALSE(validate(spec).ok());
  }
  SUBCASE("negative off-diagonal chain rates are rejected") {
    spec.chain.rates = MatrixXd::Constant(1, 1, -1.0);
    // diagonal is ignored, so a 1-state chain stays valid
    CHECK(validate(spec).ok());
    spec.minors.push_back(spec.minors[0]);
    spec.minor_costs.push_back(spec.minor_costs[0]);
    spec.common.F.push_back(spec.common.F[0]);
    spec.common.H.push_back(spec.common.H[0]);
    spec.population.type_fractions = VectorXd::Constant(2, 0.5);
    spec.chain.rates = MatrixXd::Zero(2, 2);
    spec.chain.rates(0, 1) = -0.5;
    spec.chain.initial_dist = VectorXd::Constant(2, 0.5);
    spec.chain.states = {VectorXd::Zero(1), VectorXd::Zero(1)};
    spec.common.drift.intercept = {VectorXd::Zero(1), VectorXd::Zero(1)};
    spec.common.drift.slope = {MatrixXd::Zero(1, 1), MatrixXd::Zero(1, 1)};
    CHECK_FALSE(validate(spec).ok());
  }
  SUBCASE("rank-deficient common noise needs a single chain state") {
    spec.common.sigma = MatrixXd::Zero(1, 1);
    CHECK(validate(spec).ok());  // M == 1 here
  }
}

TEST_CASE("latent chain helpers") {
  LatentChainSpec chain;
  chain.rates = MatrixXd::Zero(2, 2);
  chain.rates(0, 1) = 2.0;
  chain.rates(1, 0) = 1.0;
  chain.initial_dist = VectorXd::Constant(2, 0.5);
  chain.states = {VectorXd::Zero(1), VectorXd::Zero(1)};

  const MatrixXd Q = chain.generator();
  CHECK(Q.rowwise().sum().cwiseAbs().maxCoeff() == doctest::Approx(0.0));
  CHECK(Q(0, 0) == doctest::Approx(-2.0));

  const VectorXd st = chain.stationary();
  CHECK(st[0] == doctest::Approx(1.0 / 3.0).epsilon(1e-9));
  CHECK(st[1] == doctest::Approx(2.0 / 3.0).epsilon(1e-9));
  CHECK((st.transpose() * Q).cwiseAbs().maxCoeff() < 1e-12);

  const VectorXd exits = chain.exit_rates();
  CHECK(exits[0] == doctest::Approx(2.0));
  CHECK(exits[1] == doctest::Approx(1.0));
}

TEST_CASE("time grid node lookup") {
  TimeGrid grid{2.0, 8};
  CHECK(grid.dt() == doctest::Approx(0.25));
  CHECK(grid.nodes() == 9);
  CHECK(grid.index_of(0.0) == 0);
  CHECK(grid.index_of(1.5) == 6);
  CHECK(grid.index_of(2.0) == 8);
  CHECK_THROWS_AS(grid.index_of(0.3), OffGrid);
  CHECK_THROWS_AS(grid.index_of(-0.25), OffGrid);
}

TEST_CASE("impact stacking helpers") {
  std::vector<MatrixXd> blocks = {MatrixXd::Constant(1, 1, 2.0),
                                  MatrixXd::Constant(1, 1, 3.0)};
  VectorXd frac(2);
  frac << 0.25, 0.75;
  const MatrixXd scaled = scaled_impact(blocks, frac);
  CHECK(scaled.rows() == 1);
  CHECK(scaled.cols() == 2);
  CHECK(scaled(0, 0) == doctest::Approx(0.5));
  CHECK(scaled(0, 1) == doctest::Approx(2.25));

  const MatrixXd e1 = type_embed(2, 3, 1);
  CHECK(e1.rows() == 2);
  CHECK(e1.cols() == 6);
  CHECK(e1(0, 2) == 1.0);
  CHECK(e1(1, 3) == 1.0);
  CHECK(e1.sum() == doctest::Approx(2.0));
}

TEST_CASE("extended systems have the documented block layout") {
  const ModelSpec spec = load_model(model_file("coupled_2type.json"));
  const int n = spec.dims.n, K = spec.K();
  const GainTrajectories g = zero_gains(spec);
  const ExtendedMajorSystem major = build_extended_major(spec, g);
  CHECK(major.dim == 2 * n + n * K);
  CHECK(static_cast<int>(major.A.size()) == spec.grid.nodes());

  // with zero gains the y-row carries the direct impacts only
  const MatrixXd Hpi = scaled_impact(spec.common.H,
                                     spec.population.type_fractions);
  CHECK(max_abs(major.A[0].block(0, n, n, n) - spec.common.H0) < 1e-14);
  CHECK(max_abs(major.A[0].block(0, 2 * n, n, n * K) - Hpi) < 1e-14);
  CHECK(max_abs(major.A[0].block(n, n, n, n) - spec.major.A0) < 1e-14);
  // major control reaches y through F0 and x0 through B0
  CHECK(max_abs(major.B.topRows(n) - spec.common.F0) < 1e-14);
  CHECK(max_abs(major.B.middleRows(n, n) - spec.major.B0) < 1e-14);

  std::vector<MatrixXd> Pi0(spec.grid.nodes(),
                            MatrixXd::Zero(major.dim, major.dim));
  const ExtendedMinorSystem minor = build_extended_minor(spec, 0, major, Pi0);
  CHECK(minor.dim == 3 * n + n * K);
  CHECK(max_abs(minor.A[0].block(0, 0, n, n) - spec.minors[0].A) < 1e-14);
  CHECK(max_abs(minor.B.topRows(n) - spec.minors[0].B) < 1e-14);
  // with Pi0 = 0 the environment block is the major loop closed through the
  // cost cross term alone: A - B R^-1 N^T
  const MatrixXd closed =
      major.A[0] - major.B * major.R.inverse() * major.Nx.transpose();
  CHECK(max_abs(minor.A[0].block(n, n, major.dim, major.dim) - closed) <
        1e-14);
}

TEST_CASE("drift signals evaluate per node") {
  DriftSignal c = DriftSignal::constant(VectorXd::Constant(1, 0.7));
  CHECK(c.at(0)[0] == 0.7);
  CHECK(c.at(57)[0] == 0.7);

  DriftSignal s;
  s.kind = DriftSignal::Kind::Sampled;
  s.samples = {VectorXd::Constant(1, 1.0), VectorXd::Constant(1, 2.0)};
  CHECK(s.at(1)[0] == 2.0);

  CommonDrift affine;
  affine.kind = CommonDrift::Kind::Affine;
  affine.intercept = {VectorXd::Constant(1, 0.5)};
  affine.slope = {MatrixXd::Constant(1, 1, -2.0)};
  const VectorXd y = VectorXd::Constant(1, 3.0);
  CHECK(affine.eval(0, y, 0)[0] == doctest::Approx(0.5 - 6.0));
  CHECK(affine.depends_on_y());
  affine.slope[0].setZero();
  CHECK_FALSE(affine.depends_on_y());
}
