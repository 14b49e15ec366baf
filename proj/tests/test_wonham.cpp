#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <string>
#include <unsupported/Eigen/MatrixFunctions>

#include <nlohmann/json.hpp>

#include "mfglab/config_load.hpp"
#include "mfglab/errors.hpp"
#include "mfglab/offset.hpp"
#include "mfglab/wonham.hpp"
#include "oracles.hpp"

using namespace mfglab;
using nlohmann::json;

namespace {

// Scalar two-state model whose latent drift is the only informative channel;
// all agent coupling is switched off so the common path is a plain regime
// switching diffusion.
json chain_model(int steps, double drift_a, double sigma, double rate) {
  json j;
  j["dims"] = {{"n", 1}, {"m", 1}, {"r", 1}, {"d", 1}};
  j["grid"] = {{"T", 1.0}, {"steps", steps}};
  j["convexity_delta"] = 1e-6;
  j["major"] = {{"A0", {{-1.0}}},
                {"B0", {{1.0}}},
                {"sigma0", {{0.2}}},
                {"b0", {{"kind", "constant"}, {"value", {0.0}}}}};
  j["major_cost"] = {{"G", {{0.0, 0.0}, {0.0, 0.0}}},
                     {"Q", {{0.1, 0.0}, {0.0, 0.1}}},
                     {"N", {{0.0}, {0.0}}},
                     {"R", {{1.0}}}};
  j["minor_types"] = json::array();
  j["minor_types"].push_back(
      {{"A", {{-1.0}}},
       {"B", {{1.0}}},
       {"sigma", {{0.2}}},
       {"b", {{"kind", "constant"}, {"value", {0.0}}}},
       {"cost",
        {{"G", {{0.0, 0.0}, {0.0, 0.0}}},
         {"Q", {{0.1, 0.0}, {0.0, 0.1}}},
         {"N", {{0.0}, {0.0}}},
         {"R", {{1.0}}}}}});
  j["chain"] = {{"states", {{-1.0}, {1.0}}},
                {"rates", {{-rate, rate}, {rate, -rate}}},
                {"initial_dist", {0.5, 0.5}}};
  j["common"] = {{"drift",
                  {{"kind", "affine"},
                   {"intercepts", {{-drift_a}, {drift_a}}},
                   {"slopes", {{{0.0}}, {{0.0}}}}}},
                 {"sigma", {{sigma}}},
                 {"F", {{{0.0}}, {{0.0}}}},
                 {"F0", {{0.0}}},
                 {"H", {{{0.0}}, {{0.0}}}},
                 {"H0", {{0.0}}},
                 {"y0", {0.0}}};
  j["population"] = {{"type_fractions", {0.6, 0.4}},
                     {"N_schedule", {2, 5}}};
  return j;
}

ModelSpec two_type_chain_model(int steps, double drift_a, double sigma,
                               double rate) {
  json j = chain_model(steps, drift_a, sigma, rate);
  j["minor_types"].push_back(j["minor_types"][0]);
  return load_model_from_string(j.dump());
}

}  // namespace

TEST_CASE("posterior tracks a particle filter on an informative drift") {
  const ModelSpec spec = two_type_chain_model(1000, 1.0, 0.3, 1.0);
  const CommonPath path = sample_common_path(spec, 7, 0);

  const std::vector<VectorXd> pf = oracles::particle_posteriors(
      spec.chain, spec.common.drift, spec.common.sigma, spec.grid, path.y,
      10000, 1234);

  double gap = 0.0;
  for (int i = 0; i < spec.grid.nodes(); ++i) {
    CHECK(path.pi[i].minCoeff() >= -1e-12);
    CHECK(std::abs(path.pi[i].sum() - 1.0) < 1e-9);
    gap += std::abs(path.pi[i][1] - pf[i][1]);
  }
  gap /= spec.grid.nodes();
  CHECK(gap < 0.05);

  // the posterior must carry real information about the hidden state
  double hit = 0.0;
  for (int i = 0; i < spec.grid.nodes(); ++i) {
    hit += (path.pi[i][path.chain[i]] > 0.5) ? 1.0 : 0.0;
  }
  CHECK(hit / spec.grid.nodes() > 0.6);
}

TEST_CASE("no-jump posterior matches the static Bayes formula") {
  const ModelSpec spec = two_type_chain_model(10000, 1.0, 0.5, 0.0);
  const CommonPath path = sample_common_path(spec, 11, 3);

  double worst = 0.0;
  for (int i = 0; i < spec.grid.nodes(); ++i) {
    const VectorXd exact = oracles::static_bayes_posterior(
        spec.chain.initial_dist, {-1.0, 1.0}, 0.5,
        path.y[i][0] - spec.common.y0[0], spec.grid.t(i));
    worst = std::max(worst, (path.pi[i] - exact).cwiseAbs().maxCoeff());
  }
  CHECK(worst < 5e-3);
}

TEST_CASE("uninformative drift reduces the posterior to the marginal law") {
  // equal drifts in both states: the observation update vanishes and the
  // posterior follows pi' = Q^T pi
  json j = chain_model(1000, 1.0, 0.4, 0.0);
  j["minor_types"].push_back(j["minor_types"][0]);
  j["common"]["drift"]["intercepts"] = {{0.3}, {0.3}};
  j["chain"]["rates"] = {{-2.0, 2.0}, {1.0, -1.0}};
  j["chain"]["initial_dist"] = {0.9, 0.1};
  const ModelSpec spec = load_model_from_string(j.dump());

  const CommonPath path = sample_common_path(spec, 5, 1);
  const MatrixXd Q = spec.chain.generator();
  double worst = 0.0;
  for (int i = 0; i < spec.grid.nodes(); ++i) {
    const MatrixXd expQ = (Q.transpose() * spec.grid.t(i)).exp();
    const VectorXd marginal = expQ * spec.chain.initial_dist;
    worst = std::max(worst, (path.pi[i] - marginal).cwiseAbs().maxCoeff());
  }
  CHECK(worst < 2e-3);

  // symmetric-rate uniform prior is an exact fixed point
  json s = chain_model(200, 1.0, 0.4, 1.5);
  s["minor_types"].push_back(s["minor_types"][0]);
  s["common"]["drift"]["intercepts"] = {{0.3}, {0.3}};
  const ModelSpec sym = load_model_from_string(s.dump());
  const CommonPath fixed = sample_common_path(sym, 5, 1);
  for (int i = 0; i < sym.grid.nodes(); ++i) {
    CHECK(std::abs(fixed.pi[i][0] - 0.5) < 1e-12);
  }
}

TEST_CASE("innovation increments accumulate unit quadratic variation") {
  const ModelSpec spec = two_type_chain_model(2000, 1.0, 0.3, 1.0);
  const WonhamFilter filter(spec);
  const CommonPath path = sample_common_path(spec, 21, 0);

  FilterState fs = filter.init();
  double qv = 0.0;
  for (int i = 0; i < spec.grid.steps; ++i) {
    const VectorXd dy = path.y[i + 1] - path.y[i];
    const VectorXd dnu = filter.innovation_increment(fs, dy);
    qv += dnu.squaredNorm();
    fs = filter.step(fs, dy);
  }
  CHECK(std::abs(qv - spec.grid.T) < 0.2);
  CHECK(fs.innovation.size() == spec.dims.r);
}

TEST_CASE("single-state filter degenerates gracefully") {
  json j = chain_model(100, 0.5, 0.0, 0.0);
  j["chain"] = {{"states", {{0.0}}}, {"rates", {{0.0}}},
                {"initial_dist", {1.0}}};
  j["common"]["drift"] = {{"kind", "affine"},
                          {"intercepts", {{0.5}}},
                          {"slopes", {{{0.0}}}}};
  j["common"]["F"] = {{{0.0}}};
  j["common"]["H"] = {{{0.0}}};
  j["population"]["type_fractions"] = {1.0};
  const ModelSpec spec = load_model_from_string(j.dump());
  CHECK(validate(spec).ok());

  const WonhamFilter filter(spec);
  CHECK(filter.degenerate());
  FilterState fs = filter.init();
  CHECK(fs.pi.size() == 1);
  CHECK(fs.pi[0] == 1.0);
  fs = filter.step(fs, VectorXd::Zero(1));
  CHECK(fs.pi[0] == 1.0);
  CHECK(fs.fhat[0] == doctest::Approx(0.5));
}

TEST_CASE("singular noise with several states is rejected") {
  json j = chain_model(100, 1.0, 0.0, 1.0);
  j["minor_types"].push_back(j["minor_types"][0]);
  const ModelSpec spec = load_model_from_string(j.dump());
  CHECK_FALSE(validate(spec).ok());
  CHECK_THROWS_AS(WonhamFilter{spec}, SingularSigma);
}

TEST_CASE("violent observations are clipped back onto the simplex") {
  const ModelSpec spec = two_type_chain_model(100, 1.0, 0.05, 1.0);
  const WonhamFilter filter(spec);
  FilterState fs = filter.init();
  for (int i = 0; i < 5; ++i) {
    const double sign = (i % 2 == 0) ? 1.0 : -1.0;
    fs = filter.step(fs, VectorXd::Constant(1, sign * 5.0));
    CHECK(fs.pi.minCoeff() >= 0.0);
    CHECK(fs.pi.maxCoeff() <= 1.0);
    CHECK(std::abs(fs.pi.sum() - 1.0) < 1e-12);
  }
  CHECK(fs.clip_warnings >= 1);
}
