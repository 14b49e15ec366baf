#include "mfglab/config_load.hpp"

#include <fstream>
#include <initializer_list>
#include <set>
#include <string>

#include <nlohmann/json.hpp>

#include "mfglab/errors.hpp"

namespace mfglab {

using nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& where, const std::string& what) {
  throw ConfigError("model config: " + where + ": " + what);
}

const json& member(const json& j, const std::string& where,
                   const std::string& key) {
  if (!j.contains(key)) fail(where, "missing key '" + key + "'");
  return j.at(key);
}

void check_keys(const json& j, const std::string& where,
                std::initializer_list<const char*> allowed) {
  if (!j.is_object()) fail(where, "expected an object");
  std::set<std::string> ok(allowed.begin(), allowed.end());
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!ok.count(it.key())) fail(where, "unknown key '" + it.key() + "'");
  }
}

double number_at(const json& j, const std::string& where) {
  if (!j.is_number()) fail(where, "expected a number");
  return j.get<double>();
}

VectorXd parse_vector(const json& j, int size, const std::string& where) {
  if (!j.is_array()) fail(where, "expected an array");
  if (size >= 0 && static_cast<int>(j.size()) != size) {
    fail(where, "expected length " + std::to_string(size) + ", got " +
                    std::to_string(j.size()));
  }
  VectorXd v(j.size());
  for (size_t i = 0; i < j.size(); ++i) {
    v[static_cast<int>(i)] = number_at(j[i], where + "[" + std::to_string(i) + "]");
  }
  return v;
}

MatrixXd parse_matrix(const json& j, int rows, int cols,
                      const std::string& where) {
  if (!j.is_array() || j.empty() || !j[0].is_array()) {
    fail(where, "expected a matrix (array of rows)");
  }
  if (rows >= 0 && static_cast<int>(j.size()) != rows) {
    throw DimensionMismatch("model config: " + where + ": expected " +
                            std::to_string(rows) + " rows, got " +
                            std::to_string(j.size()));
  }
  const int ncols = static_cast<int>(j[0].size());
  if (cols >= 0 && ncols != cols) {
    throw DimensionMismatch("model config: " + where + ": expected " +
                            std::to_string(cols) + " cols, got " +
                            std::to_string(ncols));
  }
  MatrixXd A(j.size(), ncols);
  for (size_t i = 0; i < j.size(); ++i) {
    const json& row = j[i];
    if (!row.is_array() || static_cast<int>(row.size()) != ncols) {
      fail(where, "ragged matrix at row " + std::to_string(i));
    }
    for (int c = 0; c < ncols; ++c) {
      A(static_cast<int>(i), c) =
          number_at(row[c], where + " entry");
    }
  }
  return A;
}

DriftSignal parse_signal(const json& j, int size, int nodes,
                         const std::string& where) {
  check_keys(j, where, {"kind", "value", "values"});
  const std::string kind = member(j, where, "kind").get<std::string>();
  DriftSignal s;
  if (kind == "constant") {
    s.kind = DriftSignal::Kind::Constant;
    s.value = parse_vector(member(j, where, "value"), size, where + ".value");
  } else if (kind == "sampled") {
    s.kind = DriftSignal::Kind::Sampled;
    const json& vals = member(j, where, "values");
    if (!vals.is_array() || static_cast<int>(vals.size()) != nodes) {
      fail(where + ".values",
           "need one sample per grid node (" + std::to_string(nodes) + ")");
    }
    s.samples.reserve(vals.size());
    for (size_t i = 0; i < vals.size(); ++i) {
      s.samples.push_back(parse_vector(vals[i], size,
                                       where + ".values[" + std::to_string(i) + "]"));
    }
  } else {
    fail(where, "unknown signal kind '" + kind + "'");
  }
  return s;
}

CommonDrift parse_drift(const json& j, int d, int M, int nodes,
                        const std::string& where) {
  check_keys(j, where, {"kind", "intercepts", "slopes", "values"});
  const std::string kind = member(j, where, "kind").get<std::string>();
  CommonDrift dr;
  auto parse_per_state_vectors = [&](const json& arr, const char* what) {
    if (!arr.is_array() || static_cast<int>(arr.size()) != M) {
      fail(where, std::string(what) + " needs one entry per chain state");
    }
    std::vector<VectorXd> out;
    for (size_t s = 0; s < arr.size(); ++s) {
      out.push_back(parse_vector(arr[s], d,
                                 where + "." + what + "[" + std::to_string(s) + "]"));
    }
    return out;
  };
  if (kind == "affine" || kind == "constant") {
    dr.kind = CommonDrift::Kind::Affine;
    dr.intercept = parse_per_state_vectors(member(j, where, "intercepts"),
                                           "intercepts");
    if (kind == "affine") {
      const json& sl = member(j, where, "slopes");
      if (!sl.is_array() || static_cast<int>(sl.size()) != M) {
        fail(where, "slopes needs one matrix per chain state");
      }
      for (size_t s = 0; s < sl.size(); ++s) {
        dr.slope.push_back(parse_matrix(sl[s], d, d,
                                        where + ".slopes[" + std::to_string(s) + "]"));
      }
    } else {
      dr.slope.assign(M, MatrixXd::Zero(d, d));
    }
  } else if (kind == "sampled") {
    dr.kind = CommonDrift::Kind::Sampled;
    const json& vals = member(j, where, "values");
    if (!vals.is_array() || static_cast<int>(vals.size()) != M) {
      fail(where, "values needs one trajectory per chain state");
    }
    for (size_t s = 0; s < vals.size(); ++s) {
      const json& traj = vals[s];
      if (!traj.is_array() || static_cast<int>(traj.size()) != nodes) {
        fail(where, "trajectory " + std::to_string(s) + " needs " +
                        std::to_string(nodes) + " samples");
      }
      std::vector<VectorXd> samples;
      for (size_t i = 0; i < traj.size(); ++i) {
        samples.push_back(parse_vector(traj[i], d, where + ".values entry"));
      }
      dr.samples.push_back(std::move(samples));
    }
  } else {
    fail(where, "unknown drift kind '" + kind + "'");
  }
  return dr;
}

CostWeights parse_cost(const json& j, int n, int m, const std::string& where) {
  check_keys(j, where, {"G", "Q", "N", "R"});
  CostWeights w;
  w.G = parse_matrix(member(j, where, "G"), 2 * n, 2 * n, where + ".G");
  w.Q = parse_matrix(member(j, where, "Q"), 2 * n, 2 * n, where + ".Q");
  w.N = parse_matrix(member(j, where, "N"), 2 * n, m, where + ".N");
  w.R = parse_matrix(member(j, where, "R"), m, m, where + ".R");
  return w;
}

std::vector<MatrixXd> parse_block_list(const json& j, int K, int rows,
                                       int cols, const std::string& where) {
  if (!j.is_array() || static_cast<int>(j.size()) != K) {
    fail(where, "need one block per minor type (" + std::to_string(K) + ")");
  }
  std::vector<MatrixXd> out;
  for (size_t k = 0; k < j.size(); ++k) {
    out.push_back(parse_matrix(j[k], rows, cols,
                               where + "[" + std::to_string(k) + "]"));
  }
  return out;
}

ModelSpec parse_model(const json& root) {
  check_keys(root, "top level",
             {"dims", "grid", "convexity_delta", "initial_states", "major",
              "major_cost", "minor_types", "chain", "common", "population"});

  ModelSpec spec;

  const json& dims = member(root, "top level", "dims");
  check_keys(dims, "dims", {"n", "m", "r", "d"});
  spec.dims.n = member(dims, "dims", "n").get<int>();
  spec.dims.m = member(dims, "dims", "m").get<int>();
  spec.dims.r = member(dims, "dims", "r").get<int>();
  spec.dims.d = member(dims, "dims", "d").get<int>();
  const int n = spec.dims.n, m = spec.dims.m, r = spec.dims.r, d = spec.dims.d;
  if (n <= 0 || m <= 0 || r <= 0 || d <= 0) fail("dims", "must be positive");

  const json& grid = member(root, "top level", "grid");
  check_keys(grid, "grid", {"T", "steps"});
  spec.grid.T = number_at(member(grid, "grid", "T"), "grid.T");
  spec.grid.steps = member(grid, "grid", "steps").get<int>();
  if (spec.grid.T <= 0 || spec.grid.steps < 1) fail("grid", "T > 0, steps >= 1");
  const int nodes = spec.grid.nodes();

  if (root.contains("convexity_delta")) {
    spec.convexity_delta = number_at(root.at("convexity_delta"), "convexity_delta");
  }

  if (root.contains("initial_states")) {
    const json& init = root.at("initial_states");
    check_keys(init, "initial_states", {"kind", "major_std", "minor_std"});
    const std::string kind = member(init, "initial_states", "kind").get<std::string>();
    if (kind == "zero") {
      spec.init.kind = InitialStateSpec::Kind::Zero;
    } else if (kind == "gaussian") {
      spec.init.kind = InitialStateSpec::Kind::Gaussian;
      spec.init.major_std =
          number_at(member(init, "initial_states", "major_std"), "major_std");
      spec.init.minor_std =
          number_at(member(init, "initial_states", "minor_std"), "minor_std");
    } else {
      fail("initial_states", "unknown kind '" + kind + "'");
    }
  }

  const json& major = member(root, "top level", "major");
  check_keys(major, "major", {"A0", "B0", "sigma0", "b0"});
  spec.major.A0 = parse_matrix(member(major, "major", "A0"), n, n, "major.A0");
  spec.major.B0 = parse_matrix(member(major, "major", "B0"), n, m, "major.B0");
  spec.major.sigma0 =
      parse_matrix(member(major, "major", "sigma0"), n, r, "major.sigma0");
  spec.major.b0 = parse_signal(member(major, "major", "b0"), n, nodes, "major.b0");

  spec.major_cost =
      parse_cost(member(root, "top level", "major_cost"), n, m, "major_cost");

  const json& types = member(root, "top level", "minor_types");
  if (!types.is_array() || types.empty()) {
    fail("minor_types", "need at least one type");
  }
  const int K = static_cast<int>(types.size());
  for (int k = 0; k < K; ++k) {
    const json& t = types[k];
    const std::string who = "minor_types[" + std::to_string(k) + "]";
    check_keys(t, who, {"A", "B", "sigma", "b", "cost"});
    MinorTypeDynamics mk;
    mk.A = parse_matrix(member(t, who, "A"), n, n, who + ".A");
    mk.B = parse_matrix(member(t, who, "B"), n, m, who + ".B");
    mk.sigma = parse_matrix(member(t, who, "sigma"), n, r, who + ".sigma");
    mk.b = parse_signal(member(t, who, "b"), n, nodes, who + ".b");
    spec.minors.push_back(std::move(mk));
    spec.minor_costs.push_back(
        parse_cost(member(t, who, "cost"), n, m, who + ".cost"));
  }

  const json& chain = member(root, "top level", "chain");
  check_keys(chain, "chain", {"states", "rates", "initial_dist"});
  const json& states = member(chain, "chain", "states");
  if (!states.is_array() || states.empty()) fail("chain.states", "empty");
  const int M = static_cast<int>(states.size());
  for (int j = 0; j < M; ++j) {
    spec.chain.states.push_back(
        parse_vector(states[j], -1, "chain.states[" + std::to_string(j) + "]"));
  }
  spec.chain.rates =
      parse_matrix(member(chain, "chain", "rates"), M, M, "chain.rates");
  spec.chain.initial_dist = parse_vector(member(chain, "chain", "initial_dist"),
                                         M, "chain.initial_dist");

  const json& common = member(root, "top level", "common");
  check_keys(common, "common", {"drift", "sigma", "F", "F0", "H", "H0", "y0"});
  spec.common.drift =
      parse_drift(member(common, "common", "drift"), d, M, nodes, "common.drift");
  spec.common.sigma =
      parse_matrix(member(common, "common", "sigma"), d, r, "common.sigma");
  spec.common.F = parse_block_list(member(common, "common", "F"), K, d, m,
                                   "common.F");
  spec.common.F0 =
      parse_matrix(member(common, "common", "F0"), d, m, "common.F0");
  spec.common.H = parse_block_list(member(common, "common", "H"), K, d, n,
                                   "common.H");
  spec.common.H0 =
      parse_matrix(member(common, "common", "H0"), d, n, "common.H0");
  spec.common.y0 = parse_vector(member(common, "common", "y0"), d, "common.y0");

  const json& pop = member(root, "top level", "population");
  check_keys(pop, "population", {"type_fractions", "N_schedule", "wiener_cov"});
  spec.population.type_fractions = parse_vector(
      member(pop, "population", "type_fractions"), K, "population.type_fractions");
  const json& sched = member(pop, "population", "N_schedule");
  if (!sched.is_array() || sched.empty()) {
    fail("population.N_schedule", "need at least one population size");
  }
  for (const auto& v : sched) {
    spec.population.N_schedule.push_back(v.get<int>());
  }
  if (pop.contains("wiener_cov")) {
    spec.population.wiener_cov =
        parse_matrix(pop.at("wiener_cov"), r, r, "population.wiener_cov");
  }

  return spec;
}

}  // namespace

ModelSpec load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open model file: " + path);
  json root;
  try {
    in >> root;
  } catch (const json::exception& e) {
    throw ConfigError("model config: " + path + ": " + e.what());
  }
  return parse_model(root);
}

ModelSpec load_model_from_string(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("model config: ") + e.what());
  }
  return parse_model(root);
}

}  // namespace mfglab
