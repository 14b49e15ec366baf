#include "mfglab/artifacts.hpp"

#include <fstream>

#include <nlohmann/json.hpp>

#include "mfglab/errors.hpp"

namespace mfglab {

using nlohmann::json;

namespace {

json matrix_to_json(const MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

MatrixXd matrix_from_json(const json& j, int rows, int cols,
                          const std::string& what) {
  if (!j.is_array() || static_cast<int>(j.size()) != rows) {
    throw IoError(what + ": expected " + std::to_string(rows) + " rows");
  }
  MatrixXd m(rows, cols);
  for (int i = 0; i < rows; ++i) {
    const json& row = j[i];
    if (!row.is_array() || static_cast<int>(row.size()) != cols) {
      throw IoError(what + ": expected " + std::to_string(cols) +
                    " columns in row " + std::to_string(i));
    }
    for (int c = 0; c < cols; ++c) m(i, c) = row[c].get<double>();
  }
  return m;
}

json trajectory_to_json(const std::vector<MatrixXd>& traj) {
  json out = json::array();
  for (const MatrixXd& m : traj) out.push_back(matrix_to_json(m));
  return out;
}

std::vector<MatrixXd> trajectory_from_json(const json& j, int nodes, int rows,
                                           int cols, const std::string& what) {
  if (!j.is_array() || static_cast<int>(j.size()) != nodes) {
    throw IoError(what + ": expected " + std::to_string(nodes) + " nodes");
  }
  std::vector<MatrixXd> out(nodes);
  for (int i = 0; i < nodes; ++i) {
    out[i] = matrix_from_json(j[i], rows, cols, what);
  }
  return out;
}

json load_document(const std::string& path, const std::string& format,
                   int version) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw IoError(path + ": " + e.what());
  }
  if (doc.value("format", "") != format) {
    throw IoError(path + ": expected format \"" + format + "\"");
  }
  if (doc.value("version", 0) != version) {
    throw IoError(path + ": unsupported version");
  }
  return doc;
}

void write_document(const std::string& path, const json& doc) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out << doc.dump(1) << "\n";
  if (!out) throw IoError("failed writing " + path);
}

void check_grid(const json& doc, const TimeGrid& grid,
                const std::string& path) {
  const double T = doc.at("grid").at("T").get<double>();
  const int steps = doc.at("grid").at("steps").get<int>();
  if (T != grid.T || steps != grid.steps) {
    throw GridMismatch(path + ": grid (" + std::to_string(T) + ", " +
                       std::to_string(steps) + ") does not match the model");
  }
}

}  // namespace

void save_gains(const std::string& path, const MeanFieldGains& mf) {
  const TimeGrid& grid = mf.major.grid;
  json doc;
  doc["format"] = "mfglab-gains";
  doc["version"] = 1;
  doc["grid"] = {{"T", grid.T}, {"steps", grid.steps}};
  doc["dims"] = {{"n", mf.major.n},
                 {"m", mf.major.m},
                 {"K", mf.major.K},
                 {"major_dim", mf.major.dim}};
  doc["converged"] = mf.converged;
  doc["iterations"] = mf.iterations;
  doc["residual"] = mf.residual;
  doc["residual_history"] = mf.residual_history;
  doc["gains"] = {{"C", trajectory_to_json(mf.gains.C)},
                  {"D", trajectory_to_json(mf.gains.D)},
                  {"E", trajectory_to_json(mf.gains.E)},
                  {"Abar", trajectory_to_json(mf.gains.Abar)},
                  {"Gbar", trajectory_to_json(mf.gains.Gbar)},
                  {"Lbar", trajectory_to_json(mf.gains.Lbar)}};
  doc["Pi0"] = trajectory_to_json(mf.Pi0.Pi);
  json pik = json::array();
  for (const RiccatiSolution& sol : mf.Pik) {
    pik.push_back(trajectory_to_json(sol.Pi));
  }
  doc["Pik"] = pik;
  write_document(path, doc);
}

MeanFieldGains load_gains(const std::string& path, const ModelSpec& spec) {
  const json doc = load_document(path, "mfglab-gains", 1);
  check_grid(doc, spec.grid, path);
  const int n = spec.dims.n, m = spec.dims.m, K = spec.K();
  const int nodes = spec.grid.nodes();
  const int p0 = 2 * n + n * K;
  const int pk = 3 * n + n * K;

  MeanFieldGains mf;
  const json& g = doc.at("gains");
  mf.gains.C = trajectory_from_json(g.at("C"), nodes, m * K, n * K, "C");
  mf.gains.D = trajectory_from_json(g.at("D"), nodes, m * K, n, "D");
  mf.gains.E = trajectory_from_json(g.at("E"), nodes, m * K, n, "E");
  mf.gains.Abar =
      trajectory_from_json(g.at("Abar"), nodes, n * K, n * K, "Abar");
  mf.gains.Gbar = trajectory_from_json(g.at("Gbar"), nodes, n * K, n, "Gbar");
  mf.gains.Lbar = trajectory_from_json(g.at("Lbar"), nodes, n * K, n, "Lbar");

  mf.Pi0.grid = spec.grid;
  mf.Pi0.Pi = trajectory_from_json(doc.at("Pi0"), nodes, p0, p0, "Pi0");
  const json& pik = doc.at("Pik");
  if (static_cast<int>(pik.size()) != K) {
    throw IoError(path + ": expected " + std::to_string(K) +
                  " minor Riccati trajectories");
  }
  mf.Pik.resize(K);
  for (int k = 0; k < K; ++k) {
    mf.Pik[k].grid = spec.grid;
    mf.Pik[k].Pi = trajectory_from_json(pik[k], nodes, pk, pk, "Pik");
  }

  mf.converged = doc.value("converged", false);
  mf.iterations = doc.value("iterations", 0);
  mf.residual = doc.value("residual", 0.0);
  if (doc.contains("residual_history")) {
    mf.residual_history =
        doc.at("residual_history").get<std::vector<double>>();
  }

  mf.major = build_extended_major(spec, mf.gains);
  mf.minors.clear();
  mf.minors.reserve(K);
  for (int k = 0; k < K; ++k) {
    mf.minors.push_back(build_extended_minor(spec, k, mf.major, mf.Pi0.Pi));
  }
  return mf;
}

void save_offsets(const std::string& path, const OffsetEstimator& est,
                  int training_paths) {
  json doc;
  doc["format"] = "mfglab-offsets";
  doc["version"] = 1;
  doc["grid"] = {{"T", est.grid.T}, {"steps", est.grid.steps}};
  doc["basis"] = {{"d", est.basis.d}, {"M", est.basis.M}};
  doc["dim"] = est.sys.dim;
  doc["training_paths"] = training_paths;
  doc["slice0_target_sd"] = est.slice0_target_sd;
  doc["active"] = est.active;
  json coef = json::array();
  for (const MatrixXd& c : est.coef) coef.push_back(matrix_to_json(c));
  doc["coef"] = coef;
  write_document(path, doc);
}

OffsetEstimator load_offsets(const std::string& path, const ModelSpec& spec,
                             const MeanFieldGains& mf) {
  const json doc = load_document(path, "mfglab-offsets", 1);
  check_grid(doc, spec.grid, path);

  OffsetEstimator est;
  est.grid = spec.grid;
  est.basis.d = spec.dims.d;
  est.basis.M = spec.M();
  if (doc.at("basis").at("d").get<int>() != est.basis.d ||
      doc.at("basis").at("M").get<int>() != est.basis.M) {
    throw IoError(path + ": basis dimensions do not match the model");
  }
  est.sys = assemble_offset_system(spec, mf);
  if (doc.at("dim").get<int>() != est.sys.dim) {
    throw IoError(path + ": stacked offset dimension does not match");
  }
  for (int k = 0; k < spec.K(); ++k) {
    est.rk_inv_bkT.push_back(spec.minor_costs[k].R.inverse() *
                             mf.minors[k].B.transpose());
    est.Bk.push_back(spec.minors[k].B);
    est.bk.push_back(spec.minors[k].b);
  }
  est.drift = spec.common.drift;
  est.slice0_target_sd = doc.value("slice0_target_sd", 0.0);

  est.active = doc.at("active").get<std::vector<std::vector<int>>>();
  if (static_cast<int>(est.active.size()) != spec.grid.steps) {
    throw IoError(path + ": active set count does not match the grid");
  }
  const json& coef = doc.at("coef");
  if (static_cast<int>(coef.size()) != spec.grid.steps) {
    throw IoError(path + ": coefficient count does not match the grid");
  }
  est.coef.resize(spec.grid.steps);
  for (int j = 0; j < spec.grid.steps; ++j) {
    est.coef[j] =
        matrix_from_json(coef[j], static_cast<int>(est.active[j].size()),
                         est.sys.dim, "coef node " + std::to_string(j));
    for (const int c : est.active[j]) {
      if (c < 0 || c >= est.basis.size()) {
        throw IoError(path + ": active feature index out of range");
      }
    }
  }
  return est;
}

void save_manifest(const std::string& path, const RunManifest& man) {
  json doc;
  doc["format"] = "mfglab-manifest";
  doc["version"] = 1;
  doc["model"] = man.model_path;
  doc["seed"] = man.seed;
  doc["workers"] = man.workers;
  doc["consistency"] = {{"tolerance", man.consistency_tol},
                        {"damping", man.consistency_damping},
                        {"max_iterations", man.max_iterations}};
  doc["paths"] = {{"offsets", man.offset_paths},
                  {"simulation", man.sim_paths},
                  {"gap", man.gap_paths}};
  doc["gap_evaluations"] = man.gap_evaluations;
  doc["N_schedule"] = man.N_schedule;
  json stages = json::array();
  for (const StageRecord& s : man.stages) {
    stages.push_back({{"name", s.name},
                      {"ran", s.ran},
                      {"wall_seconds", s.wall_seconds},
                      {"detail", s.detail}});
  }
  doc["stages"] = stages;
  doc["artifacts"] = man.artifacts;
  write_document(path, doc);
}

RunManifest load_manifest(const std::string& path) {
  const json doc = load_document(path, "mfglab-manifest", 1);
  RunManifest man;
  man.model_path = doc.value("model", "");
  man.seed = doc.value("seed", std::uint64_t{0});
  man.workers = doc.value("workers", 0);
  const json& cons = doc.at("consistency");
  man.consistency_tol = cons.value("tolerance", 1e-10);
  man.consistency_damping = cons.value("damping", 0.5);
  man.max_iterations = cons.value("max_iterations", 100);
  const json& paths = doc.at("paths");
  man.offset_paths = paths.value("offsets", 0);
  man.sim_paths = paths.value("simulation", 0);
  man.gap_paths = paths.value("gap", 0);
  man.gap_evaluations = doc.value("gap_evaluations", 0);
  man.N_schedule = doc.value("N_schedule", std::vector<int>{});
  if (doc.contains("stages")) {
    for (const json& s : doc.at("stages")) {
      StageRecord rec;
      rec.name = s.value("name", "");
      rec.ran = s.value("ran", false);
      rec.wall_seconds = s.value("wall_seconds", 0.0);
      rec.detail = s.value("detail", "");
      man.stages.push_back(std::move(rec));
    }
  }
  man.artifacts = doc.value("artifacts", std::vector<std::string>{});
  return man;
}

}  // namespace mfglab
