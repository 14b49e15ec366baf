#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mfglab/meanfield.hpp"
#include "mfglab/model.hpp"
#include "mfglab/offset.hpp"

namespace mfglab {

// Versioned JSON files so every pipeline stage can be re-run in isolation.
// Loading validates dimensions and grid against the model and rebuilds the
// derived objects (extended systems, offset coefficient assembly).

void save_gains(const std::string& path, const MeanFieldGains& mf);
MeanFieldGains load_gains(const std::string& path, const ModelSpec& spec);

void save_offsets(const std::string& path, const OffsetEstimator& est,
                  int training_paths);
OffsetEstimator load_offsets(const std::string& path, const ModelSpec& spec,
                             const MeanFieldGains& mf);

struct StageRecord {
  std::string name;
  bool ran = false;
  double wall_seconds = 0.0;
  std::string detail;
};

struct RunManifest {
  std::string model_path;
  std::uint64_t seed = 0;
  int workers = 0;
  double consistency_tol = 1e-10;
  double consistency_damping = 0.5;
  int max_iterations = 100;
  int offset_paths = 0;
  int sim_paths = 0;
  int gap_paths = 0;
  int gap_evaluations = 0;
  std::vector<int> N_schedule;
  std::vector<StageRecord> stages;
  std::vector<std::string> artifacts;
};

void save_manifest(const std::string& path, const RunManifest& man);
RunManifest load_manifest(const std::string& path);

}  // namespace mfglab
