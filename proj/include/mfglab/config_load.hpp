#pragma once

#include <string>

#include "mfglab/model.hpp"

namespace mfglab {

// Parses a model description from JSON. Every matrix is written out with
// explicit rows so dimensions are visible in the file; dimension mismatches
// and unknown keys are rejected with the offending path in the message.
ModelSpec load_model(const std::string& path);
ModelSpec load_model_from_string(const std::string& text);

}  // namespace mfglab
