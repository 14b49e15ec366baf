#pragma once

#include <stdexcept>
#include <string>

namespace mfglab {

// Error taxonomy shared by all modules. The CLI maps each family to a
// distinct process exit code, so keep the hierarchy flat and explicit.

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Model loading / validation
struct ConfigError : Error {
  using Error::Error;
};
struct DimensionMismatch : ConfigError {
  using ConfigError::ConfigError;
};
struct ConvexityViolation : ConfigError {
  using ConfigError::ConfigError;
};
struct GridMismatch : ConfigError {
  using ConfigError::ConfigError;
};

// Filtering
struct SingularSigma : Error {
  using Error::Error;
};
struct DegenerateFilter : Error {
  using Error::Error;
};

// Riccati integration
struct BlowUp : Error {
  using Error::Error;
};

// Consistency fixed point
struct NoConvergence : Error {
  using Error::Error;
};
struct DivergenceDetected : Error {
  using Error::Error;
};

// Offset regression
struct RankDeficientRegression : Error {
  using Error::Error;
};
struct PathBudgetTooSmall : Error {
  using Error::Error;
};
struct OffGrid : Error {
  using Error::Error;
};

// Simulation
struct UnstableTrajectory : Error {
  using Error::Error;
};

// IO
struct IoError : Error {
  using Error::Error;
};

}  // namespace mfglab
