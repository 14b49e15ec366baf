#pragma once

#include <cmath>
#include <cstdint>

#include "mfglab/errors.hpp"

namespace mfglab {

// Uniform time grid on [0, T] with `steps` intervals (steps+1 nodes).
// Every module (Riccati, gains, offsets, simulation) shares one grid so
// trajectories can be exchanged by node index without interpolation.
struct TimeGrid {
  double T = 1.0;
  int steps = 1;

  double dt() const { return T / steps; }
  int nodes() const { return steps + 1; }
  double t(int i) const { return T * static_cast<double>(i) / steps; }

  bool operator==(const TimeGrid& other) const {
    return T == other.T && steps == other.steps;
  }

  // Maps a time to its grid node, rejecting off-grid queries.
  int index_of(double time, double tol = 1e-9) const {
    const double x = time / dt();
    const int i = static_cast<int>(std::lround(x));
    if (i < 0 || i > steps || std::abs(time - t(i)) > tol * std::max(1.0, T)) {
      throw OffGrid("time " + std::to_string(time) + " is not a grid node");
    }
    return i;
  }
};

inline void require_same_grid(const TimeGrid& a, const TimeGrid& b,
                              const char* what) {
  if (!(a == b)) {
    throw GridMismatch(std::string(what) + ": time grids differ");
  }
}

}  // namespace mfglab
