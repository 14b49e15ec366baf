#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace mfglab {

// Splittable stream seeding: every (path, stream) pair gets its own engine
// whose seed is a SplitMix64 hash of (master, path, stream). Streams are
// stable under any thread assignment, which keeps Monte Carlo output
// byte-identical for a fixed master seed regardless of worker count.

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t stream_seed(std::uint64_t master, std::uint64_t path,
                                 std::uint64_t stream) {
  std::uint64_t s = splitmix64(master ^ 0x243f6a8885a308d3ULL);
  s = splitmix64(s ^ splitmix64(path * 0x9e3779b97f4a7c15ULL + 1));
  s = splitmix64(s ^ splitmix64(stream * 0xd1b54a32d192ed03ULL + 2));
  return s;
}

// Well-known stream slots within one path.
namespace streams {
constexpr std::uint64_t kChain = 0;
constexpr std::uint64_t kLatentWiener = 1;
constexpr std::uint64_t kMajorAgent = 2;
constexpr std::uint64_t kTypeAssign = 3;
constexpr std::uint64_t kAux = 4;
constexpr std::uint64_t kMinorAgentBase = 16;  // agent i -> kMinorAgentBase + i
}  // namespace streams

// Deterministic draws built on mt19937_64 with an explicit Box-Muller
// transform; avoids std::normal_distribution whose algorithm is
// implementation-defined.
class RngStream {
 public:
  RngStream(std::uint64_t master, std::uint64_t path, std::uint64_t stream)
      : eng_(stream_seed(master, path, stream)) {}

  // Uniform on (0, 1]; 53-bit resolution.
  double uniform() {
    const std::uint64_t bits = eng_() >> 11;
    return (static_cast<double>(bits) + 1.0) * 0x1.0p-53;
  }

  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    const double u1 = uniform();
    const double u2 = uniform();
    const double rad = std::sqrt(-2.0 * std::log(u1));
    const double ang = 2.0 * M_PI * u2;
    spare_ = rad * std::sin(ang);
    have_spare_ = true;
    return rad * std::cos(ang);
  }

  double exponential(double rate) { return -std::log(uniform()) / rate; }

  // Index into a discrete distribution given by nonnegative weights
  // summing to ~1 (last bucket absorbs rounding).
  template <class Vec>
  int categorical(const Vec& probs) {
    const double u = uniform();
    double acc = 0.0;
    const int last = static_cast<int>(probs.size()) - 1;
    for (int j = 0; j < last; ++j) {
      acc += probs[j];
      if (u <= acc) return j;
    }
    return last;
  }

 private:
  std::mt19937_64 eng_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace mfglab
