#pragma once

#include <limits>

#include "mfglab/model.hpp"
#include "mfglab/rng.hpp"

namespace mfglab {

// Exact exponential-clock sampler for the latent chain. Jumps are drawn in
// continuous time; grid code queries the state after advancing past each
// node, so node values carry the exact marginal law.
class ChainSampler {
 public:
  ChainSampler(const LatentChainSpec& chain, RngStream& rng)
      : chain_(&chain), exit_(chain.exit_rates()) {
    state_ = rng.categorical(chain.initial_dist);
    schedule(0.0, rng);
  }

  int state() const { return state_; }

  // Applies every jump with time <= t.
  void advance_to(double t, RngStream& rng) {
    while (next_jump_ <= t) {
      const double at = next_jump_;
      VectorXd w = chain_->rates.row(state_).transpose();
      w[state_] = 0.0;
      const double tot = w.sum();
      if (tot <= 0.0) {
        next_jump_ = std::numeric_limits<double>::infinity();
        return;
      }
      w /= tot;
      state_ = rng.categorical(w);
      schedule(at, rng);
    }
  }

 private:
  void schedule(double now, RngStream& rng) {
    next_jump_ = exit_[state_] > 0
                     ? now + rng.exponential(exit_[state_])
                     : std::numeric_limits<double>::infinity();
  }

  const LatentChainSpec* chain_;
  VectorXd exit_;
  int state_ = 0;
  double next_jump_ = 0.0;
};

}  // namespace mfglab
