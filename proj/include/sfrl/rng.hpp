#pragma once

#include <cstdint>
#include <random>
#include <span>

namespace sfrl {

// Seeded generator with a platform-independent uniform draw. Every sampling
// primitive consumes exactly one 64-bit word, so two runs that differ only in
// zero-mass entries of their distributions see identical streams.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  bool bernoulli(double p) { return uniform() < p; }

  // Inverse-CDF walk. Falls back to the last positive entry when rounding
  // leaves the cumulative sum slightly below the draw.
  int categorical(std::span<const double> probs) {
    const double u = uniform();
    double cum = 0.0;
    int last_positive = 0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
      if (probs[i] <= 0.0) continue;
      cum += probs[i];
      last_positive = static_cast<int>(i);
      if (u < cum) return last_positive;
    }
    return last_positive;
  }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
};

}  // namespace sfrl
