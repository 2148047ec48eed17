#pragma once

#include <vector>

#include "sfrl/mdp.hpp"

namespace sfrl {

// Dense visit and loss counters over a learner's own (local) state space.
// Layer-H pairs count visits into the terminal state.
class TransitionCounts {
 public:
  TransitionCounts() = default;
  explicit TransitionCounts(LayerShape shape);

  void record(const Trajectory& o);

  const LayerShape& shape() const { return shape_; }
  int pair(int h, int s, int a) const { return pairs_[h][pair_index(h, s, a)]; }
  int triple(int h, int s, int a, int next) const { return triples_[h][triple_index(h, s, a, next)]; }
  /// M(s'|s,a) / max(1, N(s,a)).
  double empirical(int h, int s, int a, int next) const;
  double mean_loss(int h, int s, int a) const;
  /// Successors observed at least once from (s,a), in first-seen order.
  const std::vector<int>& successors(int h, int s, int a) const { return successors_[h][pair_index(h, s, a)]; }

 private:
  std::size_t pair_index(int h, int s, int a) const {
    (void)h;
    return static_cast<std::size_t>(s * shape_.actions + a);
  }
  std::size_t triple_index(int h, int s, int a, int next) const {
    return pair_index(h, s, a) * static_cast<std::size_t>(shape_.layer_size(h + 1)) + static_cast<std::size_t>(next);
  }
  void bump(int h, int s, int a, int next, double loss);

  LayerShape shape_;
  std::vector<std::vector<int>> pairs_;
  std::vector<std::vector<int>> triples_;
  std::vector<std::vector<double>> loss_sums_;
  std::vector<std::vector<std::vector<int>>> successors_;
};

}  // namespace sfrl
