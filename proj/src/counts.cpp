#include "sfrl/counts.hpp"

#include <algorithm>

#include "sfrl/errors.hpp"

namespace sfrl {

TransitionCounts::TransitionCounts(LayerShape shape) : shape_(std::move(shape)) {
  const int H = shape_.horizon;
  for (int h = 0; h <= H; ++h) {
    const std::size_t n_pairs = static_cast<std::size_t>(shape_.layer_size(h) * shape_.actions);
    pairs_.emplace_back(n_pairs, 0);
    triples_.emplace_back(n_pairs * static_cast<std::size_t>(shape_.layer_size(h + 1)), 0);
    loss_sums_.emplace_back(n_pairs, 0.0);
    successors_.emplace_back(n_pairs);
  }
}

void TransitionCounts::bump(int h, int s, int a, int next, double loss) {
  const std::size_t p = pair_index(h, s, a);
  ++pairs_[h][p];
  loss_sums_[h][p] += loss;
  int& m = triples_[h][triple_index(h, s, a, next)];
  if (m++ == 0) successors_[h][p].push_back(next);
}

void TransitionCounts::record(const Trajectory& o) {
  const int H = shape_.horizon;
  if (static_cast<int>(o.steps.size()) != H) throw UsageError("trajectory length does not match the horizon");
  bump(0, 0, o.start_action, o.steps.front().state, 0.0);
  for (int h = 1; h <= H; ++h) {
    const Step& step = o.steps[static_cast<std::size_t>(h - 1)];
    const int next = h < H ? o.steps[static_cast<std::size_t>(h)].state : 0;
    bump(h, step.state, step.action, next, step.loss);
  }
}

double TransitionCounts::empirical(int h, int s, int a, int next) const {
  return static_cast<double>(triple(h, s, a, next)) / std::max(1, pair(h, s, a));
}

double TransitionCounts::mean_loss(int h, int s, int a) const {
  const int n = pair(h, s, a);
  return n == 0 ? 0.0 : loss_sums_[h][pair_index(h, s, a)] / n;
}

}  // namespace sfrl
