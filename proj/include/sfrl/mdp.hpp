#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "sfrl/rng.hpp"

namespace sfrl {

/// Per-layer state counts of a layered episodic MDP.
///
/// Layers are indexed 0..H+1. Layer 0 holds the start state s_0 and layer H+1
/// the terminal state, so `sizes.front() == sizes.back() == 1`. A state is
/// identified by its (layer, index-within-layer) pair.
struct LayerShape {
  int horizon = 0;
  int actions = 0;
  std::vector<int> sizes;

  static LayerShape make(int horizon, int actions, const std::vector<int>& inner_sizes);

  int layer_size(int h) const { return sizes[static_cast<std::size_t>(h)]; }
  /// Number of states in the loss-bearing layers 1..H.
  int inner_state_count() const;

  bool operator==(const LayerShape&) const = default;
};

/// Dense (layer, state, action) table over layers 0..H. Instantiated as
/// distinct types for policies, occupancy measures and loss tables.
template <class Tag>
class LayerTable {
 public:
  LayerTable() = default;
  explicit LayerTable(const LayerShape& shape, double fill = 0.0) : shape_(shape) {
    data_.reserve(static_cast<std::size_t>(shape.horizon) + 1);
    for (int h = 0; h <= shape.horizon; ++h)
      data_.emplace_back(static_cast<std::size_t>(shape.layer_size(h) * shape.actions), fill);
  }

  const LayerShape& shape() const { return shape_; }

  double& operator()(int h, int s, int a) { return data_[h][index(s, a)]; }
  double operator()(int h, int s, int a) const { return data_[h][index(s, a)]; }

  std::span<double> row(int h, int s) {
    return {data_[h].data() + index(s, 0), static_cast<std::size_t>(shape_.actions)};
  }
  std::span<const double> row(int h, int s) const {
    return {data_[h].data() + index(s, 0), static_cast<std::size_t>(shape_.actions)};
  }
  std::span<const double> layer(int h) const { return data_[h]; }

 private:
  std::size_t index(int s, int a) const { return static_cast<std::size_t>(s * shape_.actions + a); }

  LayerShape shape_;
  std::vector<std::vector<double>> data_;
};

using Policy = LayerTable<struct PolicyTag>;
using OccupancyMeasure = LayerTable<struct OccupancyTag>;
using LossTable = LayerTable<struct LossTag>;

Policy uniform_policy(const LayerShape& shape);
/// `actions[h][s]` is the action played with probability one.
Policy deterministic_policy(const LayerShape& shape, const std::vector<std::vector<int>>& actions);
/// Throws ConfigError unless every row is a probability vector within 1e-12.
void validate_policy(const Policy& policy);

/// q(s) = sum_a q(s,a).
double state_mass(const OccupancyMeasure& q, int h, int s);

/// Tabular layered MDP. Transition rows connect layer h to layer h+1 only; the
/// row for a layer-H state is the point mass on the terminal state.
class LayeredMdp {
 public:
  /// `transitions[h]` holds rows for h = 0..H-1 laid out as
  /// `[(s * A + a) * |S_{h+1}| + s']`. Rows within 1e-12 of summing to one are
  /// renormalized; anything else throws ConfigError.
  LayeredMdp(LayerShape shape, std::vector<std::vector<double>> transitions);

  const LayerShape& shape() const { return shape_; }
  int horizon() const { return shape_.horizon; }
  int num_actions() const { return shape_.actions; }
  int layer_size(int h) const { return shape_.layer_size(h); }

  /// Probability vector over S_{h+1}, h in 0..H.
  std::span<const double> row(int h, int s, int a) const;
  double prob(int h, int s, int a, int next) const { return row(h, s, a)[next]; }

 private:
  LayerShape shape_;
  std::vector<std::vector<double>> rows_;  // h = 0..H
};

/// Loss process: Bernoulli losses with fixed means, or an oblivious sequence
/// of deterministic loss tables. Layer 0 carries no loss.
class LossModel {
 public:
  enum class Kind { stochastic, adversarial };

  static LossModel stochastic(LossTable means);
  static LossModel adversarial(std::vector<LossTable> schedule);

  Kind kind() const { return kind_; }
  const LayerShape& shape() const { return tables_.front().shape(); }
  /// Number of episodes the model can serve.
  std::int64_t length() const;
  /// Expected loss table of episode t (1-based).
  const LossTable& expected(std::int64_t t) const;
  double realize(std::int64_t t, int h, int s, int a, Rng& rng) const;

 private:
  LossModel(Kind kind, std::vector<LossTable> tables);

  Kind kind_;
  std::vector<LossTable> tables_;
};

struct Step {
  int state = 0;
  int action = 0;
  double loss = 0.0;

  bool operator==(const Step&) const = default;
};

/// One episode: the action taken at s_0, then one (state, action, loss)
/// triple per loss-bearing layer; `steps[h - 1]` belongs to layer h.
struct Trajectory {
  int start_action = 0;
  std::vector<Step> steps;

  bool operator==(const Trajectory&) const = default;
};

/// Exact forward recursion for q^{P,pi}.
OccupancyMeasure compute_occupancy(const LayeredMdp& mdp, const Policy& policy);

/// <q, l>.
double expected_loss(const OccupancyMeasure& q, const LossTable& loss);

Trajectory sample_trajectory(const LayeredMdp& mdp, const Policy& policy, const LossModel& loss,
                             std::int64_t t, Rng& rng);

struct HindsightOptimum {
  Policy policy;
  double value = 0.0;
};

/// Deterministic policy minimizing <q^{P,pi}, summed_losses> by backward DP.
/// Ties go to the lowest action index.
HindsightOptimum best_in_hindsight(const LayeredMdp& mdp, const LossTable& summed_losses);

/// max over policies of q^{P,pi}(s) for every state, indexed [h][s] for
/// h = 0..H. The maximizing policy depends on the target, so each target gets
/// its own backward recursion.
std::vector<std::vector<double>> max_reach_probabilities(const LayeredMdp& mdp);

}  // namespace sfrl
