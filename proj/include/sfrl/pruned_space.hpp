#pragma once

#include <compare>
#include <span>
#include <vector>

#include "sfrl/mdp.hpp"

namespace sfrl {

/// A state of the full MDP, identified by layer and index within the layer.
struct StateId {
  int layer = 0;
  int index = 0;

  auto operator<=>(const StateId&) const = default;
};

/// The pruned state space: admitted real states plus one absorbing auxiliary
/// state per loss-bearing layer.
///
/// The learner sees the space through local indices. In layer h (1..H) the
/// admitted real states occupy local indices 0..k_h-1 in increasing real
/// index, and the auxiliary state is local index k_h. The start state is
/// always present as local state 0 of layer 0. The auxiliary action is
/// action 0.
class PrunedSpace {
 public:
  static constexpr int kAuxAction = 0;

  PrunedSpace(int horizon, int actions);

  int horizon() const { return horizon_; }
  int num_actions() const { return actions_; }
  /// Incremented by every `admit` call that adds at least one state.
  int version() const { return version_; }

  bool is_admitted(StateId s) const;
  /// Returns the number of newly admitted states.
  int admit(std::span<const StateId> states);

  /// |S^bot|: admitted real states plus the H auxiliary states.
  int size() const;
  int admitted_count() const { return size() - horizon_; }
  std::span<const int> admitted(int h) const { return admitted_[static_cast<std::size_t>(h)]; }

  int aux_index(int h) const { return static_cast<int>(admitted_[static_cast<std::size_t>(h)].size()); }
  bool is_aux(int h, int local) const { return h >= 1 && h <= horizon_ && local == aux_index(h); }
  /// Local index of an admitted state, -1 otherwise.
  int to_local(StateId s) const;
  /// Real index of a local state, -1 for the auxiliary state.
  int to_real(int h, int local) const;

  /// Layer shape of the pruned MDP as seen by the learner.
  LayerShape shape() const;

 private:
  int horizon_;
  int actions_;
  int version_ = 0;
  std::vector<std::vector<int>> admitted_;  // layers 0..H+1, sorted
};

/// Materializes P^bot as a layered MDP over the pruned space:
/// admitted-to-admitted entries copy P, the auxiliary column takes the
/// remaining mass and auxiliary rows are absorbing.
LayeredMdp build_pruned_transition(const LayeredMdp& mdp, const PrunedSpace& space);

/// Rewrites an episode of the full MDP into local pruned indices. Steps after
/// the first non-admitted state become (aux state, aux action, 0).
Trajectory prune_trajectory(const Trajectory& o, const PrunedSpace& space);

/// Extends a pruned policy to the full space; non-admitted states play action 0.
Policy extend_policy(const Policy& pruned_policy, const PrunedSpace& space, const LayerShape& full_shape);

/// Restriction of a full-space policy to the pruned space; auxiliary states
/// play the auxiliary action.
Policy restrict_policy(const Policy& policy, const PrunedSpace& space);

/// l^bot: copies admitted entries, zero on auxiliary states.
LossTable pruned_loss(const LossTable& loss, const PrunedSpace& space);

}  // namespace sfrl
