#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sfrl/confidence.hpp"
#include "sfrl/mdp.hpp"

namespace sfrl {

/// What a learner is (re)started on.
struct RestartConfig {
  LayerShape shape;
  /// Per layer 0..H+1: local index of the auxiliary state, or -1. Empty when
  /// the space has no auxiliary states.
  std::vector<int> aux_index;
  double delta = 0.1;
  /// Episode budget used inside logarithmic confidence terms.
  std::int64_t horizon_episodes = 1;
};

/// Episodic black-box learner. Epochs t are global; learners count their
/// own epochs since the last restart.
class Learner {
 public:
  virtual ~Learner() = default;

  virtual std::string name() const = 0;
  /// Clears all statistics and moves to a new state space.
  virtual void restart(const RestartConfig& config) = 0;
  virtual Policy propose_policy(std::int64_t t) = 0;
  /// Feedback for the policy most recently proposed.
  virtual void observe(const Trajectory& o, std::int64_t t) = 0;

  virtual bool accepts_confidence_set() const { return false; }
  /// Replaces the internally built transition set from the next proposal on.
  virtual void inject_confidence_set(TransitionConfidenceSet set);

  virtual const LayerShape& shape() const = 0;
};

}  // namespace sfrl
