#pragma once

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "sfrl/counts.hpp"
#include "sfrl/learner.hpp"
#include "sfrl/occupancy_polytope.hpp"

namespace sfrl {

/// loss / (u + gamma) when the pair was visited this episode, else 0.
double uob_reps_loss_estimator(double loss, double upper, double gamma, bool visited);

/// eta_k = gamma_k = sqrt(H ln(H |S| |A| / delta) / (|S| |A| k)).
double adaptive_rate(int horizon, int num_states, int num_actions, std::int64_t k, double delta);

/// Occupancy-measure mirror descent over (s,a,s') triples with implicit
/// exploration and upper occupancy bounds. The iterate is projected lazily:
/// `observe` applies the multiplicative step and `propose_policy` projects
/// onto the transition set active for that epoch.
class UobReps final : public Learner {
 public:
  explicit UobReps(ProjectionOptions options = {});

  std::string name() const override { return "uob-reps"; }
  void restart(const RestartConfig& config) override;
  Policy propose_policy(std::int64_t t) override;
  void observe(const Trajectory& o, std::int64_t t) override;
  bool accepts_confidence_set() const override { return true; }
  void inject_confidence_set(TransitionConfidenceSet set) override;
  const LayerShape& shape() const override { return config_.shape; }

  /// Epochs proposed since the last restart.
  std::int64_t local_epoch() const { return k_; }
  const TripleOccupancy& iterate() const { return q_hat_; }
  const TransitionConfidenceSet& active_set() const { return active_set_; }
  const Policy& policy() const { return policy_; }
  /// Estimator of the last observed episode.
  const LossTable& last_estimate() const { return loss_hat_; }
  double last_rate() const { return rate_; }
  const ProjectionReport& last_projection() const { return report_; }

 private:
  ProjectionOptions options_;
  RestartConfig config_;
  TransitionCounts counts_;
  std::optional<TransitionConfidenceSet> injected_;
  TransitionConfidenceSet active_set_;
  TripleOccupancy q_hat_;
  TripleOccupancy q_tilde_;
  std::vector<double> beta_;
  Policy policy_;
  LossTable loss_hat_;
  ProjectionReport report_;
  double rate_ = 0.0;
  std::int64_t k_ = 0;
};

}  // namespace sfrl
