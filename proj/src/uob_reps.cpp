#include "sfrl/uob_reps.hpp"

#include <cmath>

#include "sfrl/errors.hpp"

namespace sfrl {

double uob_reps_loss_estimator(double loss, double upper, double gamma, bool visited) {
  return visited ? loss / (upper + gamma) : 0.0;
}

double adaptive_rate(int horizon, int num_states, int num_actions, std::int64_t k, double delta) {
  const double sa = static_cast<double>(num_states) * num_actions;
  return std::sqrt(horizon * std::log(horizon * sa / delta) / (sa * static_cast<double>(k)));
}

UobReps::UobReps(ProjectionOptions options) : options_(options) {}

void UobReps::restart(const RestartConfig& config) {
  config_ = config;
  counts_ = TransitionCounts(config.shape);
  injected_.reset();
  active_set_ = {};
  q_hat_ = TripleOccupancy::uniform(config.shape);
  q_tilde_ = q_hat_;
  beta_.clear();
  policy_ = uniform_policy(config.shape);
  loss_hat_ = LossTable(config.shape);
  report_ = {};
  rate_ = 0.0;
  k_ = 0;
}

void UobReps::inject_confidence_set(TransitionConfidenceSet set) {
  if (!(set.shape() == config_.shape)) throw UsageError("injected confidence set does not match the learner's space");
  injected_ = std::move(set);
}

Policy UobReps::propose_policy(std::int64_t) {
  if (config_.shape.horizon == 0) throw UsageError("learner used before restart");
  ++k_;
  active_set_ = injected_ ? *injected_ : build_baseline_set(counts_, config_.horizon_episodes, config_.delta,
                                                            config_.aux_index);
  q_hat_ = project_onto_polytope(q_tilde_, active_set_, options_, &report_, &beta_);
  policy_ = policy_from_occupancy(q_hat_);
  return policy_;
}

void UobReps::observe(const Trajectory& o, std::int64_t) {
  if (k_ == 0) throw UsageError("observe called before any proposal");
  const LayerShape& shape = config_.shape;
  counts_.record(o);
  rate_ = adaptive_rate(shape.horizon, shape.inner_state_count(), shape.actions, k_, config_.delta);
  loss_hat_ = LossTable(shape);
  for (int h = 1; h <= shape.horizon; ++h) {
    const Step& step = o.steps[static_cast<std::size_t>(h - 1)];
    const double u = upper_occupancy(active_set_, policy_, h, step.state, step.action);
    loss_hat_(h, step.state, step.action) = uob_reps_loss_estimator(step.loss, u, rate_, true);
  }
  q_tilde_ = reweight(q_hat_, loss_hat_, rate_);
}

}  // namespace sfrl
