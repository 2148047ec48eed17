#include "sfrl/sf_rl.hpp"

#include <algorithm>
#include <string>

#include "sfrl/errors.hpp"

namespace sfrl {

void SfRlConfig::validate() const {
  if (!(delta > 0.0 && delta < 1.0)) throw ConfigError("delta must lie in (0,1)");
  if (!(eps >= 0.0)) throw ConfigError("eps must be nonnegative");
  if (episodes < 0) throw ConfigError("episode budget must be nonnegative");
}

std::vector<std::int64_t> dyadic_checkpoints(std::int64_t T) {
  std::vector<std::int64_t> out;
  for (std::int64_t k = 1; k <= T; k *= 2) out.push_back(k);
  if (T > 0 && out.back() != T) out.push_back(T);
  return out;
}

namespace {

void add_into(LossTable& sum, const LossTable& x) {
  const LayerShape& shape = sum.shape();
  for (int h = 0; h <= shape.horizon; ++h)
    for (int s = 0; s < shape.layer_size(h); ++s)
      for (int a = 0; a < shape.actions; ++a) sum(h, s, a) += x(h, s, a);
}

double total_loss(const Trajectory& o) {
  double total = 0.0;
  for (const Step& step : o.steps) total += step.loss;
  return total;
}

std::vector<int> aux_vector(const PrunedSpace& space) {
  std::vector<int> aux(static_cast<std::size_t>(space.horizon()) + 2, -1);
  for (int h = 1; h <= space.horizon(); ++h) aux[static_cast<std::size_t>(h)] = space.aux_index(h);
  return aux;
}

// Re-throws with the episode prepended, keeping the exception type.
template <class F>
void with_episode_context(std::int64_t t, F&& body) {
  const std::string where = "episode " + std::to_string(t) + ": ";
  try {
    body();
  } catch (const NumericalError& e) {
    throw NumericalError(where + e.what());
  } catch (const ConfidenceSetError& e) {
    throw ConfidenceSetError(where + e.what());
  } catch (const UsageError& e) {
    throw UsageError(where + e.what());
  } catch (const ConfigError& e) {
    throw ConfigError(where + e.what());
  }
}

}  // namespace

void compute_regret(RunLog& log, const LayeredMdp& mdp, const LossModel& loss) {
  const std::int64_t T = static_cast<std::int64_t>(log.episodes.size());
  std::vector<std::int64_t> marks = log.config.checkpoints.empty() ? dyadic_checkpoints(T) : log.config.checkpoints;
  std::sort(marks.begin(), marks.end());
  marks.erase(std::unique(marks.begin(), marks.end()), marks.end());
  marks.erase(std::remove_if(marks.begin(), marks.end(), [&](std::int64_t k) { return k < 1 || k > T; }),
              marks.end());
  log.checkpoints.clear();
  LossTable summed(mdp.shape());
  double realized = 0.0, expected = 0.0;
  std::size_t next = 0;
  for (std::int64_t t = 1; t <= T && next < marks.size(); ++t) {
    const EpisodeRecord& rec = log.episodes[static_cast<std::size_t>(t - 1)];
    realized += rec.realized_loss;
    expected += rec.expected_loss;
    add_into(summed, loss.expected(t));
    if (t != marks[next]) continue;
    ++next;
    Checkpoint c;
    c.episode = t;
    c.cum_realized_loss = realized;
    c.cum_expected_loss = expected;
    c.comparator = best_in_hindsight(mdp, summed).value;
    c.expected_regret = expected - c.comparator;
    c.realized_regret = realized - c.comparator;
    c.pruned_size = rec.pruned_size;
    c.restarts = rec.restarts;
    log.checkpoints.push_back(c);
  }
}

SfRlDriver::SfRlDriver(SfRlConfig config, const LayeredMdp& mdp, const LossModel& loss, Learner& learner,
                       std::uint64_t seed)
    : config_(std::move(config)),
      mdp_(mdp),
      loss_(loss),
      learner_(learner),
      rng_(seed),
      space_(mdp.horizon(), mdp.num_actions()),
      stats_(mdp.horizon()) {
  config_.validate();
  if (config_.injection == InjectionMode::improved && !learner_.accepts_confidence_set())
    throw ConfigError(learner_.name() + " cannot take injected confidence sets");
  if (config_.reset_confidence_on_restart) confidence_stats_ = std::make_unique<VisitStats>(mdp.horizon());
  rule_ = {config_.delta, config_.eps, mdp.horizon(), config_.admission_offset};
  log_.learner = learner_.name();
  log_.config = config_;
  log_.seed = seed;
  log_.episodes.reserve(static_cast<std::size_t>(config_.episodes));
  restart_learner();
  log_.initial_delta = learner_delta_;
}

void SfRlDriver::restart_learner() {
  const double size = space_.size();
  learner_delta_ = config_.delta / (2.0 * size * size);
  learner_.restart({space_.shape(), aux_vector(space_), learner_delta_, std::max<std::int64_t>(config_.episodes, 1)});
  if (confidence_stats_) confidence_stats_ = std::make_unique<VisitStats>(mdp_.horizon());
}

TransitionConfidenceSet SfRlDriver::improved_set(std::int64_t t) const {
  return build_improved_set(confidence_stats_ ? *confidence_stats_ : stats_, space_, t, config_.delta);
}

void SfRlDriver::run_episode() {
  const std::int64_t t = ++t_;
  with_episode_context(t, [&] {
    std::optional<TransitionConfidenceSet> improved;
    if (config_.injection == InjectionMode::improved || config_.monitor_coverage) {
      improved = improved_set(t);
      log_.empty_intersections += improved->empty_intersections;
      log_.repaired_rows += improved->repaired_rows;
    }
    if (config_.monitor_coverage) {
      ++log_.coverage_checks;
      if (!improved->contains(build_pruned_transition(mdp_, space_), 1e-12)) {
        ++log_.coverage_failures;
        if (log_.first_coverage_failure == 0) log_.first_coverage_failure = t;
      }
    }
    if (config_.injection == InjectionMode::improved) learner_.inject_confidence_set(std::move(*improved));

    const Policy pruned_policy = learner_.propose_policy(t);
    const Policy policy = extend_policy(pruned_policy, space_, mdp_.shape());
    const Trajectory o = sample_trajectory(mdp_, policy, loss_, t, rng_);
    stats_.record_episode(o, t);
    if (confidence_stats_) confidence_stats_->record_episode(o, t);

    EpisodeRecord rec;
    rec.episode = t;
    rec.realized_loss = total_loss(o);
    rec.expected_loss = expected_loss(compute_occupancy(mdp_, policy), loss_.expected(t));
    const Trajectory pruned = prune_trajectory(o, space_);
    rec.pruned_loss = total_loss(pruned);

    std::vector<StateId> fresh;
    for (int h = 1; h <= mdp_.horizon(); ++h) {
      const StateId s{h, o.steps[static_cast<std::size_t>(h - 1)].state};
      if (!space_.is_admitted(s) && admission_test(stats_, s, t, rule_)) fresh.push_back(s);
    }
    if (!fresh.empty()) {
      space_.admit(fresh);
      for (const StateId& s : fresh) log_.admissions.push_back({t, s, stats_.visits(s)});
      restart_learner();
      log_.restarts.push_back({t, learner_delta_, space_.size()});
    } else {
      learner_.observe(pruned, t);
      if (config_.audit) log_.fed.push_back({t, space_.shape(), pruned});
    }
    rec.pruned_size = space_.size();
    rec.restarts = static_cast<int>(log_.restarts.size());
    log_.episodes.push_back(rec);
  });
}

RunLog SfRlDriver::run() {
  while (t_ < config_.episodes) run_episode();
  compute_regret(log_, mdp_, loss_);
  return log_;
}

RunLog run_sf_rl(const SfRlConfig& config, const LayeredMdp& mdp, const LossModel& loss, Learner& learner,
                 std::uint64_t seed) {
  SfRlDriver driver(config, mdp, loss, learner, seed);
  return driver.run();
}

RunLog run_direct(const SfRlConfig& config, const LayeredMdp& mdp, const LossModel& loss, Learner& learner,
                  std::uint64_t seed) {
  config.validate();
  RunLog log;
  log.learner = learner.name();
  log.config = config;
  log.seed = seed;
  log.initial_delta = config.delta;
  Rng rng(seed);
  learner.restart({mdp.shape(), {}, config.delta, std::max<std::int64_t>(config.episodes, 1)});
  const int size = mdp.shape().inner_state_count();
  for (std::int64_t t = 1; t <= config.episodes; ++t) {
    with_episode_context(t, [&] {
      const Policy policy = learner.propose_policy(t);
      const Trajectory o = sample_trajectory(mdp, policy, loss, t, rng);
      EpisodeRecord rec;
      rec.episode = t;
      rec.realized_loss = total_loss(o);
      rec.expected_loss = expected_loss(compute_occupancy(mdp, policy), loss.expected(t));
      rec.pruned_loss = rec.realized_loss;
      rec.pruned_size = size;
      learner.observe(o, t);
      if (config.audit) log.fed.push_back({t, mdp.shape(), o});
      log.episodes.push_back(rec);
    });
  }
  compute_regret(log, mdp, loss);
  return log;
}

}  // namespace sfrl
