#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "sfrl/confidence.hpp"
#include "sfrl/learner.hpp"
#include "sfrl/mdp.hpp"
#include "sfrl/pruned_space.hpp"
#include "sfrl/reachability.hpp"
#include "sfrl/rng.hpp"

namespace sfrl {

enum class InjectionMode { off, improved };

struct SfRlConfig {
  double delta = 0.1;
  double eps = 0.0;
  std::int64_t episodes = 0;
  InjectionMode injection = InjectionMode::off;
  /// Additive constant of the admission threshold.
  double admission_offset = 0.5;
  /// Start the improved-set statistics afresh at every restart instead of
  /// keeping everything seen since episode 1.
  bool reset_confidence_on_restart = false;
  /// Check every epoch whether the improved set contains the true pruned
  /// transition (needs the ground-truth MDP, which the driver has anyway).
  bool monitor_coverage = false;
  /// Keep every trajectory handed to the learner.
  bool audit = false;
  /// Episodes at which regret is evaluated; empty means powers of two and T.
  std::vector<std::int64_t> checkpoints;

  /// Throws ConfigError on delta outside (0,1), negative eps or negative T.
  void validate() const;
};

struct EpisodeRecord {
  std::int64_t episode = 0;
  double realized_loss = 0.0;
  /// <q^{P,pi_t}, expected loss of episode t>.
  double expected_loss = 0.0;
  /// Realized loss of the trajectory as the learner saw it.
  double pruned_loss = 0.0;
  int pruned_size = 0;
  int restarts = 0;
};

struct AdmissionEvent {
  std::int64_t episode = 0;
  StateId state;
  int visits = 0;
};

struct RestartEvent {
  std::int64_t episode = 0;
  double delta = 0.0;
  int pruned_size = 0;
};

struct Checkpoint {
  std::int64_t episode = 0;
  double cum_realized_loss = 0.0;
  double cum_expected_loss = 0.0;
  /// Best fixed policy's expected loss over episodes 1..episode.
  double comparator = 0.0;
  double expected_regret = 0.0;
  double realized_regret = 0.0;
  int pruned_size = 0;
  int restarts = 0;
};

struct FedTrajectory {
  std::int64_t episode = 0;
  LayerShape shape;
  Trajectory trajectory;
};

struct RunLog {
  std::string learner;
  SfRlConfig config;
  std::uint64_t seed = 0;
  std::vector<EpisodeRecord> episodes;
  std::vector<AdmissionEvent> admissions;
  std::vector<RestartEvent> restarts;
  std::vector<Checkpoint> checkpoints;
  std::vector<FedTrajectory> fed;
  /// Confidence of the first learner instance.
  double initial_delta = 0.0;
  std::int64_t coverage_checks = 0;
  std::int64_t coverage_failures = 0;
  std::int64_t first_coverage_failure = 0;  // 0 when there was none
  std::int64_t empty_intersections = 0;
  std::int64_t repaired_rows = 0;

  double final_expected_regret() const { return checkpoints.empty() ? 0.0 : checkpoints.back().expected_regret; }
  double final_realized_regret() const { return checkpoints.empty() ? 0.0 : checkpoints.back().realized_regret; }
};

/// Powers of two up to T, then T itself.
std::vector<std::int64_t> dyadic_checkpoints(std::int64_t T);

/// Fills `log.checkpoints` from the per-episode records against the best
/// fixed policy in hindsight on the true MDP.
void compute_regret(RunLog& log, const LayeredMdp& mdp, const LossModel& loss);

/// The state-free reduction. The driver owns the pruned space and visit
/// statistics; the learner only ever sees local indices of the pruned space.
class SfRlDriver {
 public:
  SfRlDriver(SfRlConfig config, const LayeredMdp& mdp, const LossModel& loss, Learner& learner,
             std::uint64_t seed);

  std::int64_t next_episode() const { return t_ + 1; }
  /// One loop iteration for episode next_episode().
  void run_episode();
  /// Runs the remaining episodes and computes the regret checkpoints.
  RunLog run();

  const PrunedSpace& space() const { return space_; }
  const VisitStats& stats() const { return stats_; }
  const RunLog& log() const { return log_; }
  /// Learner confidence after the most recent restart.
  double learner_delta() const { return learner_delta_; }

 private:
  void restart_learner();
  TransitionConfidenceSet improved_set(std::int64_t t) const;

  SfRlConfig config_;
  const LayeredMdp& mdp_;
  const LossModel& loss_;
  Learner& learner_;
  Rng rng_;
  PrunedSpace space_;
  VisitStats stats_;
  std::unique_ptr<VisitStats> confidence_stats_;  // only with reset_confidence_on_restart
  AdmissionRule rule_;
  RunLog log_;
  std::int64_t t_ = 0;
  double learner_delta_ = 0.0;
};

/// Convenience wrapper around SfRlDriver.
RunLog run_sf_rl(const SfRlConfig& config, const LayeredMdp& mdp, const LossModel& loss, Learner& learner,
                 std::uint64_t seed);

/// The learner on the full state space with no reduction, for baselines.
RunLog run_direct(const SfRlConfig& config, const LayeredMdp& mdp, const LossModel& loss, Learner& learner,
                  std::uint64_t seed);

}  // namespace sfrl
