#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <unordered_map>
#include <utility>
#include <vector>

#include "sfrl/pruned_space.hpp"
#include "sfrl/rng.hpp"

namespace sfrl {

/// Exact visit counters over real states, grown on first contact.
///
/// State counts n_t(s) include the episode being recorded. Pair and triple
/// counts are exposed "before epoch t" (episodes 1..t-1), which is what the
/// confidence sets consume; any earlier epoch can be queried, so snapshots
/// N_{t'} and M_{t'} need no separate bookkeeping. The start state is tracked
/// like any other state and always has arrival index 1.
class VisitStats {
 public:
  explicit VisitStats(int horizon);

  /// Episodes must arrive with strictly increasing t, else UsageError.
  void record_episode(const Trajectory& o, std::int64_t t);
  std::int64_t last_episode() const { return last_episode_; }
  int horizon() const { return horizon_; }

  /// Episodes 1..last_episode() in which s was visited.
  int visits(StateId s) const;
  /// Episodes 1..t in which s was visited.
  int visits_through(StateId s, std::int64_t t) const;
  std::optional<std::int64_t> arrival_episode(StateId s) const;
  std::optional<int> arrival_index(StateId s) const;

  /// States in arrival order (ties: layer, then index).
  const std::vector<StateId>& visited_states() const { return arrival_order_; }
  /// |S^Pi_t|: distinct states first visited strictly before episode t.
  int visited_before(std::int64_t t) const;

  /// N_t(s,a).
  int pair_count_before(StateId s, int a, std::int64_t t) const;
  /// M_t(s'|s,a) where s' lies in the layer after s.
  int triple_count_before(StateId s, int a, int next, std::int64_t t) const;

 private:
  struct StateRecord {
    std::vector<std::int64_t> episodes;
    std::int64_t arrival = 0;
    int arrival_index = 0;
  };
  static std::uint64_t state_key(StateId s) {
    return (static_cast<std::uint64_t>(s.layer) << 40) | static_cast<std::uint64_t>(s.index);
  }
  static std::uint64_t pair_key(StateId s, int a) { return (state_key(s) << 12) | static_cast<std::uint64_t>(a); }
  struct TripleKeyHash {
    std::size_t operator()(const std::pair<std::uint64_t, int>& k) const {
      return std::hash<std::uint64_t>{}(k.first * 0x9E3779B97F4A7C15ull ^ static_cast<std::uint64_t>(k.second));
    }
  };

  void touch_state(StateId s, std::int64_t t);

  int horizon_;
  std::int64_t last_episode_ = 0;
  std::unordered_map<std::uint64_t, StateRecord> states_;
  std::unordered_map<std::uint64_t, std::vector<std::int64_t>> pairs_;
  std::unordered_map<std::pair<std::uint64_t, int>, std::vector<std::int64_t>, TripleKeyHash> triples_;
  std::vector<StateId> arrival_order_;
  std::vector<std::int64_t> arrival_episodes_;  // parallel to arrival_order_
};

/// Parameters of the admission threshold
/// n_t(s)/2 - ln(2 H^2 t^2 / delta)/2 - offset > eps * t.
struct AdmissionRule {
  double delta = 0.1;
  double eps = 0.0;
  int horizon = 1;
  double offset = 0.5;
};

/// Left-hand side minus right-hand side of the admission threshold.
double admission_margin(int visits, std::int64_t t, const AdmissionRule& rule);
bool admission_test(const VisitStats& stats, StateId s, std::int64_t t, const AdmissionRule& rule);

/// One draw of a bounded adapted sequence: the realized X_j in [0,1] and its
/// conditional mean P_j.
using SequenceDraw = std::function<std::pair<double, double>(Rng&, std::int64_t)>;
SequenceDraw bernoulli_sequence(double p);

struct Lemma8Rates {
  double delta = 0.0;
  double upper_rate = 0.0;  // exists n: sum X > 2 sum P + ln(1/delta)
  double lower_rate = 0.0;  // exists n: sum P > 2 sum X + ln(1/delta)
  int trials = 0;
};

/// Empirical violation frequencies of the two one-sided anytime bounds over
/// `trials` independent sequences of length `length`.
std::vector<Lemma8Rates> lemma8_monte_carlo(const SequenceDraw& draw, const std::vector<double>& deltas,
                                            std::int64_t length, int trials, std::uint64_t seed);

}  // namespace sfrl
