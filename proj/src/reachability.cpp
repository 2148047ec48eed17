#include "sfrl/reachability.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "sfrl/errors.hpp"

namespace sfrl {

namespace {

int count_before(const std::vector<std::int64_t>& episodes, std::int64_t t) {
  return static_cast<int>(std::lower_bound(episodes.begin(), episodes.end(), t) - episodes.begin());
}

}  // namespace

VisitStats::VisitStats(int horizon) : horizon_(horizon) {
  if (horizon < 1) throw ConfigError("horizon must be positive");
}

void VisitStats::touch_state(StateId s, std::int64_t t) {
  auto [it, inserted] = states_.try_emplace(state_key(s));
  StateRecord& rec = it->second;
  if (inserted) {
    rec.arrival = t;
    arrival_order_.push_back(s);
    arrival_episodes_.push_back(t);
    rec.arrival_index = static_cast<int>(arrival_order_.size());
  }
  rec.episodes.push_back(t);
}

void VisitStats::record_episode(const Trajectory& o, std::int64_t t) {
  if (t <= last_episode_)
    throw UsageError("episode " + std::to_string(t) + " recorded after episode " + std::to_string(last_episode_));
  if (static_cast<int>(o.steps.size()) != horizon_) throw UsageError("trajectory length does not match the horizon");
  last_episode_ = t;

  StateId prev{0, 0};
  int prev_action = o.start_action;
  touch_state(prev, t);
  for (int h = 1; h <= horizon_; ++h) {
    const Step& step = o.steps[static_cast<std::size_t>(h - 1)];
    const StateId cur{h, step.state};
    touch_state(cur, t);
    pairs_[pair_key(prev, prev_action)].push_back(t);
    triples_[{pair_key(prev, prev_action), step.state}].push_back(t);
    prev = cur;
    prev_action = step.action;
  }
  pairs_[pair_key(prev, prev_action)].push_back(t);
}

int VisitStats::visits(StateId s) const {
  auto it = states_.find(state_key(s));
  return it == states_.end() ? 0 : static_cast<int>(it->second.episodes.size());
}

int VisitStats::visits_through(StateId s, std::int64_t t) const {
  auto it = states_.find(state_key(s));
  return it == states_.end() ? 0 : count_before(it->second.episodes, t + 1);
}

std::optional<std::int64_t> VisitStats::arrival_episode(StateId s) const {
  auto it = states_.find(state_key(s));
  if (it == states_.end()) return std::nullopt;
  return it->second.arrival;
}

std::optional<int> VisitStats::arrival_index(StateId s) const {
  auto it = states_.find(state_key(s));
  if (it == states_.end()) return std::nullopt;
  return it->second.arrival_index;
}

int VisitStats::visited_before(std::int64_t t) const { return count_before(arrival_episodes_, t); }

int VisitStats::pair_count_before(StateId s, int a, std::int64_t t) const {
  auto it = pairs_.find(pair_key(s, a));
  return it == pairs_.end() ? 0 : count_before(it->second, t);
}

int VisitStats::triple_count_before(StateId s, int a, int next, std::int64_t t) const {
  auto it = triples_.find({pair_key(s, a), next});
  return it == triples_.end() ? 0 : count_before(it->second, t);
}

double admission_margin(int visits, std::int64_t t, const AdmissionRule& rule) {
  const double td = static_cast<double>(t);
  const double H = rule.horizon;
  return visits / 2.0 - std::log(2.0 * H * H * td * td / rule.delta) / 2.0 - rule.offset - rule.eps * td;
}

bool admission_test(const VisitStats& stats, StateId s, std::int64_t t, const AdmissionRule& rule) {
  return admission_margin(stats.visits_through(s, t), t, rule) > 0.0;
}

SequenceDraw bernoulli_sequence(double p) {
  return [p](Rng& rng, std::int64_t) { return std::pair{rng.bernoulli(p) ? 1.0 : 0.0, p}; };
}

std::vector<Lemma8Rates> lemma8_monte_carlo(const SequenceDraw& draw, const std::vector<double>& deltas,
                                            std::int64_t length, int trials, std::uint64_t seed) {
  // A violation at level delta happens iff the running maximum of the
  // deviation process exceeds ln(1/delta), so one pass serves every delta.
  std::vector<int> upper(deltas.size(), 0);
  std::vector<int> lower(deltas.size(), 0);
  Rng rng(seed);
  for (int trial = 0; trial < trials; ++trial) {
    double up = 0.0, down = 0.0;
    double max_up = -std::numeric_limits<double>::infinity();
    double max_down = max_up;
    for (std::int64_t j = 1; j <= length; ++j) {
      const auto [x, p] = draw(rng, j);
      up += x - 2.0 * p;
      down += p - 2.0 * x;
      max_up = std::max(max_up, up);
      max_down = std::max(max_down, down);
    }
    for (std::size_t d = 0; d < deltas.size(); ++d) {
      const double level = std::log(1.0 / deltas[d]);
      if (max_up > level) ++upper[d];
      if (max_down > level) ++lower[d];
    }
  }
  std::vector<Lemma8Rates> out;
  for (std::size_t d = 0; d < deltas.size(); ++d)
    out.push_back({deltas[d], static_cast<double>(upper[d]) / trials, static_cast<double>(lower[d]) / trials, trials});
  return out;
}

}  // namespace sfrl
