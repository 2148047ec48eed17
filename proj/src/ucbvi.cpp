#include "sfrl/ucbvi.hpp"

#include <algorithm>
#include <cmath>

#include "sfrl/errors.hpp"

namespace sfrl {

double ucbvi_bonus_standard(int n, int num_states, int num_actions, std::int64_t T, double delta, int horizon,
                            double c) {
  if (n <= 0) return horizon;
  const double L = std::log(static_cast<double>(num_states) * num_actions * static_cast<double>(T) / delta);
  return std::min<double>(horizon, c * horizon * L / std::sqrt(static_cast<double>(n)));
}

double ucbvi_bonus_arrival(int n, int arrival_index, int num_actions, std::int64_t T, double delta, int horizon,
                           double c) {
  if (n <= 0) return horizon;
  const double i = arrival_index;
  const double L = std::log(2.0 * i * i * num_actions * static_cast<double>(T) / delta);
  return std::min<double>(horizon, c * horizon * L / std::sqrt(static_cast<double>(std::max(n - 1, 1))));
}

UcbviTables ucbvi_value_iteration(const TransitionCounts& counts, const LossTable& bonus) {
  const LayerShape& shape = counts.shape();
  const int H = shape.horizon;
  const int A = shape.actions;
  UcbviTables out{LossTable(shape), std::vector<std::vector<double>>(static_cast<std::size_t>(H) + 2),
                  Policy(shape)};
  out.v[static_cast<std::size_t>(H) + 1] = {0.0};
  for (int h = H; h >= 0; --h) {
    const auto& v_next = out.v[static_cast<std::size_t>(h) + 1];
    auto& v = out.v[static_cast<std::size_t>(h)];
    v.assign(static_cast<std::size_t>(shape.layer_size(h)), 0.0);
    for (int s = 0; s < shape.layer_size(h); ++s) {
      int best = 0;
      for (int a = 0; a < A; ++a) {
        double future = 0.0;
        for (int next : counts.successors(h, s, a))
          future += counts.empirical(h, s, a, next) * v_next[static_cast<std::size_t>(next)];
        const double q = std::max(0.0, counts.mean_loss(h, s, a) + future - bonus(h, s, a));
        out.q(h, s, a) = q;
        if (q < out.q(h, s, best)) best = a;
      }
      v[static_cast<std::size_t>(s)] = out.q(h, s, best);
      out.policy(h, s, best) = 1.0;
    }
  }
  return out;
}

Ucbvi::Ucbvi(UcbviBonus bonus, double c) : bonus_(bonus), c_(c) {}

std::string Ucbvi::name() const { return bonus_ == UcbviBonus::standard ? "ucbvi" : "ucbvi-arrival"; }

void Ucbvi::restart(const RestartConfig& config) {
  config_ = config;
  counts_ = TransitionCounts(config.shape);
  tables_ = {};
  arrival_.clear();
}

std::optional<int> Ucbvi::arrival_index(int h, int s) const {
  auto it = arrival_.find((static_cast<long long>(h) << 32) | s);
  if (it == arrival_.end()) return std::nullopt;
  return it->second;
}

void Ucbvi::note_arrival(int h, int s) {
  const int next = static_cast<int>(arrival_.size()) + 1;
  arrival_.try_emplace((static_cast<long long>(h) << 32) | s, next);
}

LossTable Ucbvi::bonus_table() const {
  const LayerShape& shape = config_.shape;
  const int H = shape.horizon;
  const int S = shape.inner_state_count();
  const std::int64_t T = config_.horizon_episodes;
  LossTable b(shape);
  for (int h = 0; h <= H; ++h)
    for (int s = 0; s < shape.layer_size(h); ++s) {
      const auto i = arrival_index(h, s);
      for (int a = 0; a < shape.actions; ++a) {
        const int n = counts_.pair(h, s, a);
        if (bonus_ == UcbviBonus::standard)
          b(h, s, a) = ucbvi_bonus_standard(n, S, shape.actions, T, config_.delta, H, c_);
        else
          b(h, s, a) = i ? ucbvi_bonus_arrival(n, *i, shape.actions, T, config_.delta, H, c_) : H;
      }
    }
  return b;
}

Policy Ucbvi::propose_policy(std::int64_t) {
  if (config_.shape.horizon == 0) throw UsageError("learner used before restart");
  tables_ = ucbvi_value_iteration(counts_, bonus_table());
  return tables_.policy;
}

void Ucbvi::observe(const Trajectory& o, std::int64_t) {
  counts_.record(o);
  note_arrival(0, 0);
  for (int h = 1; h <= config_.shape.horizon; ++h) note_arrival(h, o.steps[static_cast<std::size_t>(h - 1)].state);
}

}  // namespace sfrl
