#pragma once

#include <cstdint>
#include <optional>
#include <unordered_map>
#include <vector>

#include "sfrl/counts.hpp"
#include "sfrl/learner.hpp"

namespace sfrl {

/// min{H, c H L / sqrt(N)} with L = ln(|S| |A| T / delta); H when N = 0.
double ucbvi_bonus_standard(int n, int num_states, int num_actions, std::int64_t T, double delta, int horizon,
                            double c);

/// min{H, c H L / sqrt(max(N-1, 1))} with L = ln(2 i(s)^2 |A| T / delta);
/// H when N = 0. Contains no |S|.
double ucbvi_bonus_arrival(int n, int arrival_index, int num_actions, std::int64_t T, double delta, int horizon,
                           double c);

struct UcbviTables {
  LossTable q;
  std::vector<std::vector<double>> v;  // [h][s], h = 0..H+1
  Policy policy;
};

/// Loss-form optimistic value iteration from layer H down to 0:
/// Q = max{0, c_hat + <P_bar, V> - b}, V = min_a Q, greedy with ties to the
/// lowest action.
UcbviTables ucbvi_value_iteration(const TransitionCounts& counts, const LossTable& bonus);

enum class UcbviBonus { standard, arrival };

class Ucbvi final : public Learner {
 public:
  explicit Ucbvi(UcbviBonus bonus = UcbviBonus::standard, double c = 1.0);

  std::string name() const override;
  void restart(const RestartConfig& config) override;
  Policy propose_policy(std::int64_t t) override;
  void observe(const Trajectory& o, std::int64_t t) override;
  const LayerShape& shape() const override { return config_.shape; }

  const TransitionCounts& counts() const { return counts_; }
  /// Bonus table for the current counts.
  LossTable bonus_table() const;
  const UcbviTables& last_tables() const { return tables_; }
  /// Rank of a local state by first visit since the last restart.
  std::optional<int> arrival_index(int h, int s) const;

 private:
  void note_arrival(int h, int s);

  UcbviBonus bonus_;
  double c_;
  RestartConfig config_;
  TransitionCounts counts_;
  UcbviTables tables_;
  std::unordered_map<long long, int> arrival_;
};

}  // namespace sfrl
