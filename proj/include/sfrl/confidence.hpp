#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "sfrl/counts.hpp"
#include "sfrl/mdp.hpp"
#include "sfrl/pruned_space.hpp"
#include "sfrl/reachability.hpp"

namespace sfrl {

struct Interval {
  double lo = 0.0;
  double hi = 1.0;

  double width() const { return hi - lo; }
  bool contains(double p, double tol = 0.0) const { return p >= lo - tol && p <= hi + tol; }
  bool operator==(const Interval&) const = default;
};

/// Clamps both ends into [0,1].
Interval clamp_unit(Interval i);

enum class ConfidenceKind { baseline, improved };

/// Per-entry intervals on the transition rows of a layered space. A
/// transition P-hat belongs to the set when every entry lies in its interval
/// and every row sums to one. Layer-H rows are pinned to the terminal state.
class TransitionConfidenceSet {
 public:
  TransitionConfidenceSet() = default;
  /// Starts uninformative: every entry in [0,1].
  TransitionConfidenceSet(LayerShape shape, ConfidenceKind kind);

  const LayerShape& shape() const { return shape_; }
  ConfidenceKind kind() const { return kind_; }

  Interval& at(int h, int s, int a, int next) { return rows_[h][index(h, s, a, next)]; }
  const Interval& at(int h, int s, int a, int next) const { return rows_[h][index(h, s, a, next)]; }
  std::span<const Interval> row(int h, int s, int a) const {
    return {rows_[h].data() + index(h, s, a, 0), static_cast<std::size_t>(shape_.layer_size(h + 1))};
  }

  /// Zero-width row on `next` for every action of state s.
  void pin_point_mass(int h, int s, int next);

  /// Every entry of `transition` inside its interval (within tol).
  bool contains(const LayeredMdp& transition, double tol = 0.0) const;

  /// I1 ∩ I2 came out empty and was widened to the hull.
  int empty_intersections = 0;
  /// Rows whose lower bounds summed above one and were rescaled.
  int repaired_rows = 0;

 private:
  std::size_t index(int h, int s, int a, int next) const {
    return static_cast<std::size_t>((s * shape_.actions + a) * shape_.layer_size(h + 1) + next);
  }

  LayerShape shape_;
  ConfidenceKind kind_ = ConfidenceKind::baseline;
  std::vector<std::vector<Interval>> rows_;  // h = 0..H
};

/// Empirical-Bernstein radius of the union-bound construction:
/// 2 sqrt(p L / max(1, n-1)) + 14 L / (3 max(1, n-1)), L = ln(4 T |S| |A| / delta).
double baseline_width(double p_bar, int n, int num_states, int num_actions, std::int64_t T, double delta);

/// Union-bound confidence set over a learner's own counts. `aux_index[h]`
/// (or -1) names an auxiliary state whose rows are pinned to the next
/// auxiliary state; |S| is the number of states in layers 1..H.
TransitionConfidenceSet build_baseline_set(const TransitionCounts& counts, std::int64_t T, double delta,
                                           std::span<const int> aux_index = {});

/// delta(s,a) = delta / (4 i(s)^2 |A|).
double pair_confidence(int arrival_index, int num_actions, double delta);
/// delta(s,a,s') = delta / (4 (i(s)^4 + i(s')^4) |A|).
double triple_confidence(int arrival_index, int next_arrival_index, int num_actions, double delta);

struct ConfidenceAllocation {
  double pair = 0.0;
  double triple = 0.0;
};

/// Both allocations, or nullopt while either state is unvisited.
std::optional<ConfidenceAllocation> allocate_confidence(std::optional<int> arrival_index,
                                                        std::optional<int> next_arrival_index, int num_actions,
                                                        double delta);

/// (M_t - M_{t'}) / max(1, N_t - N_{t'}).
double partial_empirical(const VisitStats& stats, StateId s, int a, StateId next, std::int64_t t, std::int64_t base);

/// eps^1 = 4 sqrt(p log_term / d) + 20 log_term / d with d = max(n_window - 1, 1).
double improved_radius_1(double p_bar, int n_window, double log_term);
/// eps^2 = (2 |S^Pi| + 24 log_term) / max(n - 1, 1).
double improved_radius_2(int visited_states, double log_term, int n);

/// I^1_t(s'|s,a): centered on the partial empirical estimate since t(s,s'),
/// clamped; [0,1] until both states have been visited before epoch t.
Interval improved_interval_1(const VisitStats& stats, StateId s, int a, StateId next, std::int64_t t,
                             double triple_delta);
/// I^2_t(s'|s,a): [0, eps^2] when s' arrived strictly after s, else [0,1].
Interval improved_interval_2(const VisitStats& stats, StateId s, int a, StateId next, std::int64_t t,
                             double pair_delta);

/// Intersection; an empty result is replaced by the hull and reported.
Interval intersect_or_hull(const Interval& a, const Interval& b, bool* was_empty = nullptr);

/// The arrival-time-allocated set on the current pruned space, in local
/// indices. Only data from episodes before t is used.
TransitionConfidenceSet build_improved_set(const VisitStats& stats, const PrunedSpace& space, std::int64_t t,
                                           double delta);

}  // namespace sfrl
