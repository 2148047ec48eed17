#include "sfrl/confidence.hpp"

#include <algorithm>
#include <cmath>

#include "sfrl/errors.hpp"

namespace sfrl {

Interval clamp_unit(Interval i) { return {std::clamp(i.lo, 0.0, 1.0), std::clamp(i.hi, 0.0, 1.0)}; }

TransitionConfidenceSet::TransitionConfidenceSet(LayerShape shape, ConfidenceKind kind)
    : shape_(std::move(shape)), kind_(kind) {
  const int H = shape_.horizon;
  for (int h = 0; h <= H; ++h)
    rows_.emplace_back(static_cast<std::size_t>(shape_.layer_size(h) * shape_.actions * shape_.layer_size(h + 1)),
                       Interval{0.0, 1.0});
  for (auto& entry : rows_[H]) entry = {1.0, 1.0};
}

void TransitionConfidenceSet::pin_point_mass(int h, int s, int next) {
  for (int a = 0; a < shape_.actions; ++a)
    for (int n = 0; n < shape_.layer_size(h + 1); ++n) at(h, s, a, n) = n == next ? Interval{1.0, 1.0} : Interval{0.0, 0.0};
}

bool TransitionConfidenceSet::contains(const LayeredMdp& transition, double tol) const {
  if (!(transition.shape() == shape_)) return false;
  for (int h = 0; h < shape_.horizon; ++h)
    for (int s = 0; s < shape_.layer_size(h); ++s)
      for (int a = 0; a < shape_.actions; ++a) {
        const auto p = transition.row(h, s, a);
        const auto iv = row(h, s, a);
        for (std::size_t n = 0; n < p.size(); ++n)
          if (!iv[n].contains(p[n], tol)) return false;
      }
  return true;
}

double baseline_width(double p_bar, int n, int num_states, int num_actions, std::int64_t T, double delta) {
  const double L = std::log(4.0 * static_cast<double>(T) * num_states * num_actions / delta);
  const double denom = std::max(1, n - 1);
  return 2.0 * std::sqrt(p_bar * L / denom) + 14.0 * L / (3.0 * denom);
}

TransitionConfidenceSet build_baseline_set(const TransitionCounts& counts, std::int64_t T, double delta,
                                           std::span<const int> aux_index) {
  const LayerShape& shape = counts.shape();
  const int H = shape.horizon;
  const int S = shape.inner_state_count();
  TransitionConfidenceSet set(shape, ConfidenceKind::baseline);
  for (int h = 0; h < H; ++h)
    for (int s = 0; s < shape.layer_size(h); ++s) {
      const bool aux_source = !aux_index.empty() && aux_index[h] == s;
      if (aux_source) {
        set.pin_point_mass(h, s, aux_index[h + 1]);
        continue;
      }
      for (int a = 0; a < shape.actions; ++a) {
        const int n = counts.pair(h, s, a);
        for (int next = 0; next < shape.layer_size(h + 1); ++next) {
          const double p = counts.empirical(h, s, a, next);
          const double r = baseline_width(p, n, S, shape.actions, T, delta);
          set.at(h, s, a, next) = clamp_unit({p - r, p + r});
        }
      }
    }
  return set;
}

double pair_confidence(int arrival_index, int num_actions, double delta) {
  const double i = arrival_index;
  return delta / (4.0 * i * i * num_actions);
}

double triple_confidence(int arrival_index, int next_arrival_index, int num_actions, double delta) {
  const double i = arrival_index;
  const double j = next_arrival_index;
  return delta / (4.0 * (i * i * i * i + j * j * j * j) * num_actions);
}

std::optional<ConfidenceAllocation> allocate_confidence(std::optional<int> arrival_index,
                                                        std::optional<int> next_arrival_index, int num_actions,
                                                        double delta) {
  if (!arrival_index || !next_arrival_index) return std::nullopt;
  return ConfidenceAllocation{pair_confidence(*arrival_index, num_actions, delta),
                              triple_confidence(*arrival_index, *next_arrival_index, num_actions, delta)};
}

double partial_empirical(const VisitStats& stats, StateId s, int a, StateId next, std::int64_t t,
                         std::int64_t base) {
  const int m = stats.triple_count_before(s, a, next.index, t) - stats.triple_count_before(s, a, next.index, base);
  const int n = stats.pair_count_before(s, a, t) - stats.pair_count_before(s, a, base);
  return static_cast<double>(m) / std::max(1, n);
}

double improved_radius_1(double p_bar, int n_window, double log_term) {
  const double d = std::max(n_window - 1, 1);
  return 4.0 * std::sqrt(p_bar * log_term / d) + 20.0 * log_term / d;
}

double improved_radius_2(int visited_states, double log_term, int n) {
  return (2.0 * visited_states + 24.0 * log_term) / std::max(n - 1, 1);
}

namespace {

// Arrival epoch if the state was first visited before epoch t.
std::optional<std::int64_t> arrived_before(const VisitStats& stats, StateId s, std::int64_t t) {
  auto arrival = stats.arrival_episode(s);
  if (!arrival || *arrival >= t) return std::nullopt;
  return arrival;
}

}  // namespace

Interval improved_interval_1(const VisitStats& stats, StateId s, int a, StateId next, std::int64_t t,
                             double triple_delta) {
  const auto ts = arrived_before(stats, s, t);
  const auto tn = arrived_before(stats, next, t);
  if (!ts || !tn) return {0.0, 1.0};
  const std::int64_t base = std::max(*ts, *tn);
  const double p = partial_empirical(stats, s, a, next, t, base);
  const int window = stats.pair_count_before(s, a, t) - stats.pair_count_before(s, a, base);
  const double r = improved_radius_1(p, window, std::log(static_cast<double>(t) / triple_delta));
  return clamp_unit({p - r, p + r});
}

Interval improved_interval_2(const VisitStats& stats, StateId s, int a, StateId next, std::int64_t t,
                             double pair_delta) {
  const auto ts = arrived_before(stats, s, t);
  const auto tn = arrived_before(stats, next, t);
  if (!ts || !tn || *tn < *ts + 1) return {0.0, 1.0};
  const double r = improved_radius_2(stats.visited_before(*tn), std::log(static_cast<double>(t) / pair_delta),
                                     stats.pair_count_before(s, a, *tn));
  return clamp_unit({0.0, r});
}

Interval intersect_or_hull(const Interval& a, const Interval& b, bool* was_empty) {
  Interval out{std::max(a.lo, b.lo), std::min(a.hi, b.hi)};
  const bool empty = out.lo > out.hi;
  if (empty) out = {std::min(a.lo, b.lo), std::max(a.hi, b.hi)};
  if (was_empty) *was_empty = empty;
  return out;
}

TransitionConfidenceSet build_improved_set(const VisitStats& stats, const PrunedSpace& space, std::int64_t t,
                                           double delta) {
  const int H = space.horizon();
  const int A = space.num_actions();
  TransitionConfidenceSet set(space.shape(), ConfidenceKind::improved);
  for (int h = 0; h < H; ++h) {
    const int next_aux = space.aux_index(h + 1);
    for (int s = 0; s < set.shape().layer_size(h); ++s) {
      if (space.is_aux(h, s)) {
        set.pin_point_mass(h, s, next_aux);
        continue;
      }
      const StateId src{h, space.to_real(h, s)};
      const auto src_index = stats.arrival_index(src);
      for (int a = 0; a < A; ++a) {
        double lo_sum = 0.0;
        for (int n = 0; n < next_aux; ++n) {
          const StateId dst{h + 1, space.to_real(h + 1, n)};
          const auto alloc = allocate_confidence(src_index, stats.arrival_index(dst), A, delta);
          if (!alloc) continue;
          bool empty = false;
          const Interval iv = intersect_or_hull(improved_interval_1(stats, src, a, dst, t, alloc->triple),
                                                improved_interval_2(stats, src, a, dst, t, alloc->pair), &empty);
          if (empty) ++set.empty_intersections;
          set.at(h, s, a, n) = iv;
          lo_sum += iv.lo;
        }
        if (lo_sum > 1.0) {
          ++set.repaired_rows;
          for (int n = 0; n < next_aux; ++n) set.at(h, s, a, n).lo /= lo_sum;
        }
      }
    }
  }
  return set;
}

}  // namespace sfrl
