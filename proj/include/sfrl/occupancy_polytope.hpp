#pragma once

#include <span>
#include <vector>

#include "sfrl/confidence.hpp"
#include "sfrl/mdp.hpp"

namespace sfrl {

/// Occupancy measure over (s, a, s') triples of a layered space, i.e. the
/// probability of stepping from s with action a into s'. Layer-H triples end
/// in the terminal state.
class TripleOccupancy {
 public:
  TripleOccupancy() = default;
  explicit TripleOccupancy(LayerShape shape, double fill = 0.0);

  /// Every triple of layer h gets 1 / (|S_h| |A| |S_{h+1}|).
  static TripleOccupancy uniform(const LayerShape& shape);

  const LayerShape& shape() const { return shape_; }
  double& at(int h, int s, int a, int next) { return data_[h][index(h, s, a, next)]; }
  double at(int h, int s, int a, int next) const { return data_[h][index(h, s, a, next)]; }
  std::span<double> row(int h, int s, int a) {
    return {data_[h].data() + index(h, s, a, 0), static_cast<std::size_t>(shape_.layer_size(h + 1))};
  }
  std::span<const double> row(int h, int s, int a) const {
    return {data_[h].data() + index(h, s, a, 0), static_cast<std::size_t>(shape_.layer_size(h + 1))};
  }

  double pair_mass(int h, int s, int a) const;
  double state_mass(int h, int s) const;

 private:
  std::size_t index(int h, int s, int a, int next) const {
    return static_cast<std::size_t>((s * shape_.actions + a) * shape_.layer_size(h + 1) + next);
  }

  LayerShape shape_;
  std::vector<std::vector<double>> data_;  // h = 0..H
};

/// pi(a|s) proportional to sum_{s'} q(s,a,s'); uniform where s carries no mass.
Policy policy_from_occupancy(const TripleOccupancy& q);

/// Marginal q(s,a).
OccupancyMeasure pair_occupancy(const TripleOccupancy& q);

/// max over states in layers 1..H of |inflow - outflow|.
double flow_violation(const TripleOccupancy& q);
/// max over layers of |sum q - 1|.
double layer_mass_violation(const TripleOccupancy& q);
/// Largest amount by which some conditional q(s,a,s')/q(s,a) leaves its
/// interval, over pairs with q(s,a) > 0.
double interval_violation(const TripleOccupancy& q, const TransitionConfidenceSet& set);

/// KL projection of a positive weight vector onto {p : sum p = 1, lo <= p <= hi}.
/// The minimizer is clip(c w, lo, hi) for the unique scale c. Returns
/// KL(p || w) = sum p ln(p / w). Throws ConfidenceSetError if the box admits
/// no probability vector.
double project_row_kl(std::span<const double> weights, std::span<const Interval> box, std::span<double> out);

/// max over rows p in the box-simplex of <p, values>: every entry starts at
/// its lower bound and the slack goes to the highest values first.
double maximize_row(std::span<const Interval> box, std::span<const double> values, std::span<double> out = {});

/// max over P in the set of q^{P,pi}(s) for one state.
double max_state_occupancy(const TransitionConfidenceSet& set, const Policy& policy, int h, int s);
/// u(s,a) = pi(a|s) * max over P in the set of q^{P,pi}(s).
double upper_occupancy(const TransitionConfidenceSet& set, const Policy& policy, int h, int s, int a);

struct ProjectionOptions {
  int max_iterations = 10000;
  double tolerance = 1e-8;
};

struct ProjectionReport {
  int iterations = 0;
  double flow_residual = 0.0;
};

/// KL projection of `target` onto the occupancy polytope of `set`: per-layer
/// mass one, flow conservation, and every conditional q(s,a,s')/q(s,a) inside
/// its interval.
///
/// The interval constraints are cones on each (s,a) row, so for fixed flow
/// multipliers beta the Lagrangian separates into row problems solved by
/// `project_row_kl`. What remains is the smooth convex dual
///   F(beta) = sum_h ln sum_{(s,a) in layer h} zeta_sa(beta),
/// whose gradient is inflow minus outflow per state. It is minimized by
/// damped Newton steps with Armijo backtracking until the flow residual is at
/// most `tolerance`. `beta` (one entry per state of layers 1..H, layer-major)
/// is used as a warm start when it has the right size and receives the
/// final multipliers. Throws NumericalError when the iteration cap is hit.
TripleOccupancy project_onto_polytope(const TripleOccupancy& target, const TransitionConfidenceSet& set,
                                      const ProjectionOptions& options = {}, ProjectionReport* report = nullptr,
                                      std::vector<double>* beta = nullptr);

/// q * exp(-eta * loss_hat(s,a)) on every triple of (s,a), floored at a tiny
/// positive value so the projection stays finite.
TripleOccupancy reweight(const TripleOccupancy& current, const LossTable& loss_hat, double eta);

/// One mirror-descent step: `reweight`, then the KL projection onto the
/// polytope of `set`.
TripleOccupancy omd_step(const TripleOccupancy& current, const LossTable& loss_hat, double eta,
                         const TransitionConfidenceSet& set, const ProjectionOptions& options = {},
                         ProjectionReport* report = nullptr, std::vector<double>* beta = nullptr);

}  // namespace sfrl
