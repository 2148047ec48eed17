#include "sfrl/mdp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "sfrl/errors.hpp"

namespace sfrl {

namespace {

constexpr double kRowTolerance = 1e-12;

void check_probability_row(std::span<double> row, const char* what) {
  double sum = 0.0;
  for (double p : row) {
    if (!(p >= 0.0) || !std::isfinite(p)) throw ConfigError(std::string(what) + ": negative or non-finite entry");
    sum += p;
  }
  if (std::abs(sum - 1.0) > kRowTolerance)
    throw ConfigError(std::string(what) + ": row sums to " + std::to_string(sum));
  for (double& p : row) p /= sum;
}

}  // namespace

LayerShape LayerShape::make(int horizon, int actions, const std::vector<int>& inner_sizes) {
  if (horizon < 1) throw ConfigError("horizon must be positive");
  if (actions < 1) throw ConfigError("action count must be positive");
  if (static_cast<int>(inner_sizes.size()) != horizon)
    throw ConfigError("expected one state count per loss-bearing layer");
  LayerShape shape;
  shape.horizon = horizon;
  shape.actions = actions;
  shape.sizes.reserve(inner_sizes.size() + 2);
  shape.sizes.push_back(1);
  for (int n : inner_sizes) {
    if (n < 1) throw ConfigError("every layer needs at least one state");
    shape.sizes.push_back(n);
  }
  shape.sizes.push_back(1);
  return shape;
}

int LayerShape::inner_state_count() const {
  int total = 0;
  for (int h = 1; h <= horizon; ++h) total += layer_size(h);
  return total;
}

Policy uniform_policy(const LayerShape& shape) { return Policy(shape, 1.0 / shape.actions); }

Policy deterministic_policy(const LayerShape& shape, const std::vector<std::vector<int>>& actions) {
  Policy pi(shape);
  for (int h = 0; h <= shape.horizon; ++h)
    for (int s = 0; s < shape.layer_size(h); ++s) pi(h, s, actions.at(h).at(s)) = 1.0;
  return pi;
}

void validate_policy(const Policy& policy) {
  const auto& shape = policy.shape();
  for (int h = 0; h <= shape.horizon; ++h)
    for (int s = 0; s < shape.layer_size(h); ++s) {
      double sum = 0.0;
      for (double p : policy.row(h, s)) {
        if (!(p >= 0.0)) throw ConfigError("policy row has a negative entry");
        sum += p;
      }
      if (std::abs(sum - 1.0) > kRowTolerance) throw ConfigError("policy row does not sum to one");
    }
}

double state_mass(const OccupancyMeasure& q, int h, int s) {
  double m = 0.0;
  for (double v : q.row(h, s)) m += v;
  return m;
}

LayeredMdp::LayeredMdp(LayerShape shape, std::vector<std::vector<double>> transitions)
    : shape_(std::move(shape)) {
  const int H = shape_.horizon;
  const int A = shape_.actions;
  if (static_cast<int>(shape_.sizes.size()) != H + 2 || shape_.sizes.front() != 1 || shape_.sizes.back() != 1)
    throw ConfigError("layer shape must have H+2 layers with singleton start and terminal layers");
  if (static_cast<int>(transitions.size()) != H) throw ConfigError("expected H transition layers");
  for (int h = 0; h < H; ++h) {
    const std::size_t width = static_cast<std::size_t>(layer_size(h + 1));
    auto& layer = transitions[h];
    if (layer.size() != static_cast<std::size_t>(layer_size(h) * A) * width)
      throw ConfigError("transition layer " + std::to_string(h) + " has the wrong size");
    for (std::size_t r = 0; r < layer.size() / width; ++r)
      check_probability_row(std::span<double>(layer.data() + r * width, width), "transition");
  }
  rows_ = std::move(transitions);
  rows_.emplace_back(static_cast<std::size_t>(layer_size(H) * A), 1.0);
}

std::span<const double> LayeredMdp::row(int h, int s, int a) const {
  const std::size_t width = static_cast<std::size_t>(layer_size(h + 1));
  return {rows_[h].data() + static_cast<std::size_t>(s * shape_.actions + a) * width, width};
}

LossModel::LossModel(Kind kind, std::vector<LossTable> tables) : kind_(kind), tables_(std::move(tables)) {
  if (tables_.empty()) throw ConfigError("loss model needs at least one table");
  const LayerShape& shape = tables_.front().shape();
  for (const auto& table : tables_) {
    if (!(table.shape() == shape)) throw ConfigError("loss tables disagree on shape");
    for (int h = 0; h <= shape.horizon; ++h)
      for (double v : table.layer(h)) {
        if (!(v >= 0.0 && v <= 1.0)) throw ConfigError("losses must lie in [0,1]");
        if (h == 0 && v != 0.0) throw ConfigError("the start layer carries no loss");
      }
  }
}

LossModel LossModel::stochastic(LossTable means) {
  std::vector<LossTable> tables;
  tables.push_back(std::move(means));
  return LossModel(Kind::stochastic, std::move(tables));
}

LossModel LossModel::adversarial(std::vector<LossTable> schedule) {
  return LossModel(Kind::adversarial, std::move(schedule));
}

std::int64_t LossModel::length() const {
  if (kind_ == Kind::stochastic) return std::numeric_limits<std::int64_t>::max();
  return static_cast<std::int64_t>(tables_.size());
}

const LossTable& LossModel::expected(std::int64_t t) const {
  if (kind_ == Kind::stochastic) return tables_.front();
  if (t < 1 || t > length())
    throw RunLengthError("episode " + std::to_string(t) + " outside the loss schedule of length " +
                         std::to_string(length()));
  return tables_[static_cast<std::size_t>(t - 1)];
}

double LossModel::realize(std::int64_t t, int h, int s, int a, Rng& rng) const {
  const double mean = expected(t)(h, s, a);
  if (kind_ == Kind::adversarial) return mean;
  return rng.bernoulli(mean) ? 1.0 : 0.0;
}

OccupancyMeasure compute_occupancy(const LayeredMdp& mdp, const Policy& policy) {
  if (!(policy.shape() == mdp.shape())) throw ConfigError("policy and MDP disagree on the state space");
  const int H = mdp.horizon();
  const int A = mdp.num_actions();
  OccupancyMeasure q(mdp.shape());
  std::vector<double> mass = {1.0};
  for (int h = 0; h <= H; ++h) {
    std::vector<double> next(static_cast<std::size_t>(mdp.layer_size(h + 1)), 0.0);
    for (int s = 0; s < mdp.layer_size(h); ++s) {
      if (mass[s] == 0.0) continue;
      for (int a = 0; a < A; ++a) {
        const double qa = mass[s] * policy(h, s, a);
        q(h, s, a) = qa;
        if (qa == 0.0 || h == H) continue;
        const auto row = mdp.row(h, s, a);
        for (std::size_t n = 0; n < row.size(); ++n) next[n] += qa * row[n];
      }
    }
    mass = std::move(next);
  }
  return q;
}

double expected_loss(const OccupancyMeasure& q, const LossTable& loss) {
  if (!(q.shape() == loss.shape())) throw ConfigError("occupancy and loss table disagree on the state space");
  double total = 0.0;
  for (int h = 0; h <= q.shape().horizon; ++h) {
    const auto qs = q.layer(h);
    const auto ls = loss.layer(h);
    for (std::size_t i = 0; i < qs.size(); ++i) total += qs[i] * ls[i];
  }
  return total;
}

Trajectory sample_trajectory(const LayeredMdp& mdp, const Policy& policy, const LossModel& loss,
                             std::int64_t t, Rng& rng) {
  if (!(policy.shape() == mdp.shape())) throw ConfigError("policy and MDP disagree on the state space");
  if (t > loss.length())
    throw RunLengthError("loss schedule exhausted at episode " + std::to_string(t));
  const int H = mdp.horizon();
  Trajectory o;
  o.steps.reserve(static_cast<std::size_t>(H));
  o.start_action = rng.categorical(policy.row(0, 0));
  int s = rng.categorical(mdp.row(0, 0, o.start_action));
  for (int h = 1; h <= H; ++h) {
    Step step;
    step.state = s;
    step.action = rng.categorical(policy.row(h, s));
    step.loss = loss.realize(t, h, s, step.action, rng);
    o.steps.push_back(step);
    if (h < H) s = rng.categorical(mdp.row(h, s, step.action));
  }
  return o;
}

HindsightOptimum best_in_hindsight(const LayeredMdp& mdp, const LossTable& summed_losses) {
  if (!(summed_losses.shape() == mdp.shape())) throw ConfigError("loss table and MDP disagree on the state space");
  const int H = mdp.horizon();
  const int A = mdp.num_actions();
  std::vector<std::vector<int>> choice(static_cast<std::size_t>(H) + 1);
  std::vector<double> value_next = {0.0};  // terminal
  for (int h = H; h >= 0; --h) {
    std::vector<double> value(static_cast<std::size_t>(mdp.layer_size(h)), 0.0);
    choice[h].assign(value.size(), 0);
    for (int s = 0; s < mdp.layer_size(h); ++s) {
      double best = std::numeric_limits<double>::infinity();
      for (int a = 0; a < A; ++a) {
        double v = summed_losses(h, s, a);
        if (h < H) {
          const auto row = mdp.row(h, s, a);
          for (std::size_t n = 0; n < row.size(); ++n) v += row[n] * value_next[n];
        }
        if (v < best) {
          best = v;
          choice[h][s] = a;
        }
      }
      value[s] = best;
    }
    value_next = std::move(value);
  }
  return {deterministic_policy(mdp.shape(), choice), value_next[0]};
}

std::vector<std::vector<double>> max_reach_probabilities(const LayeredMdp& mdp) {
  const int H = mdp.horizon();
  const int A = mdp.num_actions();
  std::vector<std::vector<double>> reach(static_cast<std::size_t>(H) + 1);
  reach[0] = {1.0};
  for (int k = 1; k <= H; ++k) {
    reach[k].assign(static_cast<std::size_t>(mdp.layer_size(k)), 0.0);
    for (int target = 0; target < mdp.layer_size(k); ++target) {
      std::vector<double> f(static_cast<std::size_t>(mdp.layer_size(k)), 0.0);
      f[target] = 1.0;
      for (int h = k - 1; h >= 0; --h) {
        std::vector<double> g(static_cast<std::size_t>(mdp.layer_size(h)), 0.0);
        for (int s = 0; s < mdp.layer_size(h); ++s)
          for (int a = 0; a < A; ++a) {
            const auto row = mdp.row(h, s, a);
            double v = 0.0;
            for (std::size_t n = 0; n < row.size(); ++n) v += row[n] * f[n];
            g[s] = std::max(g[s], v);
          }
        f = std::move(g);
      }
      reach[k][target] = f[0];
    }
  }
  return reach;
}

}  // namespace sfrl
