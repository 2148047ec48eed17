#include "sfrl/pruned_space.hpp"

#include <algorithm>

#include "sfrl/errors.hpp"

namespace sfrl {

PrunedSpace::PrunedSpace(int horizon, int actions)
    : horizon_(horizon), actions_(actions), admitted_(static_cast<std::size_t>(horizon) + 2) {
  if (horizon < 1 || actions < 1) throw ConfigError("pruned space needs a positive horizon and action count");
  admitted_.front() = {0};
  admitted_.back() = {0};
}

bool PrunedSpace::is_admitted(StateId s) const { return to_local(s) >= 0; }

int PrunedSpace::admit(std::span<const StateId> states) {
  int added = 0;
  for (const StateId& s : states) {
    if (s.layer < 1 || s.layer > horizon_) throw UsageError("only loss-bearing layers can be admitted");
    auto& layer = admitted_[static_cast<std::size_t>(s.layer)];
    auto it = std::lower_bound(layer.begin(), layer.end(), s.index);
    if (it != layer.end() && *it == s.index) continue;
    layer.insert(it, s.index);
    ++added;
  }
  if (added > 0) ++version_;
  return added;
}

int PrunedSpace::size() const {
  int total = horizon_;
  for (int h = 1; h <= horizon_; ++h) total += static_cast<int>(admitted_[h].size());
  return total;
}

int PrunedSpace::to_local(StateId s) const {
  if (s.layer < 0 || s.layer > horizon_ + 1) return -1;
  const auto& layer = admitted_[static_cast<std::size_t>(s.layer)];
  auto it = std::lower_bound(layer.begin(), layer.end(), s.index);
  if (it == layer.end() || *it != s.index) return -1;
  return static_cast<int>(it - layer.begin());
}

int PrunedSpace::to_real(int h, int local) const {
  const auto& layer = admitted_[static_cast<std::size_t>(h)];
  if (local < 0 || local >= static_cast<int>(layer.size())) return -1;
  return layer[static_cast<std::size_t>(local)];
}

LayerShape PrunedSpace::shape() const {
  std::vector<int> inner;
  for (int h = 1; h <= horizon_; ++h) inner.push_back(aux_index(h) + 1);
  return LayerShape::make(horizon_, actions_, inner);
}

LayeredMdp build_pruned_transition(const LayeredMdp& mdp, const PrunedSpace& space) {
  const int H = mdp.horizon();
  const int A = mdp.num_actions();
  if (space.horizon() != H || space.num_actions() != A) throw ConfigError("pruned space does not match the MDP");
  for (int h = 1; h <= H; ++h)
    for (int s : space.admitted(h))
      if (s >= mdp.layer_size(h)) throw ConfigError("admitted state missing from the MDP");

  const LayerShape shape = space.shape();
  std::vector<std::vector<double>> rows(static_cast<std::size_t>(H));
  for (int h = 0; h < H; ++h) {
    const int width = shape.layer_size(h + 1);
    const int next_aux = space.aux_index(h + 1);
    rows[h].assign(static_cast<std::size_t>(shape.layer_size(h) * A * width), 0.0);
    for (int s = 0; s < shape.layer_size(h); ++s)
      for (int a = 0; a < A; ++a) {
        double* out = rows[h].data() + static_cast<std::size_t>((s * A + a) * width);
        if (space.is_aux(h, s)) {
          out[next_aux] = 1.0;
          continue;
        }
        const auto full = mdp.row(h, space.to_real(h, s), a);
        double kept = 0.0;
        for (int n = 0; n < next_aux; ++n) {
          out[n] = full[static_cast<std::size_t>(space.to_real(h + 1, n))];
          kept += out[n];
        }
        out[next_aux] = std::max(0.0, 1.0 - kept);
      }
  }
  return LayeredMdp(shape, std::move(rows));
}

Trajectory prune_trajectory(const Trajectory& o, const PrunedSpace& space) {
  Trajectory out;
  out.start_action = o.start_action;
  out.steps.reserve(o.steps.size());
  bool inside = true;
  for (std::size_t i = 0; i < o.steps.size(); ++i) {
    const int h = static_cast<int>(i) + 1;
    const int local = inside ? space.to_local({h, o.steps[i].state}) : -1;
    inside = local >= 0;
    if (inside)
      out.steps.push_back({local, o.steps[i].action, o.steps[i].loss});
    else
      out.steps.push_back({space.aux_index(h), PrunedSpace::kAuxAction, 0.0});
  }
  return out;
}

Policy extend_policy(const Policy& pruned_policy, const PrunedSpace& space, const LayerShape& full_shape) {
  Policy pi(full_shape);
  for (int h = 0; h <= full_shape.horizon; ++h)
    for (int s = 0; s < full_shape.layer_size(h); ++s) {
      const int local = space.to_local({h, s});
      if (local < 0) {
        pi(h, s, 0) = 1.0;
        continue;
      }
      const auto src = pruned_policy.row(h, local);
      std::copy(src.begin(), src.end(), pi.row(h, s).begin());
    }
  return pi;
}

Policy restrict_policy(const Policy& policy, const PrunedSpace& space) {
  Policy out(space.shape());
  for (int h = 0; h <= space.horizon(); ++h)
    for (int local = 0; local < out.shape().layer_size(h); ++local) {
      if (space.is_aux(h, local)) {
        out(h, local, PrunedSpace::kAuxAction) = 1.0;
        continue;
      }
      const auto src = policy.row(h, space.to_real(h, local));
      std::copy(src.begin(), src.end(), out.row(h, local).begin());
    }
  return out;
}

LossTable pruned_loss(const LossTable& loss, const PrunedSpace& space) {
  LossTable out(space.shape());
  for (int h = 1; h <= space.horizon(); ++h)
    for (int local = 0; local < space.aux_index(h); ++local) {
      const auto src = loss.row(h, space.to_real(h, local));
      std::copy(src.begin(), src.end(), out.row(h, local).begin());
    }
  return out;
}

}  // namespace sfrl
