#include "sfrl/occupancy_polytope.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "sfrl/errors.hpp"

namespace sfrl {

TripleOccupancy::TripleOccupancy(LayerShape shape, double fill) : shape_(std::move(shape)) {
  for (int h = 0; h <= shape_.horizon; ++h)
    data_.emplace_back(
        static_cast<std::size_t>(shape_.layer_size(h) * shape_.actions * shape_.layer_size(h + 1)), fill);
}

TripleOccupancy TripleOccupancy::uniform(const LayerShape& shape) {
  TripleOccupancy q(shape);
  for (int h = 0; h <= shape.horizon; ++h) {
    const double v = 1.0 / (static_cast<double>(shape.layer_size(h)) * shape.actions * shape.layer_size(h + 1));
    std::fill(q.data_[h].begin(), q.data_[h].end(), v);
  }
  return q;
}

double TripleOccupancy::pair_mass(int h, int s, int a) const {
  const auto r = row(h, s, a);
  return std::accumulate(r.begin(), r.end(), 0.0);
}

double TripleOccupancy::state_mass(int h, int s) const {
  double total = 0.0;
  for (int a = 0; a < shape_.actions; ++a) total += pair_mass(h, s, a);
  return total;
}

Policy policy_from_occupancy(const TripleOccupancy& q) {
  const LayerShape& shape = q.shape();
  Policy pi(shape);
  for (int h = 0; h <= shape.horizon; ++h)
    for (int s = 0; s < shape.layer_size(h); ++s) {
      const double total = q.state_mass(h, s);
      for (int a = 0; a < shape.actions; ++a)
        pi(h, s, a) = total > 0.0 ? q.pair_mass(h, s, a) / total : 1.0 / shape.actions;
    }
  return pi;
}

OccupancyMeasure pair_occupancy(const TripleOccupancy& q) {
  const LayerShape& shape = q.shape();
  OccupancyMeasure out(shape);
  for (int h = 0; h <= shape.horizon; ++h)
    for (int s = 0; s < shape.layer_size(h); ++s)
      for (int a = 0; a < shape.actions; ++a) out(h, s, a) = q.pair_mass(h, s, a);
  return out;
}

double flow_violation(const TripleOccupancy& q) {
  const LayerShape& shape = q.shape();
  double worst = 0.0;
  for (int h = 1; h <= shape.horizon; ++h)
    for (int s = 0; s < shape.layer_size(h); ++s) {
      double inflow = 0.0;
      for (int p = 0; p < shape.layer_size(h - 1); ++p)
        for (int a = 0; a < shape.actions; ++a) inflow += q.at(h - 1, p, a, s);
      worst = std::max(worst, std::abs(inflow - q.state_mass(h, s)));
    }
  return worst;
}

double layer_mass_violation(const TripleOccupancy& q) {
  const LayerShape& shape = q.shape();
  double worst = 0.0;
  for (int h = 0; h <= shape.horizon; ++h) {
    double total = 0.0;
    for (int s = 0; s < shape.layer_size(h); ++s) total += q.state_mass(h, s);
    worst = std::max(worst, std::abs(total - 1.0));
  }
  return worst;
}

double interval_violation(const TripleOccupancy& q, const TransitionConfidenceSet& set) {
  const LayerShape& shape = q.shape();
  double worst = 0.0;
  for (int h = 0; h <= shape.horizon; ++h)
    for (int s = 0; s < shape.layer_size(h); ++s)
      for (int a = 0; a < shape.actions; ++a) {
        const double mass = q.pair_mass(h, s, a);
        if (mass <= 0.0) continue;
        const auto r = q.row(h, s, a);
        const auto box = set.row(h, s, a);
        for (std::size_t n = 0; n < r.size(); ++n) {
          const double p = r[n] / mass;
          worst = std::max({worst, box[n].lo - p, p - box[n].hi});
        }
      }
  return worst;
}

namespace {

constexpr double kFeasibilityTol = 1e-9;
constexpr double kWeightFloor = 1e-300;

void check_row_feasible(std::span<const Interval> box) {
  double lo = 0.0, hi = 0.0;
  for (const auto& iv : box) {
    if (iv.lo > iv.hi + kFeasibilityTol) throw ConfidenceSetError("confidence interval with lo > hi");
    lo += iv.lo;
    hi += iv.hi;
  }
  if (lo > 1.0 + kFeasibilityTol || hi < 1.0 - kFeasibilityTol) {
    std::ostringstream msg;
    msg << "confidence row admits no distribution (sum lo = " << lo << ", sum hi = " << hi << ")";
    throw ConfidenceSetError(msg.str());
  }
}

// clip(c w, lo, hi) summed over the row.
double clipped_sum(std::span<const double> w, std::span<const Interval> box, double c) {
  double total = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) total += std::clamp(c * w[i], box[i].lo, box[i].hi);
  return total;
}

// Row projection with the free set (entries strictly between their bounds)
// reported in `free`. Weights must be positive.
double project_row(std::span<const double> w, std::span<const Interval> box, std::span<double> out,
                   std::vector<char>* free) {
  const std::size_t n = w.size();
  check_row_feasible(box);
  std::vector<double> knots;
  knots.reserve(2 * n);
  for (std::size_t i = 0; i < n; ++i) {
    knots.push_back(box[i].lo / w[i]);
    knots.push_back(box[i].hi / w[i]);
  }
  std::sort(knots.begin(), knots.end());
  // Smallest knot index with clipped_sum >= 1; the scale lies between it and
  // the previous knot, where the sum is linear in c.
  std::size_t lo_k = 0, hi_k = knots.size() - 1;
  if (clipped_sum(w, box, knots.back()) < 1.0) {
    lo_k = hi_k;  // sum hi ~ 1 within tolerance: everything at its upper bound
  } else {
    while (lo_k < hi_k) {
      const std::size_t mid = (lo_k + hi_k) / 2;
      if (clipped_sum(w, box, knots[mid]) >= 1.0)
        hi_k = mid;
      else
        lo_k = mid + 1;
    }
  }
  const double c_right = knots[lo_k];
  const double c_left = lo_k > 0 ? knots[lo_k - 1] : 0.0;
  // Classify on the open segment; free entries scale with c there.
  const double probe = 0.5 * (c_left + c_right);
  double bound_mass = 0.0, free_weight = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double v = probe * w[i];
    if (v <= box[i].lo)
      bound_mass += box[i].lo;
    else if (v >= box[i].hi)
      bound_mass += box[i].hi;
    else
      free_weight += w[i];
  }
  double c = c_right;
  if (free_weight > 0.0) c = std::clamp((1.0 - bound_mass) / free_weight, c_left, c_right);
  if (free) free->assign(n, 0);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = std::clamp(c * w[i], box[i].lo, box[i].hi);
    total += out[i];
  }
  // Absorb rounding so the row sums to one.
  if (total > 0.0)
    for (std::size_t i = 0; i < n; ++i) out[i] /= total;
  double kl = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (free) (*free)[i] = out[i] > box[i].lo && out[i] < box[i].hi;
    if (out[i] > 0.0) kl += out[i] * std::log(out[i] / w[i]);
  }
  return kl;
}

}  // namespace

double project_row_kl(std::span<const double> weights, std::span<const Interval> box, std::span<double> out) {
  if (weights.size() != box.size() || out.size() != box.size()) throw UsageError("row size mismatch");
  std::vector<double> w(weights.begin(), weights.end());
  for (double& v : w) {
    if (!(v >= 0.0)) throw UsageError("negative weight");
    v = std::max(v, kWeightFloor);
  }
  return project_row(w, box, out, nullptr);
}

double maximize_row(std::span<const Interval> box, std::span<const double> values, std::span<double> out) {
  check_row_feasible(box);
  const std::size_t n = box.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] > values[b]; });
  std::vector<double> p(n);
  double slack = 1.0;
  for (std::size_t i = 0; i < n; ++i) {
    p[i] = box[i].lo;
    slack -= box[i].lo;
  }
  for (std::size_t i : order) {
    if (slack <= 0.0) break;
    const double give = std::min(box[i].hi - box[i].lo, slack);
    p[i] += give;
    slack -= give;
  }
  double value = 0.0;
  for (std::size_t i = 0; i < n; ++i) value += p[i] * values[i];
  if (!out.empty()) std::copy(p.begin(), p.end(), out.begin());
  return value;
}

double max_state_occupancy(const TransitionConfidenceSet& set, const Policy& policy, int h, int s) {
  const LayerShape& shape = set.shape();
  std::vector<double> f(static_cast<std::size_t>(shape.layer_size(h)), 0.0);
  f[static_cast<std::size_t>(s)] = 1.0;
  for (int k = h - 1; k >= 0; --k) {
    std::vector<double> g(static_cast<std::size_t>(shape.layer_size(k)), 0.0);
    const bool any = std::any_of(f.begin(), f.end(), [](double v) { return v > 0.0; });
    if (any)
      for (int x = 0; x < shape.layer_size(k); ++x)
        for (int a = 0; a < shape.actions; ++a) {
          const double w = policy(k, x, a);
          if (w > 0.0) g[static_cast<std::size_t>(x)] += w * maximize_row(set.row(k, x, a), f);
        }
    f = std::move(g);
  }
  return f[0];
}

double upper_occupancy(const TransitionConfidenceSet& set, const Policy& policy, int h, int s, int a) {
  return policy(h, s, a) * max_state_occupancy(set, policy, h, s);
}

namespace {

// Dual of the KL projection in the flow multipliers beta.
class FlowDual {
 public:
  FlowDual(const TripleOccupancy& target, const TransitionConfidenceSet& set)
      : shape_(target.shape()), set_(set), log_target_(target.shape()) {
    const int H = shape_.horizon;
    offset_.assign(static_cast<std::size_t>(H) + 2, -1);
    int d = 0;
    for (int h = 1; h <= H; ++h) {
      offset_[static_cast<std::size_t>(h)] = d;
      d += shape_.layer_size(h);
    }
    dim_ = d;
    for (int h = 0; h <= H; ++h)
      for (int s = 0; s < shape_.layer_size(h); ++s)
        for (int a = 0; a < shape_.actions; ++a) {
          const auto src = target.row(h, s, a);
          auto dst = log_target_.row(h, s, a);
          for (std::size_t n = 0; n < src.size(); ++n) {
            if (!(src[n] >= 0.0) || !std::isfinite(src[n])) throw UsageError("projection target must be finite and >= 0");
            dst[n] = std::log(std::max(src[n], kWeightFloor));
          }
          check_row_feasible(set.row(h, s, a));
        }
  }

  int dim() const { return dim_; }

  // Variable index of state (h, s), or -1 for the fixed start and terminal.
  int var(int h, int s) const {
    const int o = offset_[static_cast<std::size_t>(h)];
    return o < 0 ? -1 : o + s;
  }

  struct Eval {
    double value = 0.0;
    Eigen::VectorXd grad;
    Eigen::MatrixXd hess;
  };

  // F(beta); the gradient when `grad`, the Hessian too when `hess`. When `q`
  // is given it receives the primal point x_sa * p_sa.
  Eval evaluate(const Eigen::VectorXd& beta, bool grad, bool hess, TripleOccupancy* q = nullptr) const {
    const int H = shape_.horizon;
    Eval e;
    if (grad) e.grad = Eigen::VectorXd::Zero(dim_);
    if (hess) e.hess = Eigen::MatrixXd::Zero(dim_, dim_);
    std::vector<double> w, p, log_zeta;
    std::vector<std::vector<double>> rows;
    std::vector<std::vector<char>> frees;
    std::vector<char> free;
    for (int h = 0; h <= H; ++h) {
      const int n_next = shape_.layer_size(h + 1);
      const int n_pairs = shape_.layer_size(h) * shape_.actions;
      w.resize(static_cast<std::size_t>(n_next));
      log_zeta.assign(static_cast<std::size_t>(n_pairs), 0.0);
      rows.assign(static_cast<std::size_t>(n_pairs), std::vector<double>(static_cast<std::size_t>(n_next)));
      frees.assign(static_cast<std::size_t>(n_pairs), {});
      for (int s = 0; s < shape_.layer_size(h); ++s) {
        const int vs = var(h, s);
        const double bs = vs < 0 ? 0.0 : beta[vs];
        for (int a = 0; a < shape_.actions; ++a) {
          const std::size_t k = static_cast<std::size_t>(s * shape_.actions + a);
          const auto lt = log_target_.row(h, s, a);
          double m = -std::numeric_limits<double>::infinity();
          for (int n = 0; n < n_next; ++n) {
            const int vn = var(h + 1, n);
            w[static_cast<std::size_t>(n)] = lt[static_cast<std::size_t>(n)] + (vn < 0 ? 0.0 : beta[vn]) - bs;
            m = std::max(m, w[static_cast<std::size_t>(n)]);
          }
          for (double& v : w) v = std::max(std::exp(v - m), kWeightFloor);
          const double kl = project_row(w, set_.row(h, s, a), rows[k], hess ? &frees[k] : nullptr);
          log_zeta[k] = m - kl;
        }
      }
      const double top = *std::max_element(log_zeta.begin(), log_zeta.end());
      double z = 0.0;
      for (double v : log_zeta) z += std::exp(v - top);
      const double lse = top + std::log(z);
      e.value += lse;
      if (!grad && !q) continue;

      const int h_vars = var(h, 0);
      Eigen::VectorXd mean;
      if (hess) mean = Eigen::VectorXd::Zero(dim_);
      std::vector<std::pair<int, double>> g;  // sparse grad of ln zeta_sa
      for (int s = 0; s < shape_.layer_size(h); ++s)
        for (int a = 0; a < shape_.actions; ++a) {
          const std::size_t k = static_cast<std::size_t>(s * shape_.actions + a);
          const double x = std::exp(log_zeta[k] - lse);
          const auto& pr = rows[k];
          if (q) {
            auto dst = q->row(h, s, a);
            for (int n = 0; n < n_next; ++n) dst[static_cast<std::size_t>(n)] = x * pr[static_cast<std::size_t>(n)];
          }
          if (!grad || x == 0.0) continue;
          g.clear();
          for (int n = 0; n < n_next; ++n) {
            const int vn = var(h + 1, n);
            if (vn >= 0 && pr[static_cast<std::size_t>(n)] != 0.0) g.emplace_back(vn, pr[static_cast<std::size_t>(n)]);
          }
          if (h_vars >= 0) g.emplace_back(h_vars + s, -1.0);
          for (const auto& [i, gi] : g) e.grad[i] += x * gi;
          if (!hess) continue;
          for (const auto& [i, gi] : g) {
            mean[i] += x * gi;
            for (const auto& [j, gj] : g) e.hess(i, j) += x * gi * gj;
          }
          // Curvature of the row solution: J = diag(p_F) - p_F p_F^T / m_F.
          const auto& fr = frees[k];
          double free_mass = 0.0;
          for (int n = 0; n < n_next; ++n)
            if (fr[static_cast<std::size_t>(n)]) free_mass += pr[static_cast<std::size_t>(n)];
          if (free_mass <= 0.0 || var(h + 1, 0) < 0) continue;
          const int base = var(h + 1, 0);
          for (int i = 0; i < n_next; ++i) {
            if (!fr[static_cast<std::size_t>(i)]) continue;
            const double pi = pr[static_cast<std::size_t>(i)];
            e.hess(base + i, base + i) += x * pi;
            for (int j = 0; j < n_next; ++j)
              if (fr[static_cast<std::size_t>(j)])
                e.hess(base + i, base + j) -= x * pi * pr[static_cast<std::size_t>(j)] / free_mass;
          }
        }
      if (hess) e.hess -= mean * mean.transpose();
    }
    return e;
  }

 private:
  LayerShape shape_;
  const TransitionConfidenceSet& set_;
  TripleOccupancy log_target_;
  std::vector<int> offset_;
  int dim_ = 0;
};

}  // namespace

TripleOccupancy project_onto_polytope(const TripleOccupancy& target, const TransitionConfidenceSet& set,
                                      const ProjectionOptions& options, ProjectionReport* report,
                                      std::vector<double>* beta_io) {
  if (!(target.shape() == set.shape())) throw UsageError("projection target and confidence set differ in shape");
  const FlowDual dual(target, set);
  const int d = dual.dim();
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(d);
  if (beta_io && static_cast<int>(beta_io->size()) == d)
    for (int i = 0; i < d; ++i) beta[i] = (*beta_io)[static_cast<std::size_t>(i)];

  int iter = 0;
  double residual = 0.0;
  for (;; ++iter) {
    auto e = dual.evaluate(beta, true, true);
    residual = d > 0 ? e.grad.cwiseAbs().maxCoeff() : 0.0;
    if (residual <= options.tolerance) break;
    if (iter >= options.max_iterations) {
      std::ostringstream msg;
      msg << "occupancy projection did not converge: " << iter << " iterations, flow residual " << residual;
      throw NumericalError(msg.str());
    }
    const double ridge = 1e-10 * (1.0 + e.hess.diagonal().cwiseAbs().maxCoeff());
    e.hess.diagonal().array() += ridge;
    Eigen::VectorXd step = e.hess.ldlt().solve(-e.grad);
    double slope = e.grad.dot(step);
    if (!step.allFinite() || !(slope < 0.0)) {
      step = -e.grad;
      slope = -e.grad.squaredNorm();
    }
    // Armijo on F while its decrease is resolvable in floating point; below
    // that, a trial point is accepted only if it lowers the flow residual.
    const double noise = 1e-13 * std::max(1.0, std::abs(e.value));
    double alpha = 1.0;
    bool accepted = false;
    for (int k = 0; k < 60 && !accepted; ++k, alpha *= 0.5) {
      const Eigen::VectorXd trial = beta + alpha * step;
      const double f = dual.evaluate(trial, false, false).value;
      if (f <= e.value + 1e-4 * alpha * slope && e.value - f > noise) {
        accepted = true;
      } else if (f <= e.value + noise) {
        const auto t = dual.evaluate(trial, true, false);
        accepted = t.grad.cwiseAbs().maxCoeff() < residual;
      }
      if (accepted) beta = trial;
    }
    if (!accepted) {
      std::ostringstream msg;
      msg << "occupancy projection stalled: " << iter << " iterations, flow residual " << residual;
      throw NumericalError(msg.str());
    }
  }
  TripleOccupancy out(target.shape());
  dual.evaluate(beta, false, false, &out);
  if (report) *report = {iter, residual};
  if (beta_io) beta_io->assign(beta.data(), beta.data() + d);
  return out;
}

TripleOccupancy reweight(const TripleOccupancy& current, const LossTable& loss_hat, double eta) {
  const LayerShape& shape = current.shape();
  TripleOccupancy out = current;
  for (int h = 0; h <= shape.horizon; ++h)
    for (int s = 0; s < shape.layer_size(h); ++s)
      for (int a = 0; a < shape.actions; ++a) {
        const double scale = std::exp(-eta * loss_hat(h, s, a));
        for (double& v : out.row(h, s, a)) v = std::max(v * scale, kWeightFloor);
      }
  return out;
}

TripleOccupancy omd_step(const TripleOccupancy& current, const LossTable& loss_hat, double eta,
                         const TransitionConfidenceSet& set, const ProjectionOptions& options,
                         ProjectionReport* report, std::vector<double>* beta) {
  return project_onto_polytope(reweight(current, loss_hat, eta), set, options, report, beta);
}

}  // namespace sfrl
