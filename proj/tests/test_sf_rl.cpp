#include <doctest.h>

#include <cmath>
#include <memory>

#include "sfrl/errors.hpp"
#include "sfrl/harness.hpp"
#include "sfrl/sf_rl.hpp"
#include "sfrl/ucbvi.hpp"
#include "sfrl/uob_reps.hpp"
#include "test_support.hpp"

using namespace sfrl;
using namespace sfrl::testing;

namespace {

// s_0 -> u = (1,0) with probability one; (1,1) is never reached; a single
// layer-2 state w.
LayeredMdp scripted_mdp() {
  const LayerShape shape = LayerShape::make(2, 2, {2, 1});
  return LayeredMdp(shape, {{1.0, 0.0, 1.0, 0.0}, {1.0, 1.0, 1.0, 1.0}});
}

// Delegates to a real learner and checks, at every call, what crosses the
// interface against the driver's current pruned space.
class Spy final : public Learner {
 public:
  explicit Spy(Learner& inner) : inner_(inner) {}

  std::string name() const override { return inner_.name(); }
  void restart(const RestartConfig& config) override {
    ++restarts;
    inner_.restart(config);
  }
  Policy propose_policy(std::int64_t t) override { return inner_.propose_policy(t); }
  void observe(const Trajectory& o, std::int64_t t) override {
    ++observed;
    const PrunedSpace& space = driver->space();
    const LayerShape shape = space.shape();
    if (!(inner_.shape() == shape)) ++shape_mismatches;
    if (o.start_action < 0 || o.start_action >= shape.actions) ++bad_ids;
    for (int h = 1; h <= shape.horizon; ++h) {
      const Step& step = o.steps[static_cast<std::size_t>(h - 1)];
      if (step.state < 0 || step.state >= shape.layer_size(h) || step.action < 0 || step.action >= shape.actions) {
        ++bad_ids;
        continue;
      }
      if (space.is_aux(h, step.state)) {
        if (step.loss != 0.0) ++lossy_aux;
        continue;
      }
      if (!space.is_admitted({h, space.to_real(h, step.state)})) ++bad_ids;
    }
    inner_.observe(o, t);
  }
  bool accepts_confidence_set() const override { return inner_.accepts_confidence_set(); }
  void inject_confidence_set(TransitionConfidenceSet set) override { inner_.inject_confidence_set(std::move(set)); }
  const LayerShape& shape() const override { return inner_.shape(); }

  const SfRlDriver* driver = nullptr;
  int restarts = 0;
  int observed = 0;
  int bad_ids = 0;
  int shape_mismatches = 0;
  int lossy_aux = 0;

 private:
  Learner& inner_;
};

Environment invariant_env(std::uint64_t seed, int padded) {
  EnvFamilySpec spec;
  spec.horizon = 3;
  spec.actions = 2;
  spec.reachable = {3, 3, 2};
  spec.padded = {padded, padded, padded};
  spec.loss.kind = LossModel::Kind::stochastic;
  spec.seed = seed;
  return generate_env(spec).env;
}

}  // namespace

TEST_CASE("config validation") {
  const LayeredMdp mdp = scripted_mdp();
  const LossModel loss = LossModel::stochastic(LossTable(mdp.shape()));
  Ucbvi learner;
  for (double delta : {0.0, 1.0, -0.1, 1.5})
    CHECK_THROWS_AS(SfRlDriver({.delta = delta, .episodes = 5}, mdp, loss, learner, 1), ConfigError);
  CHECK_THROWS_AS(SfRlDriver({.eps = -0.01, .episodes = 5}, mdp, loss, learner, 1), ConfigError);
  CHECK_THROWS_AS(SfRlDriver({.episodes = -1}, mdp, loss, learner, 1), ConfigError);
  CHECK_THROWS_AS(SfRlDriver({.episodes = 5, .injection = InjectionMode::improved}, mdp, loss, learner, 1),
                  ConfigError);
  CHECK_THROWS_AS(run_direct({.delta = 2.0, .episodes = 5}, mdp, loss, learner, 1), ConfigError);
}

TEST_CASE("zero episodes") {
  const LayeredMdp mdp = scripted_mdp();
  const LossModel loss = LossModel::stochastic(LossTable(mdp.shape()));
  Ucbvi learner;
  const RunLog log = run_sf_rl({.episodes = 0}, mdp, loss, learner, 1);
  CHECK(log.episodes.empty());
  CHECK(log.admissions.empty());
  CHECK(log.restarts.empty());
  CHECK(log.checkpoints.empty());
  CHECK(log.final_expected_regret() == 0.0);
  CHECK(log.final_realized_regret() == 0.0);
}

TEST_CASE("the first episode prunes to auxiliary states") {
  Environment env = invariant_env(1, 2);
  Ucbvi inner;
  Spy spy(inner);
  SfRlDriver driver({.delta = 0.1, .episodes = 10, .audit = true}, env.mdp, env.loss, spy, 3);
  spy.driver = &driver;
  CHECK(driver.space().admitted_count() == 0);
  driver.run_episode();
  REQUIRE(driver.log().fed.size() == 1);
  const FedTrajectory& first = driver.log().fed[0];
  CHECK(first.episode == 1);
  for (int h = 1; h <= 3; ++h) {
    CHECK(first.shape.layer_size(h) == 1);
    CHECK(first.trajectory.steps[h - 1].state == 0);
    CHECK(first.trajectory.steps[h - 1].loss == 0.0);
  }
  CHECK(driver.log().episodes[0].pruned_loss == 0.0);
  CHECK(driver.log().episodes[0].realized_loss > 0.0);
}

TEST_CASE("scripted threshold crossing") {
  constexpr double delta = 0.03;
  // u and w are visited every episode, so their count at epoch t is t and
  // the first crossing is the least t with t - 1 > ln(2 H^2 t^2 / delta).
  std::int64_t expected_t = 0;
  for (std::int64_t t = 1; expected_t == 0; ++t)
    if (t - 1.0 > std::log(8.0 * t * t / delta)) expected_t = t;
  REQUIRE(expected_t == 12);

  const LayeredMdp mdp = scripted_mdp();
  const LossModel loss = LossModel::stochastic(LossTable(mdp.shape(), 0.0));
  Ucbvi learner;
  SfRlDriver driver({.delta = delta, .episodes = 30}, mdp, loss, learner, 7);
  // Before any admission |S| counts one auxiliary state per layer.
  CHECK(driver.learner_delta() == doctest::Approx(delta / (2.0 * 2 * 2)).epsilon(1e-15));
  const RunLog log = driver.run();
  CHECK(log.initial_delta == doctest::Approx(delta / 8.0).epsilon(1e-15));
  REQUIRE(log.restarts.size() == 1);
  CHECK(log.restarts[0].episode == expected_t);
  // u, w and the two auxiliary states.
  CHECK(log.restarts[0].pruned_size == 4);
  CHECK(log.restarts[0].delta == doctest::Approx(delta / (2.0 * 4 * 4)).epsilon(1e-15));
  REQUIRE(log.admissions.size() == 2);
  CHECK(log.admissions[0].episode == 12);
  CHECK(log.admissions[0].state == StateId{1, 0});
  CHECK(log.admissions[1].state == StateId{2, 0});
  CHECK(log.admissions[0].visits == 12);
  CHECK_FALSE(driver.space().is_admitted({1, 1}));
  CHECK(log.episodes[10].pruned_size == 2);
  CHECK(log.episodes[11].pruned_size == 4);
  CHECK(log.episodes[11].restarts == 1);
}

TEST_CASE("after full admission the learner sees the trajectory verbatim") {
  const LayeredMdp mdp = scripted_mdp();
  LossTable means(mdp.shape(), 0.25);
  for (int a = 0; a < 2; ++a) means(0, 0, a) = 0.0;
  const LossModel loss = LossModel::stochastic(means);
  Ucbvi learner;
  const RunLog log = run_sf_rl({.delta = 0.03, .episodes = 20, .audit = true}, mdp, loss, learner, 7);
  for (const FedTrajectory& f : log.fed) {
    if (f.episode <= 12) continue;
    const EpisodeRecord& rec = log.episodes[static_cast<std::size_t>(f.episode - 1)];
    CHECK(rec.pruned_loss == rec.realized_loss);
    CHECK(f.trajectory.steps[0].state == 0);
    CHECK(f.trajectory.steps[1].state == 0);
  }
}

TEST_CASE("no admissions under heavy pessimism") {
  Environment env = invariant_env(2, 3);
  Ucbvi learner;
  constexpr std::int64_t T = 2000;
  const RunLog log = run_sf_rl({.delta = 0.1, .eps = 1.0, .episodes = T}, env.mdp, env.loss, learner, 4);
  CHECK(log.restarts.empty());
  CHECK(log.admissions.empty());
  CHECK(log.final_expected_regret() <= 3.0 * T);
  CHECK(log.final_expected_regret() >= -1e-9);
  // The learner only ever sees the all-auxiliary chain.
  for (const EpisodeRecord& r : log.episodes) {
    CHECK(r.pruned_size == 3);
    CHECK(r.pruned_loss == 0.0);
  }
}

TEST_CASE("interface invariants over seeded runs") {
  for (const bool inject : {false, true})
    for (std::uint64_t seed = 1; seed <= 6; ++seed) {
      Environment env = invariant_env(seed, 4);
      std::unique_ptr<Learner> inner;
      if (inject)
        inner = std::make_unique<UobReps>();
      else
        inner = std::make_unique<Ucbvi>(UcbviBonus::arrival);
      Spy spy(*inner);
      constexpr std::int64_t T = 1500;
      constexpr double delta = 0.1;
      SfRlConfig cfg{.delta = delta, .episodes = T, .audit = true};
      if (inject) cfg.injection = InjectionMode::improved;
      SfRlDriver driver(cfg, env.mdp, env.loss, spy, 100 + seed);
      spy.driver = &driver;
      const RunLog log = driver.run();

      CHECK(spy.bad_ids == 0);
      CHECK(spy.shape_mismatches == 0);
      CHECK(spy.lossy_aux == 0);
      CHECK(spy.restarts == static_cast<int>(log.restarts.size()) + 1);
      CHECK(log.restarts.size() <= log.admissions.size() + 1);
      CHECK(spy.observed + static_cast<int>(log.restarts.size()) == T);

      // Padded states are unreachable and are never admitted.
      for (const AdmissionEvent& a : log.admissions) CHECK(a.state.index < (a.state.layer == 3 ? 2 : 3));

      // Every admission fires on a visit, so the count at admission is at
      // most one more than a count that failed the threshold at time <= T.
      const double stop = 2.0 * cfg.eps * T + 2.0 * std::log(2.0 * 9.0 * T * T / delta) + 2.0;
      for (const AdmissionEvent& a : log.admissions) CHECK(a.visits <= stop);

      int prev_size = 0, prev_restarts = 0;
      for (const EpisodeRecord& r : log.episodes) {
        CHECK(r.pruned_loss <= r.realized_loss + 1e-12);
        CHECK(r.pruned_size >= prev_size);
        CHECK(r.restarts >= prev_restarts);
        prev_size = r.pruned_size;
        prev_restarts = r.restarts;
      }
      CHECK(prev_size == driver.space().size());

      // Between restarts the fed shape is constant and matches the logged size.
      for (const FedTrajectory& f : log.fed) {
        const EpisodeRecord& rec = log.episodes[static_cast<std::size_t>(f.episode - 1)];
        CHECK(f.shape.inner_state_count() == rec.pruned_size);
        for (int h = 1; h <= 3; ++h) CHECK(f.trajectory.steps[h - 1].state < f.shape.layer_size(h));
      }
    }
}

TEST_CASE("runs are deterministic in the seed") {
  Environment env = invariant_env(3, 2);
  UobReps a, b;
  const SfRlConfig cfg{.delta = 0.1, .episodes = 300, .injection = InjectionMode::improved};
  const RunLog x = run_sf_rl(cfg, env.mdp, env.loss, a, 9);
  const RunLog y = run_sf_rl(cfg, env.mdp, env.loss, b, 9);
  REQUIRE(x.episodes.size() == y.episodes.size());
  for (std::size_t i = 0; i < x.episodes.size(); ++i) {
    CHECK(x.episodes[i].realized_loss == y.episodes[i].realized_loss);
    CHECK(x.episodes[i].expected_loss == y.episodes[i].expected_loss);
  }
  CHECK(x.final_expected_regret() == y.final_expected_regret());
}

TEST_CASE("regret checkpoints") {
  CHECK(dyadic_checkpoints(10) == std::vector<std::int64_t>{1, 2, 4, 8, 10});
  CHECK(dyadic_checkpoints(8) == std::vector<std::int64_t>{1, 2, 4, 8});
  CHECK(dyadic_checkpoints(0).empty());

  // Against a deterministic-loss stream the comparator is T times the best value.
  const LayeredMdp mdp = scripted_mdp();
  LossTable means(mdp.shape());
  means(1, 0, 0) = 0.2;
  means(1, 0, 1) = 0.6;
  means(2, 0, 0) = 0.5;
  means(2, 0, 1) = 0.1;
  const LossModel loss = LossModel::stochastic(means);
  Ucbvi learner;
  const RunLog log = run_direct({.episodes = 64}, mdp, loss, learner, 2);
  for (const Checkpoint& c : log.checkpoints) {
    CHECK(c.comparator == doctest::Approx(0.3 * c.episode).epsilon(1e-12));
    double cum = 0.0;
    for (std::int64_t t = 0; t < c.episode; ++t) cum += log.episodes[t].expected_loss;
    CHECK(c.expected_regret == doctest::Approx(cum - 0.3 * c.episode).epsilon(1e-12));
  }
}

TEST_CASE("regret grows no faster than sqrt(T) on a small fixed MDP") {
  // H = 2, two states per layer, two actions. Per-state action gaps are 0.45
  // so that the bonus, which scales with L rather than sqrt(L), stops
  // dominating well before T.
  const LayerShape shape = LayerShape::make(2, 2, {2, 2});
  const LayeredMdp mdp(shape, {{0.8, 0.2, 0.3, 0.7}, {0.7, 0.3, 0.4, 0.6, 0.6, 0.4, 0.2, 0.8}});
  LossTable means(shape);
  for (int h = 1; h <= 2; ++h) {
    means(h, 0, 0) = 0.05;
    means(h, 0, 1) = 0.5;
    means(h, 1, 0) = 0.95;
    means(h, 1, 1) = 0.5;
  }
  const LossModel loss = LossModel::stochastic(means);
  Ucbvi learner;
  constexpr std::int64_t T = 100000;
  const RunLog log = run_sf_rl({.delta = 0.1, .eps = 0.0, .episodes = T}, mdp, loss, learner, 17);
  REQUIRE(log.checkpoints.size() >= 4);
  std::vector<double> x, y;
  for (std::size_t i = log.checkpoints.size() - 4; i < log.checkpoints.size(); ++i) {
    const Checkpoint& c = log.checkpoints[i];
    x.push_back(std::log(double(c.episode)));
    y.push_back(std::log(std::max(c.expected_regret, 1e-9)));
  }
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < 4; ++i) mx += x[i] / 4, my += y[i] / 4;
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < 4; ++i) sxy += (x[i] - mx) * (y[i] - my), sxx += (x[i] - mx) * (x[i] - mx);
  const double slope = sxy / sxx;
  MESSAGE("log-log regret slope over the last four checkpoints: " << slope);
  // A flat regret / sqrt(T) ratio means slope <= 1/2; allow sampling noise.
  CHECK(slope <= 0.6);
  CHECK(log.final_expected_regret() > 0.0);
}
