#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "sfrl/learner.hpp"
#include "sfrl/mdp.hpp"
#include "sfrl/pruned_space.hpp"
#include "sfrl/sf_rl.hpp"

namespace sfrl {

struct LossGenerator {
  LossModel::Kind kind = LossModel::Kind::stochastic;
  /// Stochastic means are drawn uniformly from [lo, hi].
  double lo = 0.0;
  double hi = 1.0;
  /// Adversarial: schedule length, phase length and per-episode noise. Two
  /// base tables alternate every `block` episodes; each episode adds uniform
  /// noise of total width `noise`, clamped to [0,1].
  std::int64_t length = 0;
  std::int64_t block = 100;
  double noise = 0.2;
};

/// Random layered MDP with a reachable core and padded states. In every
/// layer 1..H the core occupies indices 0..reachable[h-1]-1 and the padding
/// follows; core rows put Dirichlet(1) mass on the next layer's core only.
/// The core is drawn from `seed` before anything touches the padding, so two
/// specs that differ only in `padded` share the core exactly.
struct EnvFamilySpec {
  int horizon = 2;
  int actions = 2;
  std::vector<int> reachable;  // layers 1..H
  std::vector<int> padded;     // layers 1..H, empty means none
  LossGenerator loss;
  std::uint64_t seed = 0;
};

struct Environment {
  LayeredMdp mdp;
  LossModel loss;
};

struct GeneratedEnv {
  Environment env;
  /// max over policies of q^{P,pi}(s), [h][s] for h = 0..H.
  std::vector<std::vector<double>> reach;
};

GeneratedEnv generate_env(const EnvFamilySpec& spec);

EnvFamilySpec env_family_from_json(const nlohmann::json& j);
nlohmann::json env_family_to_json(const EnvFamilySpec& spec);

/// Environment file contents: either an explicit MDP or a "generator" block.
/// `default_length` fills a missing adversarial schedule length.
Environment environment_from_json(const nlohmann::json& j, std::int64_t default_length = 0);
nlohmann::json environment_to_json(const Environment& env);
Environment load_environment(const std::string& path, std::int64_t default_length = 0);
void save_environment(const std::string& path, const Environment& env);

struct AlgorithmSpec {
  std::string name;
  std::string algo = "ucbvi";  // ucbvi | ucbvi-arrival | uob-reps
  bool reduction = true;       // false: run on the full space directly
  bool inject = false;
  double bonus_c = 1.0;
};

/// Throws ConfigError for unknown algorithm names.
std::unique_ptr<Learner> make_learner(const AlgorithmSpec& spec);
RunLog execute_run(const AlgorithmSpec& algo, SfRlConfig config, const Environment& env, std::uint64_t seed);

void write_run_csv(const std::string& path, const RunLog& log);
nlohmann::json run_summary(const RunLog& log);
void write_run_json(const std::string& path, const RunLog& log);

struct PlanEnv {
  std::string name;
  nlohmann::json spec;  // environment file contents
};

struct ExperimentPlan {
  std::string output = "out";
  std::vector<PlanEnv> envs;
  std::vector<AlgorithmSpec> algorithms;
  std::vector<std::uint64_t> seeds;
  std::int64_t episodes = 1000;
  double delta = 0.1;
  double eps = 0.0;
  std::vector<std::int64_t> checkpoints;
  int workers = 1;
};

/// Relative "path" entries resolve against `base_dir`.
ExperimentPlan plan_from_json(const nlohmann::json& j, const std::string& base_dir = ".");
ExperimentPlan load_plan(const std::string& path);

struct RunResult {
  std::string id;
  std::string env;
  std::string algorithm;
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;
  double final_expected_regret = 0.0;
  double final_realized_regret = 0.0;
  int pruned_size = 0;
  int restarts = 0;
};

/// One CSV and one JSON per run plus aggregate.csv in the output directory.
/// A failing run is reported in the aggregate and does not stop the grid.
std::vector<RunResult> run_plan(const ExperimentPlan& plan);

struct ValidationCheck {
  std::string name;
  bool passed = false;
  double measured = 0.0;
  double threshold = 0.0;
  std::string detail;
};

struct ValidationReport {
  std::string suite;
  bool passed = true;
  std::vector<ValidationCheck> checks;

  void add(ValidationCheck c);
  nlohmann::json to_json() const;
};

const std::vector<std::string>& validation_suites();

/// Three layers, at most three states each, two actions, Bernoulli losses,
/// and a strict subset of states admitted.
struct Lemma1Fixture {
  Environment env;
  PrunedSpace space;
  Policy pruned_policy;
};
Lemma1Fixture lemma1_fixture();

/// Exact distribution over pruned trajectories, keyed by the flattened
/// (start action, then state, action, loss per layer) sequence.
using TrajectoryDistribution = std::vector<std::pair<std::vector<double>, double>>;
/// Sample on the full MDP under the extension of `pruned_policy`, then prune.
TrajectoryDistribution enumerate_pruned_from_full(const Environment& env, const PrunedSpace& space,
                                                  const Policy& pruned_policy);
/// Execute `pruned_policy` on (P^bot, l^bot) directly.
TrajectoryDistribution enumerate_on_pruned(const Environment& env, const PrunedSpace& space,
                                           const Policy& pruned_policy);

/// Two-layer fixture: layer 1 has a state with reach probability 0.05
/// (index 1) next to one with 0.95; layer 2 states are reached with at
/// least 0.2 from either.
Environment soundness_fixture();
/// Small stochastic MDP used for coverage checks.
Environment coverage_fixture();

/// Adversarial fixture with eight reachable states (H=3, two actions), three
/// of which sit behind `rare`-probability edges. Two loss tables alternate
/// in quarters of the run with small per-episode noise.
Environment injection_fixture(std::int64_t episodes, double rare = 0.01);

struct ValidationOptions {
  std::uint64_t seed = 12345;
  int lemma3_instances = 200;
  int lemma4_runs = 1000;
  std::int64_t lemma4_episodes = 300;
  int lemma8_sequences = 10000;
  std::int64_t lemma8_length = 10000;
  int lemma2_runs = 500;
  std::int64_t lemma2_episodes = 2000;
  double delta = 0.1;
};

ValidationReport validate_lemma1_exact(const ValidationOptions& options = {});
ValidationReport validate_lemma3_sandwich(const ValidationOptions& options = {});
ValidationReport validate_lemma4_coverage(const ValidationOptions& options = {});
ValidationReport validate_lemma8_mc(const ValidationOptions& options = {});
ValidationReport validate_lemma2_soundness(const ValidationOptions& options = {});

/// Throws UsageError listing the suites when `suite` is unknown.
ValidationReport validate_suite(const std::string& suite, const ValidationOptions& options = {});

}  // namespace sfrl
