// Command-line front end: single runs, plan sweeps and validation suites.

#include <CLI11.hpp>
#include <filesystem>
#include <iostream>

#include "sfrl/errors.hpp"
#include "sfrl/harness.hpp"

namespace {

int cmd_run(const std::string& env_path, const sfrl::AlgorithmSpec& algo, sfrl::SfRlConfig config,
            std::uint64_t seed, const std::string& out) {
  const sfrl::Environment env = sfrl::load_environment(env_path, config.episodes);
  const sfrl::RunLog log = sfrl::execute_run(algo, config, env, seed);
  std::filesystem::create_directories(out);
  const std::string stem = (std::filesystem::path(out) / (algo.name + "_s" + std::to_string(seed))).string();
  sfrl::write_run_csv(stem + ".csv", log);
  sfrl::write_run_json(stem + ".json", log);
  std::cout << "final expected regret " << log.final_expected_regret() << ", restarts " << log.restarts.size()
            << ", pruned size " << (log.episodes.empty() ? 0 : log.episodes.back().pruned_size) << "\n"
            << "wrote " << stem << ".csv and " << stem << ".json\n";
  return 0;
}

int cmd_sweep(const std::string& plan_path, int workers) {
  sfrl::ExperimentPlan plan = sfrl::load_plan(plan_path);
  if (workers > 0) plan.workers = workers;
  const auto results = sfrl::run_plan(plan);
  int failed = 0;
  for (const auto& r : results)
    if (!r.ok) {
      ++failed;
      std::cerr << r.id << ": " << r.error << "\n";
    }
  std::cout << results.size() - failed << "/" << results.size() << " runs succeeded; aggregate in "
            << (std::filesystem::path(plan.output) / "aggregate.csv").string() << "\n";
  return failed == 0 ? 0 : 1;
}

int cmd_validate(const std::string& suite, const sfrl::ValidationOptions& options) {
  const sfrl::ValidationReport report = sfrl::validate_suite(suite, options);
  std::cout << report.to_json().dump(2) << "\n";
  return report.passed ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"State-free episodic RL experiments"};
  app.require_subcommand(1);

  std::string env_path, out = "out", algo_name = "ucbvi", reduction = "sfrl";
  sfrl::SfRlConfig config;
  config.episodes = 1000;
  std::uint64_t seed = 1;
  bool inject = false;
  double bonus_c = 1.0;
  auto* run = app.add_subcommand("run", "Run one learner on one environment");
  run->add_option("--env", env_path, "Environment file (JSON)")->required()->check(CLI::ExistingFile);
  run->add_option("--algo", algo_name, "ucbvi | ucbvi-arrival | uob-reps")
      ->check(CLI::IsMember({"ucbvi", "ucbvi-arrival", "uob-reps"}));
  run->add_option("--t", config.episodes, "Number of episodes")->check(CLI::NonNegativeNumber);
  run->add_option("--delta", config.delta, "Confidence in (0,1)");
  run->add_option("--eps", config.eps, "Pessimism level");
  run->add_option("--seed", seed, "Random seed");
  run->add_option("--out", out, "Output directory");
  run->add_option("--reduction", reduction, "sfrl | none")->check(CLI::IsMember({"sfrl", "none"}));
  run->add_flag("--inject", inject, "Inject improved confidence sets (uob-reps)");
  run->add_option("--bonus-c", bonus_c, "UCBVI bonus constant");

  std::string plan_path;
  int workers = 0;
  auto* sweep = app.add_subcommand("sweep", "Run an experiment plan");
  sweep->add_option("--plan", plan_path, "Plan file (JSON)")->required()->check(CLI::ExistingFile);
  sweep->add_option("--workers", workers, "Parallel runs (overrides the plan)");

  std::string suite;
  sfrl::ValidationOptions voptions;
  auto* validate = app.add_subcommand("validate", "Run a validation suite and print a JSON report");
  validate->add_option("--suite", suite, "Suite name")->required();
  validate->add_option("--seed", voptions.seed, "Base seed");

  CLI11_PARSE(app, argc, argv);
  try {
    if (*run) {
      sfrl::AlgorithmSpec algo;
      algo.algo = algo_name;
      algo.name = (reduction == "none" ? "direct-" : "sfrl-") + algo_name + (inject ? "-inject" : "");
      algo.reduction = reduction == "sfrl";
      algo.inject = inject;
      algo.bonus_c = bonus_c;
      return cmd_run(env_path, algo, config, seed, out);
    }
    if (*sweep) return cmd_sweep(plan_path, workers);
    if (*validate) return cmd_validate(suite, voptions);
  } catch (const sfrl::UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
