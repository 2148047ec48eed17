#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "sfrl/errors.hpp"
#include "sfrl/harness.hpp"
#include "test_support.hpp"

using namespace sfrl;
using namespace sfrl::testing;
namespace fs = std::filesystem;

namespace {

std::string read_file(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("sfrl_harness_" + name);
  fs::remove_all(dir);
  return dir;
}

EnvFamilySpec family(std::vector<int> padded, std::uint64_t seed = 5) {
  EnvFamilySpec spec;
  spec.horizon = 3;
  spec.actions = 2;
  spec.reachable = {3, 3, 2};
  spec.padded = std::move(padded);
  spec.seed = seed;
  return spec;
}

}  // namespace

TEST_CASE("padded states are exactly unreachable and the core does not depend on padding") {
  const GeneratedEnv base = generate_env(family({}));
  for (const auto& pad : {std::vector<int>{4, 4, 4}, std::vector<int>{0, 7, 1}}) {
    const GeneratedEnv g = generate_env(family(pad));
    const LayerShape& shape = g.env.mdp.shape();
    for (int h = 1; h <= 3; ++h) {
      CHECK(shape.layer_size(h) == base.env.mdp.shape().layer_size(h) + pad[h - 1]);
      for (int s = base.env.mdp.shape().layer_size(h); s < shape.layer_size(h); ++s) CHECK(g.reach[h][s] == 0.0);
    }
    for (int h = 0; h < 3; ++h)
      for (int s = 0; s < base.env.mdp.shape().layer_size(h); ++s)
        for (int a = 0; a < 2; ++a)
          for (int n = 0; n < shape.layer_size(h + 1); ++n) {
            const double expected = n < base.env.mdp.shape().layer_size(h + 1) ? base.env.mdp.prob(h, s, a, n) : 0.0;
            CHECK(g.env.mdp.prob(h, s, a, n) == expected);
          }
    for (int h = 1; h <= 3; ++h)
      for (int s = 0; s < base.env.mdp.shape().layer_size(h); ++s)
        for (int a = 0; a < 2; ++a) CHECK(g.env.loss.expected(1)(h, s, a) == base.env.loss.expected(1)(h, s, a));
  }
}

TEST_CASE("ground-truth reach matches exhaustive search") {
  const GeneratedEnv g = generate_env(family({2, 1, 3}, 9));
  const LayerShape& shape = g.env.mdp.shape();
  std::vector<std::vector<double>> best;
  for (int h = 0; h <= 3; ++h) best.emplace_back(static_cast<std::size_t>(shape.layer_size(h)), 0.0);
  for_each_deterministic_policy(shape, [&](const Policy& pi) {
    const auto occ = state_occupancy_by_paths(g.env.mdp, pi);
    for (int h = 0; h <= 3; ++h)
      for (int s = 0; s < shape.layer_size(h); ++s) best[h][s] = std::max(best[h][s], occ[h][s]);
  });
  for (int h = 0; h <= 3; ++h)
    for (int s = 0; s < shape.layer_size(h); ++s) CHECK(g.reach[h][s] == doctest::Approx(best[h][s]).epsilon(1e-12));
}

TEST_CASE("generator errors") {
  EnvFamilySpec bad = family({});
  bad.reachable = {3, 3};
  CHECK_THROWS_AS(generate_env(bad), ConfigError);
  bad = family({1, 1});
  CHECK_THROWS_AS(generate_env(bad), ConfigError);
  bad = family({});
  bad.loss.kind = LossModel::Kind::adversarial;
  bad.loss.length = 0;
  CHECK_THROWS_AS(generate_env(bad), ConfigError);
}

TEST_CASE("environment JSON round trip") {
  EnvFamilySpec spec = family({1, 0, 2});
  spec.loss.kind = LossModel::Kind::adversarial;
  spec.loss.length = 30;
  spec.loss.block = 7;
  const EnvFamilySpec back = env_family_from_json(env_family_to_json(spec));
  CHECK(back.horizon == spec.horizon);
  CHECK(back.reachable == spec.reachable);
  CHECK(back.padded == spec.padded);
  CHECK(back.loss.length == 30);
  CHECK(back.loss.block == 7);

  const Environment env = generate_env(spec).env;
  const fs::path dir = scratch_dir("roundtrip");
  fs::create_directories(dir);
  save_environment((dir / "env.json").string(), env);
  const Environment loaded = load_environment((dir / "env.json").string());
  const LayerShape& shape = env.mdp.shape();
  CHECK(loaded.mdp.shape() == shape);
  CHECK(loaded.loss.length() == 30);
  for (int h = 0; h < 3; ++h)
    for (int s = 0; s < shape.layer_size(h); ++s)
      for (int a = 0; a < 2; ++a)
        for (int n = 0; n < shape.layer_size(h + 1); ++n) CHECK(loaded.mdp.prob(h, s, a, n) == env.mdp.prob(h, s, a, n));
  for (std::int64_t t : {1, 15, 30})
    for (int h = 1; h <= 3; ++h)
      for (int s = 0; s < shape.layer_size(h); ++s)
        for (int a = 0; a < 2; ++a) CHECK(loaded.loss.expected(t)(h, s, a) == env.loss.expected(t)(h, s, a));

  CHECK_THROWS_AS(environment_from_json(nlohmann::json{{"horizon", 2}}), ConfigError);
  CHECK_THROWS_AS(load_environment((dir / "missing.json").string()), ConfigError);
}

TEST_CASE("generator block inherits the run length") {
  const nlohmann::json j = {{"generator",
                             {{"horizon", 2}, {"actions", 2}, {"reachable", {2, 2}}, {"loss", {{"kind", "adversarial"}}}}}};
  CHECK(environment_from_json(j, 40).loss.length() == 40);
}

TEST_CASE("learner factory") {
  CHECK(make_learner({.algo = "ucbvi"})->name() == "ucbvi");
  CHECK(make_learner({.algo = "ucbvi-arrival"})->name() == "ucbvi-arrival");
  CHECK(make_learner({.algo = "uob-reps"})->name() == "uob-reps");
  CHECK_THROWS_AS(make_learner({.algo = "q-learning"}), ConfigError);
}

TEST_CASE("plans write per-run files and a deterministic aggregate") {
  const fs::path dir = scratch_dir("plan");
  const nlohmann::json plan_json = {
      {"output", dir.string()},
      {"episodes", 200},
      {"seeds", {3}},
      {"envs", {{{"name", "small"}, {"generator", env_family_to_json(family({2, 2, 2}))}}}},
      {"algorithms", {{{"algo", "ucbvi"}}}}};
  const ExperimentPlan plan = plan_from_json(plan_json);
  const auto results = run_plan(plan);
  REQUIRE(results.size() == 1);
  CHECK(results[0].ok);
  CHECK(results[0].id == "small__ucbvi__s3");
  std::size_t files = 0;
  for (const auto& e : fs::directory_iterator(dir)) files += e.is_regular_file();
  CHECK(files == 3);
  const std::string csv = read_file(dir / "small__ucbvi__s3.csv");
  CHECK(csv.rfind("episode,cum_realized_loss,cum_expected_regret,cum_realized_regret,pruned_size,restarts\n", 0) == 0);
  const auto summary = nlohmann::json::parse(read_file(dir / "small__ucbvi__s3.json"));
  CHECK(summary.at("final_expected_regret").get<double>() == doctest::Approx(results[0].final_expected_regret));

  const std::string before = read_file(dir / "aggregate.csv");
  run_plan(plan);
  CHECK(read_file(dir / "small__ucbvi__s3.csv") == csv);
  CHECK(read_file(dir / "aggregate.csv") == before);
}

TEST_CASE("a 3 x 2 x 5 grid gives 30 aggregate records") {
  const fs::path dir = scratch_dir("grid");
  nlohmann::json envs = nlohmann::json::array();
  for (int i = 0; i < 3; ++i)
    envs.push_back({{"name", "e" + std::to_string(i)}, {"generator", env_family_to_json(family({i, i, i}, 10 + i))}});
  const nlohmann::json plan_json = {{"output", dir.string()},
                                    {"episodes", 40},
                                    {"seeds", {1, 2, 3, 4, 5}},
                                    {"envs", envs},
                                    {"algorithms", {{{"algo", "ucbvi"}}, {{"algo", "ucbvi"}, {"name", "direct"}, {"reduction", "none"}}}}};
  const auto results = run_plan(plan_from_json(plan_json));
  CHECK(results.size() == 30);
  std::istringstream agg(read_file(dir / "aggregate.csv"));
  int lines = 0;
  for (std::string line; std::getline(agg, line);) ++lines;
  CHECK(lines == 31);
  for (const auto& r : results) CHECK(r.ok);
}

TEST_CASE("plan errors") {
  const nlohmann::json base = {{"seeds", {1}},
                               {"envs", {{{"name", "e"}, {"generator", env_family_to_json(family({}))}}}},
                               {"algorithms", {{{"algo", "ucbvi"}}}}};
  nlohmann::json empty = base;
  empty["seeds"] = nlohmann::json::array();
  CHECK_THROWS_AS(plan_from_json(empty), ConfigError);
  nlohmann::json dup = base;
  dup["algorithms"] = {{{"algo", "ucbvi"}}, {{"algo", "ucbvi"}}};
  CHECK_THROWS_AS(run_plan(plan_from_json(dup)), ConfigError);
  nlohmann::json reduction = base;
  reduction["algorithms"] = {{{"algo", "ucbvi"}, {"reduction", "maybe"}}};
  CHECK_THROWS_AS(plan_from_json(reduction), ConfigError);

  // An unknown learner fails its run without stopping the grid.
  const fs::path dir = scratch_dir("bad_algo");
  nlohmann::json bad = base;
  bad["output"] = dir.string();
  bad["episodes"] = 10;
  bad["algorithms"] = {{{"algo", "nope"}}, {{"algo", "ucbvi"}}};
  const auto results = run_plan(plan_from_json(bad));
  REQUIRE(results.size() == 2);
  CHECK_FALSE(results[0].ok);
  CHECK(results[1].ok);
}

TEST_CASE("validation suite lookup") {
  CHECK_THROWS_AS(validate_suite("lemma99"), UsageError);
  CHECK(validation_suites().size() == 5);
  const ValidationReport r = validate_suite(validation_suites().front());
  CHECK(r.passed);
  CHECK_FALSE(r.checks.empty());
}
