#include "sfrl/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <thread>

#include "sfrl/errors.hpp"
#include "sfrl/reachability.hpp"
#include "sfrl/ucbvi.hpp"
#include "sfrl/uob_reps.hpp"

namespace sfrl {

using nlohmann::json;

namespace {

std::vector<double> dirichlet_row(Rng& rng, int n) {
  std::vector<double> w(static_cast<std::size_t>(n));
  double total = 0.0;
  for (double& v : w) {
    v = -std::log(1.0 - rng.uniform());
    total += v;
  }
  for (double& v : w) v /= total;
  return w;
}

double uniform_in(Rng& rng, double lo, double hi) { return lo + (hi - lo) * rng.uniform(); }

}  // namespace

GeneratedEnv generate_env(const EnvFamilySpec& spec) {
  const int H = spec.horizon;
  const int A = spec.actions;
  if (H < 1 || A < 1) throw ConfigError("generator needs a positive horizon and action count");
  if (static_cast<int>(spec.reachable.size()) != H) throw ConfigError("generator needs one reachable count per layer");
  if (!spec.padded.empty() && static_cast<int>(spec.padded.size()) != H)
    throw ConfigError("generator needs one padded count per layer");
  std::vector<int> core(static_cast<std::size_t>(H) + 2, 1), inner;
  for (int h = 1; h <= H; ++h) {
    const int r = spec.reachable[static_cast<std::size_t>(h - 1)];
    const int p = spec.padded.empty() ? 0 : spec.padded[static_cast<std::size_t>(h - 1)];
    if (r < 1 || p < 0) throw ConfigError("generator layer counts must be positive (reachable) and nonnegative (padded)");
    core[static_cast<std::size_t>(h)] = r;
    inner.push_back(r + p);
  }
  const LayerShape shape = LayerShape::make(H, A, inner);
  const auto is_core = [&](int h, int s) { return s < core[static_cast<std::size_t>(h)]; };

  Rng core_rng(spec.seed);
  Rng pad_rng(spec.seed ^ 0x9E3779B97F4A7C15ull);

  std::vector<std::vector<double>> rows(static_cast<std::size_t>(H));
  for (int h = 0; h < H; ++h)
    rows[h].assign(static_cast<std::size_t>(shape.layer_size(h) * A * shape.layer_size(h + 1)), 0.0);
  const auto row_ptr = [&](int h, int s, int a) {
    return rows[h].data() + static_cast<std::size_t>((s * A + a) * shape.layer_size(h + 1));
  };
  for (int h = 0; h < H; ++h)
    for (int s = 0; s < core[static_cast<std::size_t>(h)]; ++s)
      for (int a = 0; a < A; ++a) {
        const auto w = dirichlet_row(core_rng, core[static_cast<std::size_t>(h) + 1]);
        std::copy(w.begin(), w.end(), row_ptr(h, s, a));
      }
  for (int h = 0; h < H; ++h)
    for (int s = core[static_cast<std::size_t>(h)]; s < shape.layer_size(h); ++s)
      for (int a = 0; a < A; ++a) {
        const auto w = dirichlet_row(pad_rng, shape.layer_size(h + 1));
        std::copy(w.begin(), w.end(), row_ptr(h, s, a));
      }
  LayeredMdp mdp(shape, std::move(rows));

  const LossGenerator& g = spec.loss;
  if (!(g.lo >= 0.0 && g.hi <= 1.0 && g.lo <= g.hi)) throw ConfigError("loss range must lie within [0,1]");
  const auto fill = [&](LossTable& table, Rng& rng, bool core_part, auto&& draw) {
    for (int h = 1; h <= H; ++h)
      for (int s = 0; s < shape.layer_size(h); ++s) {
        if (is_core(h, s) != core_part) continue;
        for (int a = 0; a < A; ++a) table(h, s, a) = draw(rng);
      }
  };
  const auto range = [&](Rng& rng) { return uniform_in(rng, g.lo, g.hi); };

  if (g.kind == LossModel::Kind::stochastic) {
    LossTable means(shape);
    fill(means, core_rng, true, range);
    fill(means, pad_rng, false, range);
    std::vector<std::vector<double>> reach = max_reach_probabilities(mdp);
    return {{std::move(mdp), LossModel::stochastic(std::move(means))}, std::move(reach)};
  }
  if (g.length < 1 || g.block < 1) throw ConfigError("adversarial generator needs positive length and block");
  std::vector<LossTable> base(2, LossTable(shape));
  for (auto& b : base) fill(b, core_rng, true, range);
  for (auto& b : base) fill(b, pad_rng, false, range);
  std::vector<LossTable> schedule;
  schedule.reserve(static_cast<std::size_t>(g.length));
  for (std::int64_t t = 1; t <= g.length; ++t) {
    const LossTable& b = base[static_cast<std::size_t>(((t - 1) / g.block) % 2)];
    LossTable table(shape);
    for (int part = 1; part >= 0; --part) {
      Rng& rng = part ? core_rng : pad_rng;
      for (int h = 1; h <= H; ++h)
        for (int s = 0; s < shape.layer_size(h); ++s) {
          if (is_core(h, s) != static_cast<bool>(part)) continue;
          for (int a = 0; a < A; ++a)
            table(h, s, a) = std::clamp(b(h, s, a) + g.noise * (rng.uniform() - 0.5), 0.0, 1.0);
        }
    }
    schedule.push_back(std::move(table));
  }
  std::vector<std::vector<double>> reach = max_reach_probabilities(mdp);
  return {{std::move(mdp), LossModel::adversarial(std::move(schedule))}, std::move(reach)};
}

EnvFamilySpec env_family_from_json(const json& j) {
  EnvFamilySpec spec;
  try {
    spec.horizon = j.at("horizon").get<int>();
    spec.actions = j.at("actions").get<int>();
    spec.reachable = j.at("reachable").get<std::vector<int>>();
    spec.padded = j.value("padded", std::vector<int>{});
    spec.seed = j.value("seed", std::uint64_t{0});
    if (j.contains("loss")) {
      const json& l = j.at("loss");
      const std::string kind = l.value("kind", std::string("stochastic"));
      if (kind == "stochastic")
        spec.loss.kind = LossModel::Kind::stochastic;
      else if (kind == "adversarial")
        spec.loss.kind = LossModel::Kind::adversarial;
      else
        throw ConfigError("unknown loss kind '" + kind + "'");
      spec.loss.lo = l.value("lo", 0.0);
      spec.loss.hi = l.value("hi", 1.0);
      spec.loss.length = l.value("length", std::int64_t{0});
      spec.loss.block = l.value("block", std::int64_t{100});
      spec.loss.noise = l.value("noise", 0.2);
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad generator block: ") + e.what());
  }
  return spec;
}

json env_family_to_json(const EnvFamilySpec& spec) {
  json loss = {{"kind", spec.loss.kind == LossModel::Kind::stochastic ? "stochastic" : "adversarial"},
               {"lo", spec.loss.lo},
               {"hi", spec.loss.hi}};
  if (spec.loss.kind == LossModel::Kind::adversarial) {
    loss["length"] = spec.loss.length;
    loss["block"] = spec.loss.block;
    loss["noise"] = spec.loss.noise;
  }
  return {{"horizon", spec.horizon}, {"actions", spec.actions}, {"reachable", spec.reachable},
          {"padded", spec.padded},   {"seed", spec.seed},       {"loss", loss}};
}

namespace {

LossTable loss_table_from_json(const json& layers, const LayerShape& shape) {
  if (!layers.is_array() || static_cast<int>(layers.size()) != shape.horizon)
    throw ConfigError("loss tables need one entry per layer 1..H");
  LossTable table(shape);
  for (int h = 1; h <= shape.horizon; ++h) {
    const json& layer = layers[static_cast<std::size_t>(h - 1)];
    if (static_cast<int>(layer.size()) != shape.layer_size(h)) throw ConfigError("loss table layer size mismatch");
    for (int s = 0; s < shape.layer_size(h); ++s) {
      const auto values = layer[static_cast<std::size_t>(s)].get<std::vector<double>>();
      if (static_cast<int>(values.size()) != shape.actions) throw ConfigError("loss table action count mismatch");
      for (int a = 0; a < shape.actions; ++a) table(h, s, a) = values[static_cast<std::size_t>(a)];
    }
  }
  return table;
}

json loss_table_to_json(const LossTable& table) {
  const LayerShape& shape = table.shape();
  json layers = json::array();
  for (int h = 1; h <= shape.horizon; ++h) {
    json layer = json::array();
    for (int s = 0; s < shape.layer_size(h); ++s) {
      const auto r = table.row(h, s);
      layer.push_back(std::vector<double>(r.begin(), r.end()));
    }
    layers.push_back(layer);
  }
  return layers;
}

}  // namespace

Environment environment_from_json(const json& j, std::int64_t default_length) {
  if (j.contains("generator")) {
    EnvFamilySpec spec = env_family_from_json(j.at("generator"));
    if (spec.loss.kind == LossModel::Kind::adversarial && spec.loss.length == 0) spec.loss.length = default_length;
    return generate_env(spec).env;
  }
  try {
    const int H = j.at("horizon").get<int>();
    const int A = j.at("actions").get<int>();
    const LayerShape shape = LayerShape::make(H, A, j.at("layers").get<std::vector<int>>());
    const json& tr = j.at("transitions");
    if (static_cast<int>(tr.size()) != H) throw ConfigError("transitions need one entry per layer 0..H-1");
    std::vector<std::vector<double>> rows(static_cast<std::size_t>(H));
    for (int h = 0; h < H; ++h) {
      const json& layer = tr[static_cast<std::size_t>(h)];
      if (static_cast<int>(layer.size()) != shape.layer_size(h)) throw ConfigError("transition layer size mismatch");
      for (int s = 0; s < shape.layer_size(h); ++s) {
        const json& state = layer[static_cast<std::size_t>(s)];
        if (static_cast<int>(state.size()) != A) throw ConfigError("transition action count mismatch");
        for (int a = 0; a < A; ++a) {
          const auto p = state[static_cast<std::size_t>(a)].get<std::vector<double>>();
          if (static_cast<int>(p.size()) != shape.layer_size(h + 1)) throw ConfigError("transition row length mismatch");
          rows[h].insert(rows[h].end(), p.begin(), p.end());
        }
      }
    }
    LayeredMdp mdp(shape, std::move(rows));
    const json& loss = j.at("loss");
    const std::string kind = loss.value("kind", std::string("stochastic"));
    if (kind == "stochastic") return {std::move(mdp), LossModel::stochastic(loss_table_from_json(loss.at("means"), shape))};
    if (kind == "adversarial") {
      std::vector<LossTable> schedule;
      for (const json& t : loss.at("schedule")) schedule.push_back(loss_table_from_json(t, shape));
      return {std::move(mdp), LossModel::adversarial(std::move(schedule))};
    }
    throw ConfigError("unknown loss kind '" + kind + "'");
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad environment: ") + e.what());
  }
}

json environment_to_json(const Environment& env) {
  const LayerShape& shape = env.mdp.shape();
  std::vector<int> layers;
  for (int h = 1; h <= shape.horizon; ++h) layers.push_back(shape.layer_size(h));
  json tr = json::array();
  for (int h = 0; h < shape.horizon; ++h) {
    json layer = json::array();
    for (int s = 0; s < shape.layer_size(h); ++s) {
      json state = json::array();
      for (int a = 0; a < shape.actions; ++a) {
        const auto r = env.mdp.row(h, s, a);
        state.push_back(std::vector<double>(r.begin(), r.end()));
      }
      layer.push_back(state);
    }
    tr.push_back(layer);
  }
  json loss;
  if (env.loss.kind() == LossModel::Kind::stochastic) {
    loss = {{"kind", "stochastic"}, {"means", loss_table_to_json(env.loss.expected(1))}};
  } else {
    json schedule = json::array();
    for (std::int64_t t = 1; t <= env.loss.length(); ++t) schedule.push_back(loss_table_to_json(env.loss.expected(t)));
    loss = {{"kind", "adversarial"}, {"schedule", schedule}};
  }
  return {{"horizon", shape.horizon}, {"actions", shape.actions}, {"layers", layers}, {"transitions", tr},
          {"loss", loss}};
}

namespace {

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

}  // namespace

Environment load_environment(const std::string& path, std::int64_t default_length) {
  return environment_from_json(read_json_file(path), default_length);
}

void save_environment(const std::string& path, const Environment& env) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path);
  out << environment_to_json(env).dump(1) << '\n';
}

std::unique_ptr<Learner> make_learner(const AlgorithmSpec& spec) {
  if (spec.algo == "ucbvi") return std::make_unique<Ucbvi>(UcbviBonus::standard, spec.bonus_c);
  if (spec.algo == "ucbvi-arrival") return std::make_unique<Ucbvi>(UcbviBonus::arrival, spec.bonus_c);
  if (spec.algo == "uob-reps") return std::make_unique<UobReps>();
  throw ConfigError("unknown algorithm '" + spec.algo + "' (expected ucbvi, ucbvi-arrival or uob-reps)");
}

RunLog execute_run(const AlgorithmSpec& algo, SfRlConfig config, const Environment& env, std::uint64_t seed) {
  auto learner = make_learner(algo);
  config.injection = algo.inject ? InjectionMode::improved : InjectionMode::off;
  if (!algo.reduction) {
    if (algo.inject) throw ConfigError("confidence injection needs the reduction");
    return run_direct(config, env.mdp, env.loss, *learner, seed);
  }
  return run_sf_rl(config, env.mdp, env.loss, *learner, seed);
}

void write_run_csv(const std::string& path, const RunLog& log) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path);
  out << "episode,cum_realized_loss,cum_expected_regret,cum_realized_regret,pruned_size,restarts\n";
  char buf[256];
  for (const Checkpoint& c : log.checkpoints) {
    std::snprintf(buf, sizeof buf, "%lld,%.12g,%.12g,%.12g,%d,%d\n", static_cast<long long>(c.episode),
                  c.cum_realized_loss, c.expected_regret, c.realized_regret, c.pruned_size, c.restarts);
    out << buf;
  }
}

json run_summary(const RunLog& log) {
  json admissions = json::array();
  for (const auto& a : log.admissions)
    admissions.push_back({{"episode", a.episode}, {"layer", a.state.layer}, {"index", a.state.index}, {"visits", a.visits}});
  json restarts = json::array();
  for (const auto& r : log.restarts)
    restarts.push_back({{"episode", r.episode}, {"delta", r.delta}, {"pruned_size", r.pruned_size}});
  json checkpoints = json::array();
  for (const auto& c : log.checkpoints)
    checkpoints.push_back({{"episode", c.episode},
                           {"cum_realized_loss", c.cum_realized_loss},
                           {"cum_expected_loss", c.cum_expected_loss},
                           {"comparator", c.comparator},
                           {"expected_regret", c.expected_regret},
                           {"realized_regret", c.realized_regret}});
  const SfRlConfig& cfg = log.config;
  return {{"learner", log.learner},
          {"seed", log.seed},
          {"config",
           {{"delta", cfg.delta},
            {"eps", cfg.eps},
            {"episodes", cfg.episodes},
            {"injection", cfg.injection == InjectionMode::improved ? "improved" : "off"},
            {"admission_offset", cfg.admission_offset},
            {"reset_confidence_on_restart", cfg.reset_confidence_on_restart}}},
          {"initial_delta", log.initial_delta},
          {"final_expected_regret", log.final_expected_regret()},
          {"final_realized_regret", log.final_realized_regret()},
          {"pruned_size", log.episodes.empty() ? 0 : log.episodes.back().pruned_size},
          {"restarts", restarts},
          {"admissions", admissions},
          {"checkpoints", checkpoints},
          {"empty_intersections", log.empty_intersections},
          {"repaired_rows", log.repaired_rows}};
}

void write_run_json(const std::string& path, const RunLog& log) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path);
  out << run_summary(log).dump(2) << '\n';
}

ExperimentPlan plan_from_json(const json& j, const std::string& base_dir) {
  ExperimentPlan plan;
  try {
    plan.output = j.value("output", std::string("out"));
    plan.episodes = j.value("episodes", std::int64_t{1000});
    plan.delta = j.value("delta", 0.1);
    plan.eps = j.value("eps", 0.0);
    plan.checkpoints = j.value("checkpoints", std::vector<std::int64_t>{});
    plan.workers = j.value("workers", 1);
    plan.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
    for (const json& e : j.at("envs")) {
      PlanEnv env;
      env.name = e.at("name").get<std::string>();
      if (e.contains("path")) {
        std::filesystem::path p = e.at("path").get<std::string>();
        if (p.is_relative()) p = std::filesystem::path(base_dir) / p;
        env.spec = read_json_file(p.string());
      } else if (e.contains("generator")) {
        env.spec = {{"generator", e.at("generator")}};
      } else {
        env.spec = e;
      }
      plan.envs.push_back(std::move(env));
    }
    for (const json& a : j.at("algorithms")) {
      AlgorithmSpec spec;
      spec.algo = a.at("algo").get<std::string>();
      spec.name = a.value("name", spec.algo);
      const std::string reduction = a.value("reduction", std::string("sfrl"));
      if (reduction != "sfrl" && reduction != "none") throw ConfigError("reduction must be sfrl or none");
      spec.reduction = reduction == "sfrl";
      spec.inject = a.value("inject", false);
      spec.bonus_c = a.value("bonus_c", 1.0);
      plan.algorithms.push_back(spec);
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad plan: ") + e.what());
  }
  if (plan.envs.empty() || plan.algorithms.empty() || plan.seeds.empty()) throw ConfigError("plan grid is empty");
  return plan;
}

ExperimentPlan load_plan(const std::string& path) {
  return plan_from_json(read_json_file(path), std::filesystem::path(path).parent_path().string());
}

std::vector<RunResult> run_plan(const ExperimentPlan& plan) {
  struct Job {
    const PlanEnv* env;
    const AlgorithmSpec* algo;
    std::uint64_t seed;
    std::string id;
  };
  std::vector<Job> jobs;
  std::set<std::string> ids;
  for (const auto& env : plan.envs)
    for (const auto& algo : plan.algorithms)
      for (std::uint64_t seed : plan.seeds) {
        std::string id = env.name + "__" + algo.name + "__s" + std::to_string(seed);
        if (!ids.insert(id).second) throw ConfigError("duplicate run id " + id);
        jobs.push_back({&env, &algo, seed, std::move(id)});
      }
  if (jobs.empty()) throw ConfigError("plan grid is empty");
  const std::filesystem::path dir(plan.output);
  std::filesystem::create_directories(dir);

  std::vector<RunResult> results(jobs.size());
  std::atomic<std::size_t> next{0};
  const auto worker = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < jobs.size();) {
      const Job& job = jobs[i];
      RunResult& r = results[i];
      r.id = job.id;
      r.env = job.env->name;
      r.algorithm = job.algo->name;
      r.seed = job.seed;
      try {
        const Environment env = environment_from_json(job.env->spec, plan.episodes);
        SfRlConfig config;
        config.delta = plan.delta;
        config.eps = plan.eps;
        config.episodes = plan.episodes;
        config.checkpoints = plan.checkpoints;
        const RunLog log = execute_run(*job.algo, config, env, job.seed);
        write_run_csv((dir / (job.id + ".csv")).string(), log);
        write_run_json((dir / (job.id + ".json")).string(), log);
        r.ok = true;
        r.final_expected_regret = log.final_expected_regret();
        r.final_realized_regret = log.final_realized_regret();
        r.pruned_size = log.episodes.empty() ? 0 : log.episodes.back().pruned_size;
        r.restarts = static_cast<int>(log.restarts.size());
      } catch (const std::exception& e) {
        r.ok = false;
        r.error = e.what();
      }
    }
  };
  const int n_workers = std::max(1, std::min<int>(plan.workers, static_cast<int>(jobs.size())));
  std::vector<std::thread> pool;
  for (int w = 1; w < n_workers; ++w) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();

  std::ofstream agg(dir / "aggregate.csv");
  if (!agg) throw ConfigError("cannot write aggregate.csv");
  agg << "run_id,env,algorithm,seed,status,final_expected_regret,final_realized_regret,pruned_size,restarts,error\n";
  char buf[128];
  for (const RunResult& r : results) {
    std::snprintf(buf, sizeof buf, "%.12g,%.12g", r.final_expected_regret, r.final_realized_regret);
    std::string err = r.error;
    for (char& c : err)
      if (c == ',' || c == '\n') c = ';';
    agg << r.id << ',' << r.env << ',' << r.algorithm << ',' << r.seed << ',' << (r.ok ? "ok" : "error") << ','
        << buf << ',' << r.pruned_size << ',' << r.restarts << ',' << err << '\n';
  }
  return results;
}

void ValidationReport::add(ValidationCheck c) {
  passed = passed && c.passed;
  checks.push_back(std::move(c));
}

json ValidationReport::to_json() const {
  json list = json::array();
  for (const auto& c : checks)
    list.push_back({{"name", c.name},
                    {"passed", c.passed},
                    {"measured", c.measured},
                    {"threshold", c.threshold},
                    {"detail", c.detail}});
  return {{"suite", suite}, {"passed", passed}, {"checks", list}};
}

const std::vector<std::string>& validation_suites() {
  static const std::vector<std::string> names = {"lemma1-exact", "lemma3-sandwich", "lemma4-coverage", "lemma8-mc",
                                                 "lemma2-soundness"};
  return names;
}

namespace {

Policy random_policy(const LayerShape& shape, Rng& rng) {
  Policy pi(shape);
  for (int h = 0; h <= shape.horizon; ++h)
    for (int s = 0; s < shape.layer_size(h); ++s) {
      const auto w = dirichlet_row(rng, shape.actions);
      for (int a = 0; a < shape.actions; ++a) pi(h, s, a) = w[static_cast<std::size_t>(a)];
    }
  return pi;
}

// Auxiliary states play the auxiliary action.
void pin_aux_rows(Policy& pi, const PrunedSpace& space) {
  for (int h = 1; h <= space.horizon(); ++h) {
    auto row = pi.row(h, space.aux_index(h));
    std::fill(row.begin(), row.end(), 0.0);
    row[PrunedSpace::kAuxAction] = 1.0;
  }
}

std::vector<double> flatten(const Trajectory& o) {
  std::vector<double> key{static_cast<double>(o.start_action)};
  for (const Step& s : o.steps) {
    key.push_back(s.state);
    key.push_back(s.action);
    key.push_back(s.loss);
  }
  return key;
}

// Exhaustive enumeration of episodes with Bernoulli losses; `leaf` maps each
// complete trajectory to the key it is accumulated under.
template <class Leaf>
TrajectoryDistribution enumerate(const LayeredMdp& mdp, const Policy& pi, const LossTable& means, Leaf&& leaf) {
  std::map<std::vector<double>, double> dist;
  const int H = mdp.horizon();
  Trajectory o;
  o.steps.resize(static_cast<std::size_t>(H));
  std::function<void(int, int, double)> walk = [&](int h, int s, double prob) {
    if (prob == 0.0) return;
    Step& step = o.steps[static_cast<std::size_t>(h - 1)];
    step.state = s;
    for (int a = 0; a < mdp.num_actions(); ++a) {
      const double pa = pi(h, s, a);
      if (pa == 0.0) continue;
      step.action = a;
      const double m = means(h, s, a);
      for (int l = 0; l <= 1; ++l) {
        const double pl = l ? m : 1.0 - m;
        if (pl == 0.0) continue;
        step.loss = l;
        if (h == H) {
          dist[leaf(o)] += prob * pa * pl;
          continue;
        }
        const auto row = mdp.row(h, s, a);
        for (std::size_t n = 0; n < row.size(); ++n)
          if (row[n] > 0.0) walk(h + 1, static_cast<int>(n), prob * pa * pl * row[n]);
      }
    }
  };
  for (int a0 = 0; a0 < mdp.num_actions(); ++a0) {
    const double pa = pi(0, 0, a0);
    if (pa == 0.0) continue;
    o.start_action = a0;
    const auto row = mdp.row(0, 0, a0);
    for (std::size_t n = 0; n < row.size(); ++n)
      if (row[n] > 0.0) walk(1, static_cast<int>(n), pa * row[n]);
  }
  return {dist.begin(), dist.end()};
}

double binomial_se(double p, int n) { return std::sqrt(p * (1.0 - p) / n); }

std::string fmt(double v) {
  std::ostringstream s;
  s << v;
  return s.str();
}

}  // namespace

Lemma1Fixture lemma1_fixture() {
  EnvFamilySpec spec;
  spec.horizon = 3;
  spec.actions = 2;
  spec.reachable = {3, 3, 2};
  spec.loss.lo = 0.1;
  spec.loss.hi = 0.9;
  spec.seed = 2024;
  Lemma1Fixture f{generate_env(spec).env, PrunedSpace(3, 2), Policy()};
  const std::vector<StateId> admitted = {{1, 0}, {1, 2}, {2, 1}, {3, 0}};
  f.space.admit(admitted);
  Rng rng(99);
  f.pruned_policy = random_policy(f.space.shape(), rng);
  pin_aux_rows(f.pruned_policy, f.space);
  return f;
}

TrajectoryDistribution enumerate_pruned_from_full(const Environment& env, const PrunedSpace& space,
                                                  const Policy& pruned_policy) {
  const Policy pi = extend_policy(pruned_policy, space, env.mdp.shape());
  return enumerate(env.mdp, pi, env.loss.expected(1),
                   [&](const Trajectory& o) { return flatten(prune_trajectory(o, space)); });
}

TrajectoryDistribution enumerate_on_pruned(const Environment& env, const PrunedSpace& space,
                                           const Policy& pruned_policy) {
  const LayeredMdp pruned = build_pruned_transition(env.mdp, space);
  return enumerate(pruned, pruned_policy, pruned_loss(env.loss.expected(1), space),
                   [](const Trajectory& o) { return flatten(o); });
}

Environment soundness_fixture() {
  const LayerShape shape = LayerShape::make(2, 2, {2, 2});
  std::vector<std::vector<double>> rows = {
      {0.95, 0.05, 0.95, 0.05},
      {0.5, 0.5, 0.7, 0.3, 0.5, 0.5, 0.3, 0.7},
  };
  LossTable means(shape);
  const double m[2][2][2] = {{{0.2, 0.6}, {0.5, 0.1}}, {{0.3, 0.7}, {0.8, 0.4}}};
  for (int h = 1; h <= 2; ++h)
    for (int s = 0; s < 2; ++s)
      for (int a = 0; a < 2; ++a) means(h, s, a) = m[h - 1][s][a];
  return {LayeredMdp(shape, std::move(rows)), LossModel::stochastic(std::move(means))};
}

Environment coverage_fixture() {
  EnvFamilySpec spec;
  spec.horizon = 2;
  spec.actions = 2;
  spec.reachable = {2, 2};
  spec.seed = 31;
  return generate_env(spec).env;
}

Environment injection_fixture(std::int64_t episodes, double rare) {
  if (episodes < 4) throw ConfigError("injection fixture needs at least 4 episodes");
  const LayerShape shape = LayerShape::make(3, 2, {3, 3, 2});
  const double r = rare;
  // The last state of layers 1 and 2 and the second state of layer 3 are
  // only reached through r-probability edges, so they are admitted late.
  std::vector<std::vector<double>> rows = {
      {0.6, 0.4 - r, r, 0.3, 0.7 - r, r},
      {0.5, 0.5 - r, r, 0.2, 0.8 - r, r, 0.7, 0.3 - r, r, 0.4, 0.6 - r, r, 0.3, 0.3, 0.4, 0.5, 0.25, 0.25},
      {1 - 2 * r, 2 * r, 0.6, 0.4, 0.8, 0.2, 1 - 2 * r, 2 * r, 0.5, 0.5, 0.5, 0.5},
  };
  LayeredMdp mdp(shape, std::move(rows));
  Rng rng(77);
  std::vector<LossTable> base(2, LossTable(shape));
  for (auto& b : base)
    for (int h = 1; h <= 3; ++h)
      for (int s = 0; s < shape.layer_size(h); ++s)
        for (int a = 0; a < 2; ++a) b(h, s, a) = rng.uniform();
  std::vector<LossTable> schedule;
  schedule.reserve(static_cast<std::size_t>(episodes));
  const std::int64_t block = episodes / 4;
  for (std::int64_t t = 1; t <= episodes; ++t) {
    LossTable x(shape);
    const LossTable& b = base[static_cast<std::size_t>(((t - 1) / block) % 2)];
    for (int h = 1; h <= 3; ++h)
      for (int s = 0; s < shape.layer_size(h); ++s)
        for (int a = 0; a < 2; ++a) x(h, s, a) = std::clamp(b(h, s, a) + 0.2 * (rng.uniform() - 0.5), 0.0, 1.0);
    schedule.push_back(std::move(x));
  }
  return {std::move(mdp), LossModel::adversarial(std::move(schedule))};
}

ValidationReport validate_lemma1_exact(const ValidationOptions&) {
  ValidationReport report{"lemma1-exact", true, {}};
  const Lemma1Fixture f = lemma1_fixture();
  const auto lhs = enumerate_pruned_from_full(f.env, f.space, f.pruned_policy);
  const auto rhs = enumerate_on_pruned(f.env, f.space, f.pruned_policy);
  std::map<std::vector<double>, double> diff;
  for (const auto& [k, p] : lhs) diff[k] += p;
  for (const auto& [k, p] : rhs) diff[k] -= p;
  double worst = 0.0;
  for (const auto& [k, d] : diff) worst = std::max(worst, std::abs(d));
  report.add({"max_entry_deviation", worst < 1e-12, worst, 1e-12,
              std::to_string(diff.size()) + " distinct pruned trajectories"});
  double total = 0.0;
  for (const auto& [k, p] : lhs) total += p;
  report.add({"total_mass", std::abs(total - 1.0) < 1e-12, total, 1.0, "sample-then-prune mass"});
  return report;
}

ValidationReport validate_lemma3_sandwich(const ValidationOptions& options) {
  ValidationReport report{"lemma3-sandwich", true, {}};
  Rng rng(options.seed);
  double min_gap = 1e300, min_slack = 1e300;
  int failures = 0;
  for (int i = 0; i < options.lemma3_instances; ++i) {
    EnvFamilySpec spec;
    spec.horizon = 1 + static_cast<int>(rng.uniform() * 4);
    spec.actions = 1 + static_cast<int>(rng.uniform() * 3);
    for (int h = 0; h < spec.horizon; ++h) spec.reachable.push_back(1 + static_cast<int>(rng.uniform() * 3));
    spec.seed = rng.engine()();
    const Environment env = generate_env(spec).env;
    PrunedSpace space(spec.horizon, spec.actions);
    std::vector<StateId> admit;
    for (int h = 1; h <= spec.horizon; ++h)
      for (int s = 0; s < env.mdp.layer_size(h); ++s)
        if (rng.uniform() < 0.5) admit.push_back({h, s});
    space.admit(admit);
    const Policy pruned_pi = random_policy(space.shape(), rng);
    const Policy pi = extend_policy(pruned_pi, space, env.mdp.shape());
    const LossTable& loss = env.loss.expected(1);
    const OccupancyMeasure q = compute_occupancy(env.mdp, pi);
    const OccupancyMeasure q_bot = compute_occupancy(build_pruned_transition(env.mdp, space), pruned_pi);
    const double gap = expected_loss(q, loss) - expected_loss(q_bot, pruned_loss(loss, space));
    double outside = 0.0;
    for (int h = 1; h <= spec.horizon; ++h)
      for (int s = 0; s < env.mdp.layer_size(h); ++s)
        if (!space.is_admitted({h, s})) outside += state_mass(q, h, s);
    const double bound = spec.horizon * outside;
    min_gap = std::min(min_gap, gap);
    min_slack = std::min(min_slack, bound - gap);
    if (gap < -1e-10 || gap > bound + 1e-10) ++failures;
  }
  report.add({"lower_bound", min_gap >= -1e-10, min_gap, -1e-10, "min over instances of the value gap"});
  report.add({"upper_bound", min_slack >= -1e-10, min_slack, -1e-10, "min over instances of bound minus gap"});
  report.add({"instances", failures == 0 && options.lemma3_instances >= 1, static_cast<double>(options.lemma3_instances), 1,
              std::to_string(failures) + " violating instances"});
  return report;
}

ValidationReport validate_lemma4_coverage(const ValidationOptions& options) {
  ValidationReport report{"lemma4-coverage", true, {}};
  const Environment env = coverage_fixture();
  int covered = 0;
  std::int64_t empty = 0, repaired = 0;
  for (int r = 0; r < options.lemma4_runs; ++r) {
    Ucbvi learner;
    SfRlConfig config;
    config.delta = options.delta;
    config.eps = 0.0;
    config.episodes = options.lemma4_episodes;
    config.monitor_coverage = true;
    SfRlDriver driver(config, env.mdp, env.loss, learner, options.seed + static_cast<std::uint64_t>(r));
    while (driver.next_episode() <= config.episodes) driver.run_episode();
    if (driver.log().coverage_failures == 0) ++covered;
    empty += driver.log().empty_intersections;
    repaired += driver.log().repaired_rows;
  }
  const double rate = static_cast<double>(covered) / options.lemma4_runs;
  const double threshold = 1.0 - options.delta - 3.0 * binomial_se(options.delta, options.lemma4_runs);
  report.add({"coverage_rate", rate >= threshold, rate, threshold,
              std::to_string(options.lemma4_runs) + " runs of " + std::to_string(options.lemma4_episodes) +
                  " episodes; empty intersections " + std::to_string(empty) + ", repaired rows " +
                  std::to_string(repaired)});
  return report;
}

ValidationReport validate_lemma8_mc(const ValidationOptions& options) {
  ValidationReport report{"lemma8-mc", true, {}};
  const std::vector<double> deltas = {0.01, 0.05};
  for (double p : {0.05, 0.5}) {
    const auto rates =
        lemma8_monte_carlo(bernoulli_sequence(p), deltas, options.lemma8_length, options.lemma8_sequences,
                           options.seed + static_cast<std::uint64_t>(p * 1000));
    for (const auto& r : rates) {
      const double threshold = r.delta + 3.0 * binomial_se(r.delta, r.trials);
      const std::string tag = "p=" + fmt(p) + " delta=" + fmt(r.delta);
      report.add({"upper " + tag, r.upper_rate <= threshold, r.upper_rate, threshold,
                  std::to_string(r.trials) + " sequences of length " + std::to_string(options.lemma8_length)});
      report.add({"lower " + tag, r.lower_rate <= threshold, r.lower_rate, threshold,
                  std::to_string(r.trials) + " sequences of length " + std::to_string(options.lemma8_length)});
    }
  }
  return report;
}

ValidationReport validate_lemma2_soundness(const ValidationOptions& options) {
  ValidationReport report{"lemma2-soundness", true, {}};
  const Environment env = soundness_fixture();
  const double eps = 0.1;
  const auto reach = max_reach_probabilities(env.mdp);
  const double rare = reach[1][1];
  double others = 1.0;
  for (int h = 1; h <= env.mdp.horizon(); ++h)
    for (int s = 0; s < env.mdp.layer_size(h); ++s)
      if (!(h == 1 && s == 1)) others = std::min(others, reach[h][s]);
  report.add({"fixture_rare_state", std::abs(rare - eps / 2) < 1e-12, rare, eps / 2, "max_pi q of the rare state"});
  report.add({"fixture_other_states", others >= 2 * eps, others, 2 * eps, "min over other states of max_pi q"});
  int rare_admitted = 0, common_admitted = 0;
  for (int r = 0; r < options.lemma2_runs; ++r) {
    Ucbvi learner;
    SfRlConfig config;
    config.delta = options.delta;
    config.eps = eps;
    config.episodes = options.lemma2_episodes;
    SfRlDriver driver(config, env.mdp, env.loss, learner, options.seed + static_cast<std::uint64_t>(r));
    while (driver.next_episode() <= config.episodes) driver.run_episode();
    rare_admitted += driver.space().is_admitted({1, 1});
    common_admitted += driver.space().is_admitted({1, 0});
  }
  const double rate = static_cast<double>(rare_admitted) / options.lemma2_runs;
  const double threshold = options.delta + 3.0 * binomial_se(options.delta, options.lemma2_runs);
  report.add({"rare_admission_rate", rate <= threshold, rate, threshold,
              std::to_string(options.lemma2_runs) + " runs; common state admitted in " +
                  std::to_string(common_admitted)});
  return report;
}

ValidationReport validate_suite(const std::string& suite, const ValidationOptions& options) {
  if (suite == "lemma1-exact") return validate_lemma1_exact(options);
  if (suite == "lemma3-sandwich") return validate_lemma3_sandwich(options);
  if (suite == "lemma4-coverage") return validate_lemma4_coverage(options);
  if (suite == "lemma8-mc") return validate_lemma8_mc(options);
  if (suite == "lemma2-soundness") return validate_lemma2_soundness(options);
  std::string names;
  for (const auto& n : validation_suites()) names += (names.empty() ? "" : ", ") + n;
  throw UsageError("unknown suite '" + suite + "'; available: " + names);
}

}  // namespace sfrl
