// atac: generate instances, run the game and practical solvers, sweep β,
// compare against CQL on bandits and run the DQRA stability study.

#include <CLI11.hpp>
#include <charconv>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "atac/analysis.hpp"
#include "atac/errors.hpp"
#include "atac/instances.hpp"
#include "atac/io.hpp"
#include "atac/rng.hpp"
#include "atac/solvers.hpp"
#include "atac/two_timescale.hpp"

namespace fs = std::filesystem;
using namespace atac;

namespace {

/// Bad flag combinations or missing inputs; exit code 2.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct EnvArgs {
  std::string mdp_file;
  std::string instance = "chain";
  std::string behavior = "default";
  std::size_t states = 5;
  std::size_t actions = 2;
  std::size_t width = 4;
  std::size_t height = 4;
  double gamma = 0.9;
  std::uint64_t instance_seed = 0;
};

struct PracticalArgs {
  double w = 0.5;
  double tau = 0.005;
  double eta_fast = 0.0005;
  double eta_slow = 0.0005 * 1e-3;
  std::size_t batch = 256;
  std::size_t epochs = 10;
  std::size_t steps = 100;
  std::size_t warm_start_epochs = 0;
  std::string optimizer = "adam";
  bool identical_init = false;
};

// What a command works on, resolved from a file or a built-in name.
struct Env {
  std::shared_ptr<const Mdp> mdp;
  TabularPolicy behavior;
  std::optional<FunctionClass> fclass;
  std::optional<BanditGame> game;
  std::optional<PracticalConfig> practical;
  std::size_t dataset_size = 0;
  std::size_t iterations = 0;
};

void add_env_options(CLI::App* sub, EnvArgs& e) {
  sub->add_option("--mdp", e.mdp_file, "MDP JSON file (overrides --instance)");
  sub->add_option("--instance", e.instance, "built-in instance")
      ->check(CLI::IsMember(instance_names()));
  sub->add_option("--behavior", e.behavior,
                  "behavior policy JSON file, 'uniform', or 'default' for the instance's own");
  sub->add_option("--states", e.states, "states (random, chain)");
  sub->add_option("--actions", e.actions, "actions (random)");
  sub->add_option("--width", e.width, "gridworld width");
  sub->add_option("--height", e.height, "gridworld height");
  sub->add_option("--gamma", e.gamma, "discount (random, chain, gridworld)");
  sub->add_option("--instance-seed", e.instance_seed, "seed of the random instance");
}

void add_practical_options(CLI::App* sub, PracticalArgs& p) {
  sub->add_option("--w", p.w, "DQRA weight");
  sub->add_option("--tau", p.tau, "target smoothing");
  sub->add_option("--eta-fast", p.eta_fast, "critic step size");
  sub->add_option("--eta-slow", p.eta_slow, "actor step size");
  sub->add_option("--batch", p.batch, "minibatch size");
  sub->add_option("--epochs", p.epochs, "epochs");
  sub->add_option("--steps-per-epoch", p.steps, "gradient steps per epoch");
  sub->add_option("--warm-start-epochs", p.warm_start_epochs, "critic pre-training epochs");
  sub->add_option("--optimizer", p.optimizer, "sgd | adam")->check(CLI::IsMember({"sgd", "adam"}));
  sub->add_flag("--identical-critic-init", p.identical_init, "start both critics equal");
}

void require_file(const std::string& path, const char* what) {
  if (!fs::is_regular_file(path)) throw UsageError(std::string(what) + " not found: " + path);
}

Env resolve_env(const EnvArgs& e) {
  Env env;
  if (!e.mdp_file.empty()) {
    require_file(e.mdp_file, "MDP file");
    env.mdp = std::make_shared<const Mdp>(io::load_mdp(e.mdp_file));
    env.behavior = TabularPolicy::uniform(env.mdp->num_states(), env.mdp->num_actions());
  } else if (e.instance == "random") {
    env.mdp = std::make_shared<const Mdp>(random_mdp(e.states, e.actions, e.gamma, e.instance_seed));
  } else if (e.instance == "chain") {
    env.mdp = std::make_shared<const Mdp>(chain_mdp(e.states, e.gamma));
  } else if (e.instance == "gridworld") {
    env.mdp = std::make_shared<const Mdp>(gridworld_mdp(e.width, e.height, e.gamma));
  } else if (e.instance == "bandit-appendix-c") {
    auto b = bandit_appendix_c();
    env.mdp = std::make_shared<const Mdp>(std::move(b.mdp));
    env.behavior = std::move(b.behavior);
    env.game = std::move(b.game);
  } else if (e.instance == "divergence") {
    auto d = divergence_instance();
    env.mdp = std::make_shared<const Mdp>(std::move(d.mdp));
    env.behavior = std::move(d.behavior);
    env.fclass = d.config.critic_class;
    env.dataset_size = d.dataset_size;
    env.practical = std::move(d.config);
  } else if (e.instance == "robust-pi") {
    auto r = robust_pi_instance();
    env.mdp = std::make_shared<const Mdp>(std::move(r.mdp));
    env.behavior = std::move(r.behavior);
    env.fclass = std::move(r.fclass);
    env.dataset_size = r.dataset_size;
    env.iterations = r.iterations;
  } else if (e.instance == "coverage") {
    auto c = coverage_instance();
    env.mdp = std::make_shared<const Mdp>(std::move(c.mdp));
    env.behavior = std::move(c.behavior);
  } else if (e.instance == "pessimism-contrast") {
    auto p = pessimism_contrast_bandit();
    env.mdp = std::make_shared<const Mdp>(std::move(p.mdp));
    env.behavior = std::move(p.behavior);
    env.fclass = std::move(p.fclass);
  } else {
    throw UsageError("unknown instance " + e.instance);
  }
  const std::size_t S = env.mdp->num_states(), A = env.mdp->num_actions();
  if (env.behavior.num_states() == 0 || e.behavior == "uniform")
    env.behavior = TabularPolicy::uniform(S, A);
  if (e.behavior != "uniform" && e.behavior != "default") {
    require_file(e.behavior, "behavior file");
    env.behavior = io::load_policy(e.behavior);
  }
  require_compatible(*env.mdp, env.behavior, "behavior policy");
  return env;
}

std::string env_name(const EnvArgs& e) {
  return e.mdp_file.empty() ? e.instance : fs::path(e.mdp_file).stem().string();
}

std::vector<double> parse_list(const std::string& text, const char* what) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(item.data(), item.data() + item.size(), v);
    if (ec != std::errc() || ptr != item.data() + item.size())
      throw UsageError(std::string("bad ") + what + " entry '" + item + "'");
    out.push_back(v);
  }
  if (out.empty()) throw UsageError(std::string("empty ") + what + " list");
  return out;
}

std::optional<double> parse_eta(const std::string& text) {
  if (text == "auto") return std::nullopt;
  return parse_list(text, "eta").at(0);
}

PracticalConfig practical_config(const PracticalArgs& p, const Env& env, bool explicit_w,
                                 const CLI::App* sub) {
  PracticalConfig c = env.practical.value_or(PracticalConfig{});
  auto given = [&](const char* name) { return sub->count(name) > 0; };
  if (!env.practical || explicit_w) c.w = p.w;
  if (!env.practical || given("--tau")) c.tau = p.tau;
  if (!env.practical || given("--eta-fast")) c.eta_fast = p.eta_fast;
  if (!env.practical || given("--eta-slow")) c.eta_slow = p.eta_slow;
  if (!env.practical || given("--batch")) c.minibatch_size = p.batch;
  if (!env.practical || given("--epochs")) c.epochs = p.epochs;
  if (!env.practical || given("--steps-per-epoch")) c.steps_per_epoch = p.steps;
  if (!env.practical || given("--warm-start-epochs")) c.warm_start_epochs = p.warm_start_epochs;
  if (!env.practical || given("--optimizer"))
    c.optimizer.kind = p.optimizer == "sgd" ? OptimizerKind::PlainSGD : OptimizerKind::AdaptiveMoments;
  if (p.identical_init) c.identical_critic_init = true;
  return c;
}

std::string default_root() {
  const char* root = std::getenv("ATAC_OUTPUT_ROOT");
  return root && *root ? root : "atac-output";
}

fs::path output_dir(const std::string& out, const std::string& stem) {
  fs::path dir = out.empty() ? fs::path(default_root()) / stem : fs::path(out);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw io::IoError("cannot create output directory " + dir.string());
  return dir;
}

// key = value lines, one per fact.
class Summary {
 public:
  void add(const std::string& key, const std::string& value) { text_ += key + " = " + value + "\n"; }
  void add(const std::string& key, double value) { add(key, io::format_summary(value)); }
  void add_count(const std::string& key, std::size_t value) { add(key, std::to_string(value)); }
  void warnings(const std::vector<std::string>& w) {
    if (w.empty()) return;
    text_ += "[warnings]\n";
    for (const auto& line : w) text_ += line + "\n";
  }
  void write(const fs::path& dir) const {
    io::write_text(dir / "summary", text_);
    std::cout << text_;
  }

 private:
  std::string text_;
};

// Resolved options, without the output location.
void write_snapshot(const fs::path& dir, const CLI::App* sub) {
  std::stringstream in(sub->config_to_str(true, false));
  std::string text = "[" + sub->get_name() + "]\n";
  for (std::string line; std::getline(in, line);)
    if (line.rfind("out=", 0) != 0) text += line + "\n";
  io::write_text(dir / "config.snapshot", text);
}

void add_rpi(Summary& s, double j, double j_mu) {
  try {
    s.add("rpi_score", rpi_score(j, j_mu));
  } catch (const UndefinedScore&) {
    s.add("rpi_score", std::string("undefined"));
  }
}

// ---------------------------------------------------------------- generate

struct GenerateArgs {
  EnvArgs env;
  std::size_t dataset_size = 0;
  std::uint64_t seed = 0;
  std::string out;
};

void cmd_generate(const GenerateArgs& a, const CLI::App* sub) {
  EnvArgs e = a.env;
  if (!sub->count("--instance-seed")) e.instance_seed = a.seed;
  const Env env = resolve_env(e);
  const fs::path dir = output_dir(a.out, "generate-" + env_name(e) + "-seed" + std::to_string(a.seed));
  write_snapshot(dir, sub);
  io::save_mdp(dir / "mdp.json", *env.mdp);
  io::save_policy(dir / "behavior.json", env.behavior);
  if (env.fclass) io::save_class(dir / "fclass.json", *env.fclass);
  if (env.game) io::save_game(dir / "game.json", *env.game);
  Summary s;
  s.add("mdp", env.mdp->id());
  s.add_count("num_states", env.mdp->num_states());
  s.add_count("num_actions", env.mdp->num_actions());
  s.add("gamma", env.mdp->gamma());
  s.add("vmax", env.mdp->vmax());
  s.add("J_behavior", policy_return(*env.mdp, env.behavior));
  s.add("J_star", optimal_policy(*env.mdp).start_value);
  if (a.dataset_size > 0) {
    const Dataset data = sample_dataset(*env.mdp, env.behavior, a.dataset_size,
                                        derive_seed(a.seed, 0, 0), "behavior");
    io::save_dataset(dir / "dataset.csv", data);
    s.add_count("dataset_size", data.size());
  }
  s.write(dir);
}

// ---------------------------------------------------------------- run

struct RunArgs {
  EnvArgs env;
  PracticalArgs practical;
  std::string solver = "atac";
  std::string dataset;
  bool population = false;
  std::size_t dataset_size = 0;
  double beta = 1.0;
  std::size_t iterations = 0;
  std::string eta = "auto";
  std::string fclass;
  double smoothing = 0.1;
  std::uint64_t seed = 0;
  std::string out;
};

std::shared_ptr<const Dataset> run_dataset(const RunArgs& a, const Env& env) {
  if (!a.dataset.empty()) {
    require_file(a.dataset, "dataset file");
    auto data = std::make_shared<const Dataset>(io::load_dataset(a.dataset));
    data->validate_against(*env.mdp);
    return data;
  }
  const std::size_t n = a.dataset_size ? a.dataset_size : (env.dataset_size ? env.dataset_size : 10000);
  return std::make_shared<const Dataset>(
      sample_dataset(*env.mdp, env.behavior, n, derive_seed(a.seed, 0, 0), "behavior"));
}

void cmd_run(const RunArgs& a, const CLI::App* sub) {
  if (a.population && !a.dataset.empty())
    throw UsageError("--population and --dataset are mutually exclusive");
  if (a.population && (a.solver == "bc" || a.solver == "practical"))
    throw UsageError("--solver " + a.solver + " needs a dataset, not --population");
  if (!a.fclass.empty()) require_file(a.fclass, "function class file");
  const Env env = resolve_env(a.env);
  const Mdp& mdp = *env.mdp;
  const fs::path dir = output_dir(
      a.out, "run-" + a.solver + "-" + env_name(a.env) + "-seed" + std::to_string(a.seed));
  write_snapshot(dir, sub);
  const double j_mu = policy_return(mdp, env.behavior);
  Summary s;
  s.add("solver", a.solver);
  s.add("mdp", mdp.id());
  s.add("J_mu", j_mu);
  s.add("J_star", optimal_policy(mdp).start_value);

  std::optional<FunctionClass> fclass = env.fclass;
  if (!a.fclass.empty()) fclass = io::load_class(a.fclass);

  if (a.solver == "bc") {
    const auto data = run_dataset(a, env);
    const TabularPolicy pi = behavior_cloning(*data, a.smoothing);
    io::save_policy(dir / "policy.json", pi);
    const double j = policy_return(mdp, pi);
    s.add("J_bc", j);
    add_rpi(s, j, j_mu);
    s.write(dir);
    return;
  }
  if (a.solver == "practical") {
    const auto data = run_dataset(a, env);
    PracticalConfig c = practical_config(a.practical, env, sub->count("--w") > 0, sub);
    c.beta = a.beta;
    c.seed = a.seed;
    if (fclass) c.critic_class = *fclass;
    const PracticalTrace trace = run_practical(c, *data, mdp);
    io::write_text(dir / "epochs.csv", io::to_csv(io::epoch_table(trace)));
    io::save_policy(dir / "final_policy.json", trace.final_policy);
    if (!trace.checkpoints.empty())
      io::write_text(dir / "checkpoint_best.json",
                     io::checkpoint_to_json(trace.checkpoints[trace.best_checkpoint]));
    s.add("beta", a.beta);
    s.add("w", c.w);
    s.add("J_final", trace.last_value);
    s.add("J_best", trace.best_value);
    add_rpi(s, trace.last_value, j_mu);
    s.add("diverged", std::string(trace.diverged ? "yes" : "no"));
    if (trace.diverged) s.add("divergence", trace.divergence_message);
    s.write(dir);
    return;
  }

  GameConfig c;
  c.mode = a.solver == "atac0" ? PessimismMode::Absolute : PessimismMode::Relative;
  c.beta = a.beta;
  c.iterations = a.iterations ? a.iterations : (env.iterations ? env.iterations : 100);
  c.eta = parse_eta(a.eta);
  c.seed = a.seed;
  c.fclass = fclass.value_or(FunctionClass::box(mdp.num_states(), mdp.num_actions(), mdp.vmax()));
  if (a.population)
    c.source = PopulationSource{env.mdp, occupancy_measure(mdp, env.behavior)};
  else
    c.source = SampleSource{run_dataset(a, env)};
  const RunTrace trace = run_atac(c, &mdp);
  io::write_text(dir / "trace.csv", io::to_csv(io::trace_table(trace)));
  io::save_policy(dir / "final_policy.json", trace.iterates.back().policy);
  const RegretReport regret = measured_regret(trace, env.behavior, mdp);
  const BestComparatorRegret best = best_comparator_regret(trace, mdp);
  s.add("mode", io::mode_name(c.mode));
  s.add("beta", a.beta);
  s.add_count("iterations", c.iterations);
  s.add("eta", trace.eta);
  s.add("J_mixture", *trace.mixture_return);
  add_rpi(s, *trace.mixture_return, j_mu);
  s.add("regret_vs_behavior_sum", regret.sum);
  s.add("regret_vs_behavior_average", regret.average);
  s.add("regret_best_comparator_average", best.regret.average);
  s.warnings(trace.warnings);
  s.write(dir);
}

// ---------------------------------------------------------------- sweep

struct SweepArgs {
  EnvArgs env;
  PracticalArgs practical;
  std::string betas = "default";
  std::string modes = "relative";
  std::size_t seeds = 10;
  std::size_t workers = 1;
  std::string solver = "game";
  std::size_t dataset_size = 0;
  std::size_t iterations = 0;
  std::string eta = "auto";
  std::string fclass;
  std::uint64_t seed = 0;
  std::string out;
};

void cmd_sweep(const SweepArgs& a, const CLI::App* sub) {
  if (!a.fclass.empty()) require_file(a.fclass, "function class file");
  const Env env = resolve_env(a.env);
  SweepSpec spec;
  spec.betas = a.betas == "default" ? default_beta_grid() : parse_list(a.betas, "beta");
  spec.modes.clear();
  std::stringstream ss(a.modes);
  for (std::string m; std::getline(ss, m, ',');) spec.modes.push_back(io::parse_mode(m));
  spec.seeds = a.seeds;
  spec.global_seed = a.seed;
  spec.workers = a.workers;
  spec.solver = a.solver == "practical" ? SweepSolver::Practical : SweepSolver::Game;
  spec.env = env.mdp;
  spec.behavior = env.behavior;
  spec.dataset_size = a.dataset_size;
  if (spec.solver == SweepSolver::Practical && spec.dataset_size == 0)
    spec.dataset_size = env.dataset_size ? env.dataset_size : 1000;
  std::optional<FunctionClass> fclass = env.fclass;
  if (!a.fclass.empty()) fclass = io::load_class(a.fclass);
  const Mdp& mdp = *env.mdp;
  spec.game.fclass = fclass.value_or(FunctionClass::box(mdp.num_states(), mdp.num_actions(), mdp.vmax()));
  spec.game.iterations = a.iterations ? a.iterations : (env.iterations ? env.iterations : 100);
  spec.game.eta = parse_eta(a.eta);
  spec.practical = practical_config(a.practical, env, sub->count("--w") > 0, sub);
  if (fclass && spec.solver == SweepSolver::Practical) spec.practical.critic_class = *fclass;

  const fs::path dir = output_dir(a.out, "sweep-" + env_name(a.env) + "-seed" + std::to_string(a.seed));
  write_snapshot(dir, sub);
  const SweepResult result = beta_sweep(spec);
  io::write_text(dir / "sweep.csv", io::to_csv(io::sweep_table(result, false)));
  io::write_text(dir / "sweep_best.csv", io::to_csv(io::sweep_table(result, true)));
  io::write_text(dir / "cells.csv", io::to_csv(io::sweep_cells_table(result)));
  Summary s;
  s.add("mdp", mdp.id());
  s.add("solver", a.solver);
  s.add("J_mu", result.j_mu);
  s.add("vmax", result.vmax);
  s.add_count("cells", result.cells.size());
  std::size_t ok = 0;
  for (const auto& c : result.cells) ok += c.ok;
  s.add_count("cells_completed", ok);
  for (PessimismMode m : result.modes)
    for (std::size_t b = 0; b < result.betas.size(); ++b) {
      const SweepSummary& x = result.summary(m, b);
      s.add(io::mode_name(m) + "_p50[beta=" + io::format_summary(x.beta) + "]", x.last_p50);
    }
  s.warnings(result.warnings);
  s.write(dir);
}

// ---------------------------------------------------------------- compare-cql

struct CompareArgs {
  std::string game;
  double beta = 0.0;
  std::string out;
};

void cmd_compare(const CompareArgs& a, const CLI::App* sub) {
  BanditGame game;
  if (a.game == "bandit-appendix-c") {
    game = bandit_appendix_c().game;
  } else {
    require_file(a.game, "game file");
    game = io::load_game(a.game);
  }
  const ComparisonReport r = cql_bandit_compare(game, a.beta);
  const std::string name = a.game == "bandit-appendix-c" ? a.game : fs::path(a.game).stem().string();
  const fs::path dir = output_dir(a.out, "compare-cql-" + name);
  write_snapshot(dir, sub);
  io::write_text(dir / "report.json", io::comparison_to_json(r));
  Summary s;
  s.add("game", game.id);
  s.add("beta", a.beta);
  s.add_count("atac_policy", r.atac_policy);
  s.add("maximin_value", r.maximin_value);
  s.add_count("cql_critic", r.cql_critic);
  s.add("minimax_value", r.minimax_value);
  s.add_count("cql_greedy_action", r.cql_greedy_action);
  s.add("cql_minimizers_constant_on_support",
        std::string(r.cql_minimizers_constant_on_support ? "yes" : "no"));
  s.add("atac_return", r.atac_return);
  s.add("cql_return", r.cql_return);
  s.add("behavior_return", r.behavior_return);
  s.add("values_differ", std::string(r.values_differ ? "yes" : "no"));
  s.add("policies_differ", std::string(r.policies_differ ? "yes" : "no"));
  s.write(dir);
}

// ---------------------------------------------------------------- stability

struct StabilityArgs {
  EnvArgs env;
  PracticalArgs practical;
  std::string w_grid = "0,0.25,0.5,0.75,1";
  std::size_t seeds = 10;
  std::size_t workers = 1;
  std::size_t dataset_size = 0;
  double beta = 1.0;
  std::string fclass;
  std::uint64_t seed = 0;
  std::string out;
};

void cmd_stability(const StabilityArgs& a, const CLI::App* sub) {
  if (!a.fclass.empty()) require_file(a.fclass, "function class file");
  const Env env = resolve_env(a.env);
  StabilitySpec spec;
  spec.env = env.mdp;
  spec.behavior = env.behavior;
  spec.dataset_size = a.dataset_size ? a.dataset_size : (env.dataset_size ? env.dataset_size : 1000);
  spec.practical = practical_config(a.practical, env, false, sub);
  if (!env.practical || sub->count("--beta")) spec.practical.beta = a.beta;
  if (!a.fclass.empty()) spec.practical.critic_class = io::load_class(a.fclass);
  spec.w_grid = parse_list(a.w_grid, "w");
  spec.seeds = a.seeds;
  spec.global_seed = a.seed;
  spec.workers = a.workers;
  spec.instance = env_name(a.env);
  const fs::path dir =
      output_dir(a.out, "stability-" + env_name(a.env) + "-seed" + std::to_string(a.seed));
  write_snapshot(dir, sub);
  const StabilityReport report = dqra_stability_study(spec);
  io::write_text(dir / "stability.csv", io::to_csv(io::stability_runs_table(report)));
  io::write_text(dir / "stability_summary.csv", io::to_csv(io::stability_summary_table(report)));
  Summary s;
  s.add("instance", report.instance);
  for (const auto& x : report.summaries) {
    const std::string w = "[w=" + io::format_summary(x.w) + "]";
    s.add("median_initial_td" + w, x.median_initial_td);
    s.add("median_peak_td" + w, x.median_peak_td);
    s.add("median_final_td" + w, x.median_final_td);
    s.add("median_return" + w, x.median_return);
    s.add_count("diverged" + w, x.diverged);
  }
  s.write(dir);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Adversarially trained actor critic lab"};
  app.require_subcommand(1, 1);
  app.option_defaults()->always_capture_default();

  GenerateArgs gen;
  auto* g = app.add_subcommand("generate", "write an MDP, its behavior policy and optionally a dataset");
  add_env_options(g, gen.env);
  g->add_option("--dataset-size", gen.dataset_size, "tuples to sample from the behavior policy");
  g->add_option("--seed", gen.seed, "seed (random instance and dataset)");
  g->add_option("--out", gen.out, "output directory");

  RunArgs run;
  auto* r = app.add_subcommand("run", "run one solver and export its trace");
  add_env_options(r, run.env);
  add_practical_options(r, run.practical);
  r->add_option("--solver", run.solver, "atac | atac0 | bc | practical")
      ->check(CLI::IsMember({"atac", "atac0", "bc", "practical"}));
  r->add_option("--dataset", run.dataset, "dataset CSV (sidecar metadata required)");
  r->add_flag("--population", run.population, "exact behavior occupancy instead of data");
  r->add_option("--dataset-size", run.dataset_size, "tuples to sample when no dataset is given");
  r->add_option("--beta", run.beta, "pessimism weight");
  r->add_option("--iterations", run.iterations, "game iterations K");
  r->add_option("--eta", run.eta, "actor step size or 'auto'");
  r->add_option("--fclass", run.fclass, "critic class JSON file");
  r->add_option("--smoothing", run.smoothing, "behavior cloning count smoothing");
  r->add_option("--seed", run.seed, "run seed");
  r->add_option("--out", run.out, "output directory");

  SweepArgs sw;
  auto* s = app.add_subcommand("sweep", "β sweep over seeds");
  add_env_options(s, sw.env);
  add_practical_options(s, sw.practical);
  s->add_option("--betas", sw.betas, "'default' or a comma-separated list");
  s->add_option("--modes", sw.modes, "comma-separated: relative, absolute");
  s->add_option("--seeds", sw.seeds, "seeds per β");
  s->add_option("--workers", sw.workers, "worker threads");
  s->add_option("--solver", sw.solver, "game | practical")->check(CLI::IsMember({"game", "practical"}));
  s->add_option("--dataset-size", sw.dataset_size, "tuples per cell; 0 runs at population level");
  s->add_option("--iterations", sw.iterations, "game iterations K");
  s->add_option("--eta", sw.eta, "actor step size or 'auto'");
  s->add_option("--fclass", sw.fclass, "critic class JSON file");
  s->add_option("--seed", sw.seed, "global seed");
  s->add_option("--out", sw.out, "output directory");

  CompareArgs cmp;
  auto* c = app.add_subcommand("compare-cql", "maximin against minimax on a bandit game");
  c->add_option("--game", cmp.game, "'bandit-appendix-c' or a game JSON file")->required();
  c->add_option("--beta", cmp.beta, "Bellman weight");
  c->add_option("--out", cmp.out, "output directory");

  StabilityArgs st;
  st.env.instance = "divergence";
  auto* b = app.add_subcommand("stability", "practical trainer across DQRA weights");
  add_env_options(b, st.env);
  add_practical_options(b, st.practical);
  b->add_option("--w-grid", st.w_grid, "comma-separated DQRA weights");
  b->add_option("--seeds", st.seeds, "seeds");
  b->add_option("--workers", st.workers, "worker threads");
  b->add_option("--dataset-size", st.dataset_size, "tuples per seed");
  b->add_option("--beta", st.beta, "pessimism weight");
  b->add_option("--fclass", st.fclass, "critic class JSON file");
  b->add_option("--seed", st.seed, "global seed");
  b->add_option("--out", st.out, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  try {
    if (*g) cmd_generate(gen, g);
    else if (*r) cmd_run(run, r);
    else if (*s) cmd_sweep(sw, s);
    else if (*c) cmd_compare(cmp, c);
    else if (*b) cmd_stability(st, b);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const ArgumentError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
