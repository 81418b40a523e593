#include "atac/analysis.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <thread>

#include "atac/errors.hpp"
#include "atac/rng.hpp"

namespace atac {
namespace {

double residual_norm(const Occupancy& d, const StateActionTable& f, const TabularPolicy& pi,
                     const Mdp& mdp) {
  return population_E(mdp, d, f, pi).value;
}

double median(std::vector<double> v) { return percentile(std::move(v), 0.5); }

}  // namespace

double concentrability(const Occupancy& nu, const Occupancy& mu, const FunctionClass& fclass,
                       const TabularPolicy& policy, const Mdp& mdp) {
  if (fclass.kind() != ClassKind::FiniteEnumeration)
    throw ArgumentError("concentrability needs a finite class");
  require_compatible(mdp, policy, "concentrability");
  double best = -1.0;
  for (const auto& f : fclass.members()) {
    const double num = residual_norm(nu, f, policy, mdp);
    const double den = residual_norm(mu, f, policy, mdp);
    if (den == 0.0) {
      if (num == 0.0) continue;
      return std::numeric_limits<double>::infinity();
    }
    best = std::max(best, num / den);
  }
  if (best < 0.0) throw DegenerateClass("every member is Bellman-consistent under both measures");
  return best;
}

double rpi_score(double j_pi, double j_mu) {
  if (std::abs(j_mu) < 1e-12) throw UndefinedScore("rpi score needs a nonzero behavior return");
  return (j_pi - j_mu) / std::abs(j_mu);
}

double percentile(std::vector<double> values, double q) {
  if (values.empty()) throw ArgumentError("percentile of an empty sample");
  if (!(q >= 0.0 && q <= 1.0)) throw ArgumentError("percentile level must lie in [0, 1]");
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

std::vector<double> default_beta_grid() {
  std::vector<double> grid{0.0};
  for (int e = -4; e <= 4; ++e) grid.push_back(std::pow(4.0, e));
  return grid;
}

void parallel_for(std::size_t count, std::size_t workers,
                  const std::function<void(std::size_t)>& job) {
  workers = std::max<std::size_t>(1, std::min(workers, count));
  if (workers == 1) {
    for (std::size_t i = 0; i < count; ++i) job(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t t = 0; t < workers; ++t)
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) job(i);
    });
  for (auto& th : pool) th.join();
}

const SweepSummary& SweepResult::summary(PessimismMode mode, std::size_t beta_index) const {
  for (const auto& s : summaries)
    if (s.mode == mode && s.beta_index == beta_index) return s;
  throw ArgumentError("sweep has no such cell");
}

SweepResult beta_sweep(const SweepSpec& spec) {
  if (spec.seeds < 2) throw ArgumentError("beta sweep needs at least 2 seeds per cell");
  if (spec.betas.empty() || spec.modes.empty()) throw ArgumentError("beta sweep: empty grid");
  if (!spec.env) throw ArgumentError("beta sweep needs an MDP");
  for (double b : spec.betas)
    if (!(b >= 0.0)) throw ArgumentError("beta sweep: beta must be >= 0");
  if (spec.solver == SweepSolver::Practical && spec.dataset_size == 0)
    throw ArgumentError("the practical solver needs a dataset size");
  const Mdp& env = *spec.env;
  require_compatible(env, spec.behavior, "beta sweep behavior");

  SweepResult result;
  result.betas = spec.betas;
  result.modes = spec.modes;
  result.j_mu = policy_return(env, spec.behavior);
  result.vmax = env.vmax();
  const Occupancy mu = occupancy_measure(env, spec.behavior);

  for (auto mode : spec.modes)
    for (std::size_t b = 0; b < spec.betas.size(); ++b)
      for (std::size_t k = 0; k < spec.seeds; ++k) {
        SweepCell cell;
        cell.mode = mode;
        cell.beta_index = b;
        cell.seed_index = k;
        cell.seed = derive_seed(spec.global_seed, b, k);
        cell.j_mu = result.j_mu;
        result.cells.push_back(cell);
      }

  parallel_for(result.cells.size(), spec.workers, [&](std::size_t i) {
    SweepCell& cell = result.cells[i];
    const double beta = spec.betas[cell.beta_index];
    try {
      std::shared_ptr<const Dataset> data;
      if (spec.dataset_size > 0)
        data = std::make_shared<const Dataset>(
            sample_dataset(env, spec.behavior, spec.dataset_size, cell.seed, "behavior"));
      if (spec.solver == SweepSolver::Game) {
        GameConfig config = spec.game;
        config.mode = cell.mode;
        config.beta = beta;
        config.seed = cell.seed;
        if (data) config.source = SampleSource{data};
        else config.source = PopulationSource{spec.env, mu};
        const RunTrace trace = run_atac(config, &env);
        cell.j_last = *trace.mixture_return;
        cell.j_best = cell.j_last;
      } else {
        PracticalConfig config = spec.practical;
        config.mode = cell.mode;
        config.beta = beta;
        config.seed = cell.seed;
        const PracticalTrace trace = run_practical(config, *data, env);
        if (trace.diverged) throw ComputationError(trace.divergence_message);
        cell.j_last = trace.last_value;
        cell.j_best = trace.best_value;
      }
      cell.ok = true;
    } catch (const std::exception& e) {
      cell.ok = false;
      cell.error = e.what();
    }
  });

  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (auto mode : spec.modes)
    for (std::size_t b = 0; b < spec.betas.size(); ++b) {
      SweepSummary s;
      s.mode = mode;
      s.beta_index = b;
      s.beta = spec.betas[b];
      s.j_mu = result.j_mu;
      std::vector<double> last, best;
      for (const auto& c : result.cells)
        if (c.mode == mode && c.beta_index == b && c.ok) {
          last.push_back(c.j_last);
          best.push_back(c.j_best);
        }
      s.completed = last.size();
      s.complete = s.completed == spec.seeds;
      if (last.empty()) {
        s.last_p25 = s.last_p50 = s.last_p75 = nan;
        s.best_p25 = s.best_p50 = s.best_p75 = nan;
      } else {
        s.last_p25 = percentile(last, 0.25);
        s.last_p50 = percentile(last, 0.5);
        s.last_p75 = percentile(last, 0.75);
        s.best_p25 = percentile(best, 0.25);
        s.best_p50 = percentile(best, 0.5);
        s.best_p75 = percentile(best, 0.75);
      }
      if (!s.complete)
        result.warnings.push_back("cell beta=" + std::to_string(s.beta) + " mode=" +
                                  (mode == PessimismMode::Relative ? "relative" : "absolute") +
                                  " completed " + std::to_string(s.completed) + " of " +
                                  std::to_string(spec.seeds) + " seeds");
      result.summaries.push_back(s);
    }
  return result;
}

void validate_game(const BanditGame& g) {
  const std::size_t A = g.rewards.size();
  if (A == 0) throw ArgumentError("bandit game needs at least one arm");
  if (g.critics.empty() || g.policies.empty()) throw ArgumentError("bandit classes must be nonempty");
  if (g.behavior.size() != A) throw ArgumentError("bandit behavior has the wrong length");
  auto check_dist = [&](const std::vector<double>& p, const char* what) {
    if (p.size() != A) throw ArgumentError(std::string(what) + " has the wrong length");
    double total = 0.0;
    for (double x : p) {
      if (!(x >= 0.0)) throw ArgumentError(std::string(what) + " has a negative entry");
      total += x;
    }
    if (std::abs(total - 1.0) > 1e-12) throw ArgumentError(std::string(what) + " does not sum to 1");
  };
  check_dist(g.behavior, "bandit behavior");
  for (const auto& p : g.policies) check_dist(p, "bandit policy");
  for (const auto& f : g.critics)
    if (f.size() != A) throw ArgumentError("bandit critic has the wrong length");
}

ComparisonReport cql_bandit_compare(const BanditGame& g, double beta) {
  validate_game(g);
  if (!(beta >= 0.0)) throw ArgumentError("cql_bandit_compare: beta must be >= 0");
  const std::size_t A = g.rewards.size();
  auto dot = [](const std::vector<double>& x, const std::vector<double>& y) {
    double t = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) t += x[i] * y[i];
    return t;
  };
  const std::size_t P = g.policies.size();
  const std::size_t F = g.critics.size();
  std::vector<double> value(P * F);
  for (std::size_t i = 0; i < F; ++i) {
    const auto& f = g.critics[i];
    double err = 0.0;
    for (std::size_t a = 0; a < A; ++a) err += g.behavior[a] * (f[a] - g.rewards[a]) * (f[a] - g.rewards[a]);
    const double base = dot(g.behavior, f);
    for (std::size_t p = 0; p < P; ++p) value[p * F + i] = dot(g.policies[p], f) - base + beta * err;
  }
  ComparisonReport r;
  r.maximin_value = -std::numeric_limits<double>::infinity();
  for (std::size_t p = 0; p < P; ++p) {
    double inner = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < F; ++i) inner = std::min(inner, value[p * F + i]);
    if (inner > r.maximin_value) {
      r.maximin_value = inner;
      r.atac_policy = p;
    }
  }
  std::vector<double> outer(F, -std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < F; ++i)
    for (std::size_t p = 0; p < P; ++p) outer[i] = std::max(outer[i], value[p * F + i]);
  r.minimax_value = *std::min_element(outer.begin(), outer.end());
  r.cql_critic = static_cast<std::size_t>(std::min_element(outer.begin(), outer.end()) - outer.begin());
  for (std::size_t i = 0; i < F; ++i)
    if (outer[i] == r.minimax_value) r.cql_minimizers.push_back(i);
  r.cql_minimizers_constant_on_support = true;
  for (std::size_t i : r.cql_minimizers) {
    const auto& f = g.critics[i];
    std::optional<double> level;
    for (std::size_t a = 0; a < A; ++a) {
      if (g.behavior[a] <= 0.0) continue;
      if (level && f[a] != *level) r.cql_minimizers_constant_on_support = false;
      level = f[a];
    }
  }
  const auto& fc = g.critics[r.cql_critic];
  r.cql_greedy_action = static_cast<std::size_t>(std::max_element(fc.begin(), fc.end()) - fc.begin());
  r.atac_return = dot(g.policies[r.atac_policy], g.rewards);
  r.cql_return = g.rewards[r.cql_greedy_action];
  r.behavior_return = dot(g.behavior, g.rewards);
  r.values_differ = r.maximin_value != r.minimax_value;
  std::vector<double> greedy(A, 0.0);
  greedy[r.cql_greedy_action] = 1.0;
  r.policies_differ = g.policies[r.atac_policy] != greedy;
  return r;
}

StabilityReport dqra_stability_study(const StabilitySpec& spec) {
  if (!spec.env) throw ArgumentError("stability study needs an MDP");
  if (spec.w_grid.empty() || spec.seeds == 0) throw ArgumentError("stability study: empty grid");
  for (double w : spec.w_grid)
    if (!(w >= 0.0 && w <= 1.0)) throw ArgumentError("stability study: w must lie in [0, 1]");
  const Mdp& env = *spec.env;
  std::vector<std::shared_ptr<const Dataset>> datasets(spec.seeds);
  for (std::size_t k = 0; k < spec.seeds; ++k)
    datasets[k] = std::make_shared<const Dataset>(sample_dataset(
        env, spec.behavior, spec.dataset_size, derive_seed(spec.global_seed, 0, k), "behavior"));

  StabilityReport report;
  report.instance = spec.instance;
  for (std::size_t wi = 0; wi < spec.w_grid.size(); ++wi)
    for (std::size_t k = 0; k < spec.seeds; ++k) {
      StabilityRun run;
      run.w_index = wi;
      run.seed_index = k;
      run.w = spec.w_grid[wi];
      report.runs.push_back(run);
    }
  parallel_for(report.runs.size(), spec.workers, [&](std::size_t i) {
    StabilityRun& run = report.runs[i];
    PracticalConfig config = spec.practical;
    config.w = run.w;
    config.seed = derive_seed(spec.global_seed, 1, run.seed_index);
    const PracticalTrace trace = run_practical(config, *datasets[run.seed_index], env);
    run.diverged = trace.diverged;
    run.initial_td = trace.epochs.front().td_error;
    run.final_td = trace.epochs.back().td_error;
    run.peak_td = run.initial_td;
    for (const auto& e : trace.epochs) {
      run.peak_td = std::max(run.peak_td, e.td_error);
      if (!std::isfinite(e.td_error) || !std::isfinite(e.l_critic) || !std::isfinite(e.l_actor))
        run.finite = false;
    }
    run.final_return = trace.last_value;
  });
  for (std::size_t wi = 0; wi < spec.w_grid.size(); ++wi) {
    StabilitySummary s;
    s.w = spec.w_grid[wi];
    std::vector<double> init, fin, peak, ret;
    for (const auto& r : report.runs) {
      if (r.w_index != wi) continue;
      init.push_back(r.initial_td);
      fin.push_back(r.final_td);
      peak.push_back(r.peak_td);
      ret.push_back(r.final_return);
      s.diverged += r.diverged ? 1 : 0;
      s.all_finite = s.all_finite && r.finite && !r.diverged;
    }
    s.median_initial_td = median(init);
    s.median_final_td = median(fin);
    s.median_peak_td = median(peak);
    s.median_return = median(ret);
    report.summaries.push_back(s);
  }
  return report;
}

}  // namespace atac
