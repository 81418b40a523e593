#include "atac/solvers.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "atac/errors.hpp"

namespace atac {
namespace {

const Mdp* evaluation_mdp(const GameConfig& config, const Mdp* env) {
  if (env) return env;
  if (const auto* pop = std::get_if<PopulationSource>(&config.source)) return pop->mdp.get();
  return nullptr;
}

double resolve_vmax(const GameConfig& config, const Mdp* mdp) {
  if (mdp) return mdp->vmax();
  if (config.fclass.vmax() > 0.0) return config.fclass.vmax();
  throw ArgumentError("automatic step size needs Vmax: supply an MDP or a bounded class");
}

template <class E>
[[noreturn]] void rethrow_at(const E& e, std::size_t k) {
  throw E("iteration " + std::to_string(k) + ": " + e.what());
}

}  // namespace

void validate_config(const GameConfig& config) {
  if (config.iterations == 0) throw ArgumentError("game config: K must be at least 1");
  if (!(config.beta >= 0.0) || !std::isfinite(config.beta))
    throw ArgumentError("game config: beta must be finite and >= 0");
  if (config.eta && !(*config.eta > 0.0 && std::isfinite(*config.eta)))
    throw ArgumentError("game config: eta must be positive");
  if (const auto* pop = std::get_if<PopulationSource>(&config.source); pop && !pop->mdp)
    throw ArgumentError("game config: population source needs an MDP");
  if (const auto* smp = std::get_if<SampleSource>(&config.source); smp && !smp->data)
    throw ArgumentError("game config: sample source needs a dataset");
  if (config.initial_policy) {
    const auto& p = *config.initial_policy;
    if (p.num_states() != config.fclass.num_states() ||
        p.num_actions() != config.fclass.num_actions())
      throw ArgumentError("game config: initial policy shape does not match the class");
    for (double v : p.table().values())
      if (!(v > 0.0)) throw ArgumentError("game config: initial policy must be strictly positive");
  }
}

double eta_schedule(std::size_t k_total, double vmax, std::size_t num_actions) {
  if (k_total == 0 || !(vmax > 0.0) || num_actions == 0)
    throw ArgumentError("eta_schedule: inputs must be positive");
  if (num_actions == 1) return 0.0;
  const double k = static_cast<double>(k_total);
  return std::sqrt(std::log(static_cast<double>(num_actions)) / (2.0 * vmax * vmax * k));
}

TabularPolicy mirror_ascent_step(const TabularPolicy& policy, const StateActionTable& f,
                                 double eta) {
  if (!(eta >= 0.0) || !std::isfinite(eta)) throw ArgumentError("mirror step: eta must be >= 0");
  require_shape(f, policy.num_states(), policy.num_actions(), "mirror step critic");
  if (eta == 0.0) return policy;
  StateActionTable next(policy.num_states(), policy.num_actions());
  for (std::size_t s = 0; s < policy.num_states(); ++s) {
    const auto row = f.row(s);
    const double top = *std::max_element(row.begin(), row.end());
    for (std::size_t a = 0; a < policy.num_actions(); ++a)
      next(s, a) = policy(s, a) * std::exp(eta * (row[a] - top));
  }
  return TabularPolicy::normalized(std::move(next));
}

RunTrace run_atac(const GameConfig& config, const Mdp* env) {
  validate_config(config);
  const auto started = std::chrono::steady_clock::now();
  const std::size_t S = config.fclass.num_states();
  const std::size_t A = config.fclass.num_actions();
  const Mdp* mdp = evaluation_mdp(config, env);
  if (mdp && (mdp->num_states() != S || mdp->num_actions() != A))
    throw ArgumentError("run_atac: evaluation MDP shape does not match the class");

  RunTrace trace;
  trace.seed = config.seed;
  trace.eta = config.eta ? *config.eta : eta_schedule(config.iterations, resolve_vmax(config, mdp), A);
  if (trace.eta == 0.0) trace.warnings.push_back("step size is 0: a single action leaves the actor fixed");

  TabularPolicy pi = config.initial_policy ? *config.initial_policy : TabularPolicy::uniform(S, A);
  SolveOptions opt = config.solve;
  trace.iterates.reserve(config.iterations);
  double value_sum = 0.0;
  for (std::size_t k = 0; k < config.iterations; ++k) {
    CriticObjective objective{config.mode, config.beta, config.source, pi};
    CriticSolution sol;
    try {
      sol = solve_critic(config.fclass, objective, opt);
    } catch (const UnidentifiedCritic& e) {
      rethrow_at(e, k + 1);
    } catch (const ComputationError& e) {
      rethrow_at(e, k + 1);
    }
    if (config.warm_start_critic) opt.initial = sol.params;
    IterateRecord rec;
    rec.objective = sol.objective;
    rec.solver_iterations = sol.iterations;
    rec.solver_converged = sol.converged;
    rec.solver_certified = sol.certified;
    if (mdp) {
      rec.value = policy_return(*mdp, pi);
      value_sum += *rec.value;
    }
    TabularPolicy next = mirror_ascent_step(pi, sol.f, trace.eta);
    rec.policy = std::move(pi);
    rec.critic = std::move(sol.f);
    trace.iterates.push_back(std::move(rec));
    pi = std::move(next);
  }
  if (mdp) trace.mixture_return = value_sum / static_cast<double>(config.iterations);
  std::size_t unconverged = 0, uncertified = 0;
  for (const auto& rec : trace.iterates) {
    unconverged += rec.solver_converged ? 0 : 1;
    uncertified += rec.solver_certified ? 0 : 1;
  }
  if (unconverged)
    trace.warnings.push_back(std::to_string(unconverged) + " critic solves hit the iteration cap");
  if (uncertified)
    trace.warnings.push_back(std::to_string(uncertified) + " critic solves failed the probe check");
  trace.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return trace;
}

RegretReport measured_regret(const RunTrace& trace, const TabularPolicy& comparator,
                             const Mdp& mdp) {
  require_compatible(mdp, comparator, "measured_regret");
  if (trace.iterates.empty()) throw ArgumentError("measured_regret: empty trace");
  const auto marginal = occupancy_measure(mdp, comparator).state_marginal();
  double total = 0.0;
  for (const auto& rec : trace.iterates) {
    require_shape(rec.critic, mdp.num_states(), mdp.num_actions(), "measured_regret critic");
    for (std::size_t s = 0; s < mdp.num_states(); ++s)
      total += marginal[s] * (policy_value_at(rec.critic, comparator, s) -
                              policy_value_at(rec.critic, rec.policy, s));
  }
  RegretReport r;
  r.sum = total / (1.0 - mdp.gamma());
  r.average = r.sum / static_cast<double>(trace.iterates.size());
  return r;
}

BestComparatorRegret best_comparator_regret(const RunTrace& trace, const Mdp& mdp) {
  if (trace.iterates.empty()) throw ArgumentError("best_comparator_regret: empty trace");
  StateActionTable gain(mdp.num_states(), mdp.num_actions(), 0.0);
  for (const auto& rec : trace.iterates)
    for (std::size_t s = 0; s < mdp.num_states(); ++s) {
      const double base = policy_value_at(rec.critic, rec.policy, s);
      for (std::size_t a = 0; a < mdp.num_actions(); ++a) gain(s, a) += rec.critic(s, a) - base;
    }
  OptimalSolution best = optimal_policy_for_reward(mdp, gain);
  BestComparatorRegret out{measured_regret(trace, best.policy, mdp), best.policy};
  return out;
}

}  // namespace atac
