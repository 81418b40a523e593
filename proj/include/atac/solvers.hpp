#pragma once

// The theoretical game solver: a pessimistic critic per iterate followed by a
// multiplicative-weights actor update, returning a trajectory-level mixture.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "atac/function_class.hpp"
#include "atac/mdp.hpp"
#include "atac/table.hpp"

namespace atac {

struct GameConfig {
  PessimismMode mode = PessimismMode::Relative;
  double beta = 0.0;
  std::size_t iterations = 1;
  /// nullopt selects the automatic schedule.
  std::optional<double> eta;
  DataSource source;
  FunctionClass fclass;
  /// Uniform when unset. Every entry must be strictly positive.
  std::optional<TabularPolicy> initial_policy;
  /// Start each critic solve at the previous iterate's critic.
  bool warm_start_critic = true;
  SolveOptions solve;
  std::uint64_t seed = 0;
};

void validate_config(const GameConfig& config);

struct IterateRecord {
  TabularPolicy policy;
  QTable critic;
  ObjectiveValue objective;
  std::optional<double> value;  // J(π_k) when an MDP is available
  std::size_t solver_iterations = 0;
  bool solver_converged = true;
  bool solver_certified = true;
};

struct RunTrace {
  std::vector<IterateRecord> iterates;
  std::optional<double> mixture_return;  // (1/K) Σ J(π_k)
  double eta = 0.0;
  double wall_seconds = 0.0;
  std::uint64_t seed = 0;
  std::vector<std::string> warnings;
};

/// √(ln|A| / (2 Vmax² K)); 0 when |A| = 1.
double eta_schedule(std::size_t k_total, double vmax, std::size_t num_actions);

/// π'(a|s) ∝ π(a|s) exp(η f(s,a)) with a per-row max shift.
TabularPolicy mirror_ascent_step(const TabularPolicy& policy, const StateActionTable& f,
                                 double eta);

/// Runs K rounds. `env` is used for returns; population sources supply their
/// own MDP when `env` is null.
RunTrace run_atac(const GameConfig& config, const Mdp* env = nullptr);

struct RegretReport {
  double sum = 0.0;      // (1/(1−γ)) Σ_k E_{d^π}[f_k(s,π) − f_k(s,π_k)]
  double average = 0.0;  // sum / K
};

RegretReport measured_regret(const RunTrace& trace, const TabularPolicy& comparator,
                             const Mdp& mdp);

struct BestComparatorRegret {
  RegretReport regret;
  TabularPolicy comparator;
};

/// Maximizes the regret sum over all stationary policies: it is the optimal
/// start value for the reward Σ_k [f_k(s,a) − f_k(s,π_k)].
BestComparatorRegret best_comparator_regret(const RunTrace& trace, const Mdp& mdp);

}  // namespace atac
