#pragma once

// Exact finite-MDP machinery: Q-values, returns, discounted occupancies, the
// Bellman operator T^π and the performance-difference decomposition.

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "atac/table.hpp"

namespace atac {

class Mdp {
 public:
  static constexpr double kRowTolerance = 1e-12;

  /// `transition` is laid out as ((s * A) + a) * S + s_next. Throws ArgumentError
  /// on any violated invariant. `reward_max` defaults to max R(s,a) and, if given,
  /// must bound every reward.
  Mdp(std::size_t num_states, std::size_t num_actions, std::vector<double> transition,
      StateActionTable reward, double gamma, std::size_t start_state,
      std::optional<double> reward_max = std::nullopt, std::string id = {});

  std::size_t num_states() const noexcept { return states_; }
  std::size_t num_actions() const noexcept { return actions_; }
  double gamma() const noexcept { return gamma_; }
  std::size_t start_state() const noexcept { return start_; }
  const StateActionTable& reward() const noexcept { return reward_; }
  double reward(std::size_t s, std::size_t a) const { return reward_(s, a); }
  double reward_max() const noexcept { return reward_max_; }
  /// Rmax / (1 - γ).
  double vmax() const noexcept { return reward_max_ / (1.0 - gamma_); }
  const std::string& id() const noexcept { return id_; }
  bool reward_max_explicit() const noexcept { return reward_max_explicit_; }

  double transition(std::size_t s, std::size_t a, std::size_t s_next) const {
    return transition_[(s * actions_ + a) * states_ + s_next];
  }
  std::span<const double> next_state_distribution(std::size_t s, std::size_t a) const {
    return {transition_.data() + (s * actions_ + a) * states_, states_};
  }
  std::span<const double> transitions() const noexcept { return transition_; }

 private:
  std::size_t states_;
  std::size_t actions_;
  std::vector<double> transition_;
  StateActionTable reward_;
  double gamma_;
  std::size_t start_;
  double reward_max_ = 0.0;
  bool reward_max_explicit_ = false;
  std::string id_;
};

void require_compatible(const Mdp& mdp, const TabularPolicy& pi, const char* what);

/// Q^π, solving (I - γ P_π) V = R_π directly and then Q = R + γ P V.
QTable exact_q_values(const Mdp& mdp, const TabularPolicy& policy);
/// V^π(s) for every state.
std::vector<double> exact_state_values(const Mdp& mdp, const TabularPolicy& policy);
/// J(π) = Σ_a π(a|s0) Q^π(s0,a).
double policy_return(const Mdp& mdp, const TabularPolicy& policy);
/// Normalized discounted occupancy d^π from the flow equation.
Occupancy occupancy_measure(const Mdp& mdp, const TabularPolicy& policy);
/// (T^π f)(s,a) = R(s,a) + γ Σ_s' P(s'|s,a) f(s',π). Never clamped.
QTable bellman_backup(const Mdp& mdp, const StateActionTable& f, const TabularPolicy& policy);
/// Same operator with an arbitrary reward table in place of R.
QTable bellman_backup_with_reward(const Mdp& mdp, const StateActionTable& reward,
                                  const StateActionTable& f, const TabularPolicy& policy);

/// Result of exhaustive policy iteration.
struct OptimalSolution {
  TabularPolicy policy;        // deterministic, lowest-index ties
  std::vector<double> values;  // V*(s)
  double start_value = 0.0;    // V*(s0) = J(π*)
  std::size_t iterations = 0;
};

/// Optimal control for the MDP's own reward.
OptimalSolution optimal_policy(const Mdp& mdp);
/// Optimal control for an arbitrary (possibly negative) reward table on the
/// MDP's dynamics.
OptimalSolution optimal_policy_for_reward(const Mdp& mdp, const StateActionTable& reward);

/// The performance-difference identity between a competitor π̃ and π̂,
/// evaluated exactly for an arbitrary critic f and behavior μ:
///   J(π̃) − J(π̂) = [ E_μ[f − T^π̂ f] + E_π̃[T^π̂ f − f]
///                   + E_π̃[f(s,π̃) − f(s,π̂)] + L_μ(π̂,f) − L_μ(π̂,Q^π̂) ] / (1 − γ)
struct DecompositionReport {
  double behavior_bellman_term = 0.0;    // E_{d^μ}[f − T^π̂ f]
  double competitor_bellman_term = 0.0;  // E_{d^π̃}[T^π̂ f − f]
  double optimization_term = 0.0;        // E_{d^π̃}[f(s,π̃) − f(s,π̂)]
  double pessimism_gap_term = 0.0;       // L_μ(π̂,f) − L_μ(π̂,Q^π̂)
  double decomposed_total = 0.0;         // sum of the four terms / (1 − γ)
  double direct_difference = 0.0;        // J(π̃) − J(π̂)
  double residual() const { return decomposed_total - direct_difference; }
};

DecompositionReport performance_difference_decomposition(const Mdp& mdp,
                                                         const StateActionTable& f,
                                                         const TabularPolicy& pi_comp,
                                                         const TabularPolicy& pi_hat,
                                                         const TabularPolicy& mu);

/// Σ_{s,a} d(s,a) g(s,a).
double expectation(const Occupancy& d, const StateActionTable& g);

}  // namespace atac
