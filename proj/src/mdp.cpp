#include "atac/mdp.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "atac/errors.hpp"
#include "atac/kernels.hpp"

namespace atac {
namespace {

// P_π(s, s') = Σ_a π(a|s) P(s'|s,a).
Eigen::MatrixXd policy_transition(const Mdp& mdp, const TabularPolicy& pi) {
  const std::size_t S = mdp.num_states();
  Eigen::MatrixXd p = Eigen::MatrixXd::Zero(S, S);
  for (std::size_t s = 0; s < S; ++s)
    for (std::size_t a = 0; a < mdp.num_actions(); ++a) {
      const double w = pi(s, a);
      if (w == 0.0) continue;
      auto next = mdp.next_state_distribution(s, a);
      for (std::size_t sn = 0; sn < S; ++sn) p(s, sn) += w * next[sn];
    }
  return p;
}

std::vector<double> solve_values(const Mdp& mdp, const TabularPolicy& pi,
                                 const StateActionTable& reward) {
  const std::size_t S = mdp.num_states();
  Eigen::MatrixXd system =
      Eigen::MatrixXd::Identity(S, S) - mdp.gamma() * policy_transition(mdp, pi);
  Eigen::VectorXd r_pi(S);
  for (std::size_t s = 0; s < S; ++s) r_pi(s) = kernels::dot(reward.row(s), pi.row(s));
  Eigen::VectorXd v = system.partialPivLu().solve(r_pi);
  return {v.data(), v.data() + S};
}

QTable q_from_values(const Mdp& mdp, const StateActionTable& reward,
                     std::span<const double> v) {
  QTable q(mdp.num_states(), mdp.num_actions());
  for (std::size_t s = 0; s < mdp.num_states(); ++s)
    for (std::size_t a = 0; a < mdp.num_actions(); ++a)
      q(s, a) = reward(s, a) + mdp.gamma() * kernels::dot(mdp.next_state_distribution(s, a), v);
  return q;
}

double behavior_loss(const Occupancy& mu, const StateActionTable& f, const TabularPolicy& pi) {
  double total = 0.0;
  for (std::size_t s = 0; s < mu.num_states(); ++s) {
    const double fpi = policy_value_at(f, pi, s);
    for (std::size_t a = 0; a < mu.num_actions(); ++a) total += mu(s, a) * (fpi - f(s, a));
  }
  return total;
}

}  // namespace

Mdp::Mdp(std::size_t num_states, std::size_t num_actions, std::vector<double> transition,
         StateActionTable reward, double gamma, std::size_t start_state,
         std::optional<double> reward_max, std::string id)
    : states_(num_states),
      actions_(num_actions),
      transition_(std::move(transition)),
      reward_(std::move(reward)),
      gamma_(gamma),
      start_(start_state),
      id_(std::move(id)) {
  if (states_ == 0 || actions_ == 0) throw ArgumentError("MDP needs states and actions");
  if (transition_.size() != states_ * actions_ * states_)
    throw ArgumentError("transition tensor has wrong size");
  require_shape(reward_, states_, actions_, "MDP rewards");
  if (!(gamma_ >= 0.0 && gamma_ < 1.0)) throw ArgumentError("gamma must lie in [0, 1)");
  if (start_ >= states_) throw ArgumentError("start state out of range");
  for (std::size_t s = 0; s < states_; ++s)
    for (std::size_t a = 0; a < actions_; ++a) {
      double total = 0.0;
      for (double p : next_state_distribution(s, a)) {
        if (!(p >= 0.0) || !std::isfinite(p))
          throw ArgumentError("transition probabilities must be nonnegative");
        total += p;
      }
      if (std::abs(total - 1.0) > kRowTolerance)
        throw ArgumentError("transition row (" + std::to_string(s) + "," + std::to_string(a) +
                            ") sums to " + std::to_string(total));
    }
  double observed_max = 0.0;
  for (double r : reward_.values()) {
    if (!(r >= 0.0) || !std::isfinite(r)) throw ArgumentError("rewards must lie in [0, Rmax]");
    observed_max = std::max(observed_max, r);
  }
  if (reward_max) {
    if (!(*reward_max >= observed_max) || !std::isfinite(*reward_max))
      throw ArgumentError("reward_max is below the largest reward");
    reward_max_ = *reward_max;
    reward_max_explicit_ = true;
  } else {
    reward_max_ = observed_max;
  }
}

void require_compatible(const Mdp& mdp, const TabularPolicy& pi, const char* what) {
  if (pi.num_states() != mdp.num_states() || pi.num_actions() != mdp.num_actions())
    throw ArgumentError(std::string(what) + ": policy shape does not match the MDP");
}

std::vector<double> exact_state_values(const Mdp& mdp, const TabularPolicy& policy) {
  require_compatible(mdp, policy, "exact_state_values");
  return solve_values(mdp, policy, mdp.reward());
}

QTable exact_q_values(const Mdp& mdp, const TabularPolicy& policy) {
  require_compatible(mdp, policy, "exact_q_values");
  const auto v = solve_values(mdp, policy, mdp.reward());
  QTable q = q_from_values(mdp, mdp.reward(), v);
  // Only round-off can leave [0, Vmax]; the fixed point is unaffected at 1e-15.
  for (double& x : q.values()) x = std::clamp(x, 0.0, mdp.vmax());
  return q;
}

double policy_return(const Mdp& mdp, const TabularPolicy& policy) {
  const QTable q = exact_q_values(mdp, policy);
  return policy_value_at(q, policy, mdp.start_state());
}

Occupancy occupancy_measure(const Mdp& mdp, const TabularPolicy& policy) {
  require_compatible(mdp, policy, "occupancy_measure");
  const std::size_t S = mdp.num_states();
  Eigen::MatrixXd system = Eigen::MatrixXd::Identity(S, S) -
                           mdp.gamma() * policy_transition(mdp, policy).transpose();
  Eigen::VectorXd start = Eigen::VectorXd::Zero(S);
  start(mdp.start_state()) = 1.0 - mdp.gamma();
  Eigen::VectorXd d = system.partialPivLu().solve(start);
  StateActionTable weights(S, mdp.num_actions());
  for (std::size_t s = 0; s < S; ++s)
    for (std::size_t a = 0; a < mdp.num_actions(); ++a)
      weights(s, a) = std::max(0.0, d(s)) * policy(s, a);
  return Occupancy(std::move(weights));
}

QTable bellman_backup_with_reward(const Mdp& mdp, const StateActionTable& reward,
                                  const StateActionTable& f, const TabularPolicy& policy) {
  require_compatible(mdp, policy, "bellman_backup");
  require_shape(f, mdp.num_states(), mdp.num_actions(), "bellman_backup critic");
  require_shape(reward, mdp.num_states(), mdp.num_actions(), "bellman_backup reward");
  const auto v = policy_values(f, policy);
  return q_from_values(mdp, reward, v);
}

QTable bellman_backup(const Mdp& mdp, const StateActionTable& f, const TabularPolicy& policy) {
  return bellman_backup_with_reward(mdp, mdp.reward(), f, policy);
}

OptimalSolution optimal_policy_for_reward(const Mdp& mdp, const StateActionTable& reward) {
  require_shape(reward, mdp.num_states(), mdp.num_actions(), "optimal_policy reward");
  const std::size_t S = mdp.num_states();
  const std::size_t A = mdp.num_actions();
  std::vector<std::size_t> actions(S, 0);
  for (std::size_t s = 0; s < S; ++s) {
    auto row = reward.row(s);
    actions[s] = static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin());
  }
  OptimalSolution out;
  // Policy iteration terminates in finitely many steps; switch only on a strict
  // improvement beyond round-off so ties cannot cycle.
  for (std::size_t iter = 0; iter < 10000; ++iter) {
    TabularPolicy pi = TabularPolicy::deterministic(A, actions);
    const auto v = solve_values(mdp, pi, reward);
    const QTable q = q_from_values(mdp, reward, v);
    bool changed = false;
    for (std::size_t s = 0; s < S; ++s) {
      std::size_t best = actions[s];
      const double scale = 1e-12 * (1.0 + std::abs(q(s, best)));
      for (std::size_t a = 0; a < A; ++a)
        if (q(s, a) > q(s, best) + scale) best = a;
      if (best != actions[s]) {
        actions[s] = best;
        changed = true;
      }
    }
    out.iterations = iter + 1;
    if (!changed) {
      out.policy = std::move(pi);
      out.values = v;
      out.start_value = v[mdp.start_state()];
      return out;
    }
  }
  throw ComputationError("policy iteration did not terminate");
}

OptimalSolution optimal_policy(const Mdp& mdp) {
  return optimal_policy_for_reward(mdp, mdp.reward());
}

double expectation(const Occupancy& d, const StateActionTable& g) {
  return kernels::dot(d.table().values(), g.values());
}

DecompositionReport performance_difference_decomposition(const Mdp& mdp,
                                                         const StateActionTable& f,
                                                         const TabularPolicy& pi_comp,
                                                         const TabularPolicy& pi_hat,
                                                         const TabularPolicy& mu) {
  require_compatible(mdp, pi_comp, "decomposition competitor");
  require_compatible(mdp, pi_hat, "decomposition learner");
  require_compatible(mdp, mu, "decomposition behavior");
  require_shape(f, mdp.num_states(), mdp.num_actions(), "decomposition critic");
  const Occupancy d_mu = occupancy_measure(mdp, mu);
  const Occupancy d_comp = occupancy_measure(mdp, pi_comp);
  const QTable backup = bellman_backup(mdp, f, pi_hat);
  const QTable q_hat = exact_q_values(mdp, pi_hat);

  StateActionTable residual(mdp.num_states(), mdp.num_actions());
  for (std::size_t i = 0; i < residual.size(); ++i)
    residual.values()[i] = f.values()[i] - backup.values()[i];

  DecompositionReport report;
  report.behavior_bellman_term = expectation(d_mu, residual);
  report.competitor_bellman_term = -expectation(d_comp, residual);
  const auto comp_marginal = d_comp.state_marginal();
  for (std::size_t s = 0; s < mdp.num_states(); ++s)
    report.optimization_term += comp_marginal[s] * (policy_value_at(f, pi_comp, s) -
                                                    policy_value_at(f, pi_hat, s));
  report.pessimism_gap_term = behavior_loss(d_mu, f, pi_hat) - behavior_loss(d_mu, q_hat, pi_hat);
  report.decomposed_total = (report.behavior_bellman_term + report.competitor_bellman_term +
                             report.optimization_term + report.pessimism_gap_term) /
                            (1.0 - mdp.gamma());
  report.direct_difference = policy_return(mdp, pi_comp) - policy_return(mdp, pi_hat);
  return report;
}

}  // namespace atac
