#pragma once

// Random generators and the named built-in instances.

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "atac/analysis.hpp"
#include "atac/function_class.hpp"
#include "atac/mdp.hpp"
#include "atac/table.hpp"
#include "atac/two_timescale.hpp"

namespace atac {

/// Dirichlet(concentration) transition rows, rewards uniform on [0, 1],
/// Rmax = 1, start state 0.
Mdp random_mdp(std::size_t num_states, std::size_t num_actions, double gamma, std::uint64_t seed,
               double concentration = 1.0);
/// Rows (1 − floor_mix)·Dirichlet(1) + floor_mix·uniform.
TabularPolicy random_policy(std::size_t num_states, std::size_t num_actions, std::uint64_t seed,
                            double floor_mix = 0.0);
QTable random_qtable(std::size_t num_states, std::size_t num_actions, double vmax,
                     std::uint64_t seed);
/// Uniform draw from the probability simplex over all S×A pairs.
Occupancy random_occupancy(std::size_t num_states, std::size_t num_actions, std::uint64_t seed);

/// States 0..n−1 in a line; action 1 moves right w.p. 0.9 (else stays),
/// action 0 moves left. Reward 1 for any action in the last state.
Mdp chain_mdp(std::size_t num_states, double gamma = 0.9);
/// width × height grid, actions up/right/down/left with 0.1 slip to a uniform
/// random neighbor; reward 1 in the far corner, which is absorbing.
Mdp gridworld_mdp(std::size_t width, std::size_t height, double gamma = 0.9);

struct BanditInstance {
  Mdp mdp;  // one state, γ = 0
  BanditGame game;
  TabularPolicy behavior;
};

/// Two arms with rewards (1, 2), behavior (1/4, 3/4), critics
/// {(1,2), (2,0), (0,0), (1,1), (2,2)}, policies: both pure arms and a 0.05
/// grid of mixtures.
BanditInstance bandit_appendix_c();

struct PessimismContrast {
  Mdp mdp;
  TabularPolicy behavior;  // always the second arm
  FunctionClass fclass;    // {(1,2), (2,0)}
};

/// Two-arm bandit on which relative and absolute pessimism disagree at β = 0.
PessimismContrast pessimism_contrast_bandit();

struct RobustPiInstance {
  Mdp mdp;
  TabularPolicy behavior;
  FunctionClass fclass;  // the true Q (any policy) and a branch-swapped rival
  std::size_t dataset_size = 0;
  std::size_t iterations = 0;
};

/// A start state choosing between a rewarding and a barren branch; the rival
/// critic swaps the branch values. Behavior takes the good branch w.p. 0.7.
RobustPiInstance robust_pi_instance();

struct CoverageInstance {
  Mdp mdp;
  TabularPolicy behavior;  // uniform
};

/// One early decision between a wide fan of intermediate states leading to the
/// full reward and a direct route to half the reward.
CoverageInstance coverage_instance();

struct DivergenceInstance {
  Mdp mdp;
  TabularPolicy behavior;
  std::size_t dataset_size = 0;
  PracticalConfig config;  // linear critic, plain SGD, no warm start
};

/// Two states, two-dimensional features, data that rarely takes the rewarding
/// action: bootstrapped TD through the target diverges, the residual loss is
/// stable but slow, and their mixture learns.
DivergenceInstance divergence_instance();

/// Names accepted by the generate command.
std::vector<std::string> instance_names();

}  // namespace atac
