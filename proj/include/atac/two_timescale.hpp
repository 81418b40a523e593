#pragma once

// The practical two-timescale trainer: double critics on the DQRA loss with
// target tables and projection, a softmax actor with an entropy floor, and
// per-epoch evaluation on the true MDP.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "atac/dataset.hpp"
#include "atac/function_class.hpp"
#include "atac/mdp.hpp"
#include "atac/table.hpp"

namespace atac {

enum class OptimizerKind { PlainSGD, AdaptiveMoments };

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::AdaptiveMoments;
  double b1 = 0.9;
  double b2 = 0.999;
  double eps = 1e-8;
};

struct PracticalConfig {
  PessimismMode mode = PessimismMode::Relative;
  double beta = 1.0;
  double w = 0.5;
  double tau = 0.005;
  double eta_fast = 0.0005;
  double eta_slow = 0.0005 * 1e-3;
  std::size_t minibatch_size = 256;
  std::size_t epochs = 10;
  std::size_t steps_per_epoch = 100;
  /// ½ log|A| when unset.
  std::optional<double> entropy_min;
  OptimizerConfig optimizer;
  /// Epochs (of steps_per_epoch steps) of critic pre-training after the BC fit.
  /// 0 disables the warm start entirely.
  std::size_t warm_start_epochs = 0;
  double bc_smoothing = 0.1;
  double alpha_init = 1.0;
  /// Critic parameterization; the box class with the MDP's Vmax when unset.
  std::optional<FunctionClass> critic_class;
  /// Explicit initial critic parameters (both critics); drawn from the seed when unset.
  std::optional<std::vector<double>> critic_init;
  bool identical_critic_init = false;
  std::size_t checkpoint_every = 1;
  std::uint64_t seed = 0;
};

void validate_config(const PracticalConfig& config);

struct MomentState {
  std::vector<double> m;
  std::vector<double> v;
  std::uint64_t t = 0;
};

struct ActorCriticState {
  std::vector<double> f1, f2;
  std::vector<double> target1, target2;
  StateActionTable logits;
  double alpha = 1.0;
  MomentState opt_f1, opt_f2, opt_actor;
  long step = 0;
};

using Batch = std::span<const Transition>;

/// Softmax of each logits row.
TabularPolicy policy_from_logits(const StateActionTable& logits);

/// Mean of (f(s,a) − r − γ bootstrap(s',π))².
double td_loss(Batch batch, const StateActionTable& f, const StateActionTable& bootstrap,
               const TabularPolicy& policy, double gamma);
/// (1−w) td(f,f) + w td(f, min(t1,t2)).
double dqra_loss(Batch batch, const StateActionTable& f, const StateActionTable& target1,
                 const StateActionTable& target2, const TabularPolicy& policy, double gamma,
                 double w);

struct LossGradient {
  double loss = 0.0;
  std::vector<double> gradient;
};

/// l_critic and its gradient in the class's parameters: the L term (or
/// f(s0,π) in Absolute mode) plus β times the DQRA loss, targets held fixed.
LossGradient critic_loss_gradient(const FunctionClass& fclass, Batch batch,
                                  std::span<const double> params, std::span<const double> target1,
                                  std::span<const double> target2, const TabularPolicy& policy,
                                  const PracticalConfig& config, double gamma,
                                  std::size_t start_state);

struct ActorLossGradient {
  double loss = 0.0;
  double entropy = 0.0;  // batch-average policy entropy
  StateActionTable logit_gradient;
  double alpha_gradient = 0.0;  // ∂loss/∂α
};

/// −L(f1,π) − α(H̄ − Entropy_min) and its logit gradient.
ActorLossGradient actor_loss_gradient(Batch batch, const StateActionTable& f1,
                                      const StateActionTable& logits, double alpha,
                                      double entropy_min);

/// Both critics: one optimizer step on l_critic at eta_fast, then projection.
void critic_step(ActorCriticState& state, const FunctionClass& fclass, Batch batch,
                 const PracticalConfig& config, double gamma, std::size_t start_state);
/// Logits at eta_slow on the actor loss using f1 only; α ← max(0, α − η_fast(H̄ − H_min)).
void actor_step(ActorCriticState& state, const FunctionClass& fclass, Batch batch,
                const PracticalConfig& config);
/// f̄ ← (1−τ) f̄ + τ f for both pairs.
void target_step(ActorCriticState& state, double tau);

struct EpochRecord {
  std::size_t epoch = 0;
  double value = 0.0;     // J(π)
  double td_error = 0.0;  // td(f1, f1) on the full dataset
  double l_critic = 0.0;
  double l_actor = 0.0;
  double alpha = 0.0;
  double entropy = 0.0;
};

struct Checkpoint {
  std::size_t epoch = 0;
  double value = 0.0;
  TabularPolicy policy;
  std::vector<double> f1;
};

struct PracticalTrace {
  std::vector<EpochRecord> epochs;  // epoch 0 is the state before training
  std::vector<Checkpoint> checkpoints;
  std::size_t best_checkpoint = 0;
  TabularPolicy final_policy;
  ActorCriticState final_state;
  double last_value = 0.0;
  double best_value = 0.0;
  bool diverged = false;
  long divergence_step = -1;
  std::string divergence_message;
};

/// Divergence (a non-finite gradient or update) ends the run early and is
/// recorded in the trace rather than thrown.
PracticalTrace run_practical(const PracticalConfig& config, const Dataset& data, const Mdp& env);

}  // namespace atac
