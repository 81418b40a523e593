#include "atac/two_timescale.hpp"

#include <algorithm>
#include <cmath>

#include "atac/errors.hpp"
#include "atac/kernels.hpp"
#include "atac/rng.hpp"

namespace atac {
namespace {

StateActionTable elementwise_min(const StateActionTable& a, const StateActionTable& b) {
  StateActionTable out(a.num_states(), a.num_actions());
  for (std::size_t i = 0; i < a.size(); ++i) out.values()[i] = std::min(a.values()[i], b.values()[i]);
  return out;
}

bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

double entropy_min_of(const PracticalConfig& config, std::size_t num_actions) {
  return config.entropy_min ? *config.entropy_min
                            : 0.5 * std::log(static_cast<double>(num_actions));
}

// Table-space l_critic gradient. With include_l = false only β E^w remains
// (used for critic pre-training).
double critic_table_gradient(Batch batch, const StateActionTable& f, const StateActionTable& t1,
                             const StateActionTable& t2, const TabularPolicy& pi,
                             const PracticalConfig& config, double gamma, std::size_t s0,
                             bool include_l, std::vector<double>& grad) {
  const std::size_t A = f.num_actions();
  grad.assign(f.size(), 0.0);
  const auto vf = policy_values(f, pi);
  const auto vmin = policy_values(elementwise_min(t1, t2), pi);
  const double inv_n = 1.0 / static_cast<double>(batch.size());
  const double beta = include_l ? config.beta : 1.0;
  const double w = config.w;
  double l_term = 0.0;
  double e_term = 0.0;
  for (const auto& t : batch) {
    const std::size_t sa = t.s * A + t.a;
    if (include_l && config.mode == PessimismMode::Relative) {
      l_term += vf[t.s] - f.values()[sa];
      for (std::size_t b = 0; b < A; ++b) grad[t.s * A + b] += pi(t.s, b) * inv_n;
      grad[sa] -= inv_n;
    }
    const double dr = f.values()[sa] - t.r - gamma * vf[t.s_next];
    const double dt = f.values()[sa] - t.r - gamma * vmin[t.s_next];
    e_term += (1.0 - w) * dr * dr + w * dt * dt;
    grad[sa] += beta * 2.0 * ((1.0 - w) * dr + w * dt) * inv_n;
    const double back = beta * 2.0 * (1.0 - w) * dr * gamma * inv_n;
    for (std::size_t b = 0; b < A; ++b) grad[t.s_next * A + b] -= back * pi(t.s_next, b);
  }
  double loss = beta * e_term * inv_n;
  if (include_l) {
    if (config.mode == PessimismMode::Relative) {
      loss += l_term * inv_n;
    } else {
      loss += vf[s0];
      for (std::size_t b = 0; b < A; ++b) grad[s0 * A + b] += pi(s0, b);
    }
  }
  return loss;
}

void apply_update(std::vector<double>& params, std::span<const double> grad, double eta,
                  MomentState& moments, const OptimizerConfig& opt) {
  if (opt.kind == OptimizerKind::PlainSGD) {
    for (std::size_t i = 0; i < params.size(); ++i) params[i] -= eta * grad[i];
    return;
  }
  if (moments.m.size() != params.size()) {
    moments.m.assign(params.size(), 0.0);
    moments.v.assign(params.size(), 0.0);
    moments.t = 0;
  }
  ++moments.t;
  const double c1 = 1.0 - std::pow(opt.b1, static_cast<double>(moments.t));
  const double c2 = 1.0 - std::pow(opt.b2, static_cast<double>(moments.t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    moments.m[i] = opt.b1 * moments.m[i] + (1.0 - opt.b1) * grad[i];
    moments.v[i] = opt.b2 * moments.v[i] + (1.0 - opt.b2) * grad[i] * grad[i];
    params[i] -= eta * (moments.m[i] / c1) / (std::sqrt(moments.v[i] / c2) + opt.eps);
  }
}

void update_critics(ActorCriticState& state, const FunctionClass& fclass, Batch batch,
                    const PracticalConfig& config, double gamma, std::size_t s0, bool include_l) {
  const TabularPolicy pi = policy_from_logits(state.logits);
  const QTable t1 = fclass.evaluate(state.target1);
  const QTable t2 = fclass.evaluate(state.target2);
  std::vector<double> table_grad;
  for (int which = 0; which < 2; ++which) {
    auto& params = which == 0 ? state.f1 : state.f2;
    auto& moments = which == 0 ? state.opt_f1 : state.opt_f2;
    const QTable f = fclass.evaluate(params);
    critic_table_gradient(batch, f, t1, t2, pi, config, gamma, s0, include_l, table_grad);
    const auto grad = fclass.pullback(table_grad);
    if (!all_finite(grad)) throw NumericalDivergence("non-finite critic gradient", state.step);
    apply_update(params, grad, config.eta_fast, moments, config.optimizer);
    params = project_member(fclass, params);
    if (!all_finite(params)) throw NumericalDivergence("non-finite critic parameters", state.step);
  }
}

struct FullMetrics {
  double td = 0.0;
  double l_critic = 0.0;
  double l_actor = 0.0;
  double entropy = 0.0;
};

FullMetrics full_metrics(const ActorCriticState& state, const FunctionClass& fclass,
                         const Dataset& data, const PracticalConfig& config) {
  const Batch all(data.tuples());
  const TabularPolicy pi = policy_from_logits(state.logits);
  const QTable f1 = fclass.evaluate(state.f1);
  FullMetrics m;
  m.td = td_loss(all, f1, f1, pi, data.gamma());
  m.l_critic = critic_loss_gradient(fclass, all, state.f1, state.target1, state.target2, pi,
                                    config, data.gamma(), data.meta().start_state)
                   .loss;
  const auto actor = actor_loss_gradient(all, f1, state.logits, state.alpha,
                                         entropy_min_of(config, data.num_actions()));
  m.l_actor = actor.loss;
  m.entropy = actor.entropy;
  return m;
}

}  // namespace

void validate_config(const PracticalConfig& c) {
  auto bad = [](const char* what) { throw ArgumentError(std::string("practical config: ") + what); };
  if (!(c.beta >= 0.0) || !std::isfinite(c.beta)) bad("beta must be finite and >= 0");
  if (!(c.w >= 0.0 && c.w <= 1.0)) bad("w must lie in [0, 1]");
  if (!(c.tau >= 0.0 && c.tau <= 1.0)) bad("tau must lie in [0, 1]");
  if (!(c.eta_fast >= 0.0) || !(c.eta_slow >= 0.0)) bad("step sizes must be >= 0");
  if (c.eta_slow > c.eta_fast) bad("eta_slow must not exceed eta_fast");
  if (c.minibatch_size == 0) bad("minibatch size must be at least 1");
  if (c.checkpoint_every == 0) bad("checkpoint interval must be at least 1");
  if (!(c.alpha_init >= 0.0)) bad("alpha_init must be >= 0");
  if (!(c.bc_smoothing >= 0.0)) bad("bc smoothing must be >= 0");
  if (c.critic_class && c.critic_class->kind() == ClassKind::FiniteEnumeration)
    bad("the critic class must be parametric");
  const auto& o = c.optimizer;
  if (o.kind == OptimizerKind::AdaptiveMoments &&
      !(o.b1 >= 0.0 && o.b1 < 1.0 && o.b2 >= 0.0 && o.b2 < 1.0 && o.eps > 0.0))
    bad("adaptive-moment constants out of range");
}

TabularPolicy policy_from_logits(const StateActionTable& logits) {
  StateActionTable probs(logits.num_states(), logits.num_actions());
  for (std::size_t s = 0; s < logits.num_states(); ++s) {
    const auto row = logits.row(s);
    const double top = *std::max_element(row.begin(), row.end());
    for (std::size_t a = 0; a < logits.num_actions(); ++a) probs(s, a) = std::exp(row[a] - top);
  }
  return TabularPolicy::normalized(std::move(probs));
}

double td_loss(Batch batch, const StateActionTable& f, const StateActionTable& bootstrap,
               const TabularPolicy& policy, double gamma) {
  if (batch.empty()) throw ArgumentError("td_loss: empty batch");
  const auto v = policy_values(bootstrap, policy);
  double total = 0.0;
  for (const auto& t : batch) {
    const double d = f(t.s, t.a) - t.r - gamma * v[t.s_next];
    total += d * d;
  }
  return total / static_cast<double>(batch.size());
}

double dqra_loss(Batch batch, const StateActionTable& f, const StateActionTable& target1,
                 const StateActionTable& target2, const TabularPolicy& policy, double gamma,
                 double w) {
  if (!(w >= 0.0 && w <= 1.0)) throw ArgumentError("dqra_loss: w must lie in [0, 1]");
  const StateActionTable fmin = elementwise_min(target1, target2);
  if (w == 0.0) return td_loss(batch, f, f, policy, gamma);
  if (w == 1.0) return td_loss(batch, f, fmin, policy, gamma);
  return (1.0 - w) * td_loss(batch, f, f, policy, gamma) +
         w * td_loss(batch, f, fmin, policy, gamma);
}

LossGradient critic_loss_gradient(const FunctionClass& fclass, Batch batch,
                                  std::span<const double> params, std::span<const double> target1,
                                  std::span<const double> target2, const TabularPolicy& policy,
                                  const PracticalConfig& config, double gamma,
                                  std::size_t start_state) {
  if (batch.empty()) throw ArgumentError("critic loss: empty batch");
  std::vector<double> table_grad;
  LossGradient out;
  out.loss = critic_table_gradient(batch, fclass.evaluate(params), fclass.evaluate(target1),
                                   fclass.evaluate(target2), policy, config, gamma, start_state,
                                   true, table_grad);
  out.gradient = fclass.pullback(table_grad);
  return out;
}

ActorLossGradient actor_loss_gradient(Batch batch, const StateActionTable& f1,
                                      const StateActionTable& logits, double alpha,
                                      double entropy_min) {
  if (batch.empty()) throw ArgumentError("actor loss: empty batch");
  require_shape(f1, logits.num_states(), logits.num_actions(), "actor loss critic");
  const std::size_t S = logits.num_states();
  const std::size_t A = logits.num_actions();
  const TabularPolicy pi = policy_from_logits(logits);
  std::vector<double> entropy(S, 0.0), fpi(S, 0.0);
  for (std::size_t s = 0; s < S; ++s) {
    for (std::size_t a = 0; a < A; ++a)
      if (pi(s, a) > 0.0) entropy[s] -= pi(s, a) * std::log(pi(s, a));
    fpi[s] = policy_value_at(f1, pi, s);
  }
  ActorLossGradient out;
  out.logit_gradient = StateActionTable(S, A, 0.0);
  const double inv_n = 1.0 / static_cast<double>(batch.size());
  double advantage = 0.0;
  double h_bar = 0.0;
  for (const auto& t : batch) {
    advantage += fpi[t.s] - f1(t.s, t.a);
    h_bar += entropy[t.s];
    for (std::size_t b = 0; b < A; ++b) {
      const double p = pi(t.s, b);
      const double logp = p > 0.0 ? std::log(p) : 0.0;
      out.logit_gradient(t.s, b) +=
          (-p * (f1(t.s, b) - fpi[t.s]) + alpha * p * (logp + entropy[t.s])) * inv_n;
    }
  }
  out.entropy = h_bar * inv_n;
  out.loss = -advantage * inv_n - alpha * (out.entropy - entropy_min);
  out.alpha_gradient = -(out.entropy - entropy_min);
  return out;
}

void critic_step(ActorCriticState& state, const FunctionClass& fclass, Batch batch,
                 const PracticalConfig& config, double gamma, std::size_t start_state) {
  if (batch.empty()) throw ArgumentError("critic_step: empty batch");
  update_critics(state, fclass, batch, config, gamma, start_state, true);
}

void actor_step(ActorCriticState& state, const FunctionClass& fclass, Batch batch,
                const PracticalConfig& config) {
  const QTable f1 = fclass.evaluate(state.f1);
  const auto g = actor_loss_gradient(batch, f1, state.logits, state.alpha,
                                     entropy_min_of(config, state.logits.num_actions()));
  if (!all_finite(g.logit_gradient.values()) || !std::isfinite(g.alpha_gradient))
    throw NumericalDivergence("non-finite actor gradient", state.step);
  std::vector<double> logits(state.logits.values().begin(), state.logits.values().end());
  apply_update(logits, g.logit_gradient.values(), config.eta_slow, state.opt_actor,
               config.optimizer);
  if (!all_finite(logits)) throw NumericalDivergence("non-finite policy logits", state.step);
  std::copy(logits.begin(), logits.end(), state.logits.values().begin());
  // Dual ascent on α: the loss gradient in α is −(H̄ − H_min).
  state.alpha = std::max(0.0, state.alpha + config.eta_fast * g.alpha_gradient);
}

void target_step(ActorCriticState& state, double tau) {
  if (!(tau >= 0.0 && tau <= 1.0)) throw ArgumentError("target_step: tau must lie in [0, 1]");
  if (state.target1.size() != state.f1.size() || state.target2.size() != state.f2.size())
    throw ArgumentError("target_step: target and critic shapes differ");
  kernels::axpby(tau, state.f1, 1.0 - tau, state.target1);
  kernels::axpby(tau, state.f2, 1.0 - tau, state.target2);
}

PracticalTrace run_practical(const PracticalConfig& config, const Dataset& data, const Mdp& env) {
  validate_config(config);
  if (data.num_states() != env.num_states() || data.num_actions() != env.num_actions())
    throw ArgumentError("run_practical: dataset and MDP shapes differ");
  const FunctionClass fclass = config.critic_class
                                   ? *config.critic_class
                                   : FunctionClass::box(env.num_states(), env.num_actions(),
                                                        env.vmax());
  if (fclass.num_states() != env.num_states() || fclass.num_actions() != env.num_actions())
    throw ArgumentError("run_practical: critic class shape does not match the MDP");
  const std::size_t P = fclass.parameter_dim();
  const double gamma = data.gamma();
  const std::size_t s0 = data.meta().start_state;
  Rng rng(config.seed);

  ActorCriticState state;
  auto draw = [&] {
    std::vector<double> p(P, 0.0);
    if (fclass.kind() == ClassKind::TabularBox) {
      for (double& v : p) v = rng.uniform(0.0, fclass.vmax());
    } else {
      const double scale = 1.0 / std::sqrt(static_cast<double>(fclass.feature_dim()));
      for (std::size_t i = 0; i < fclass.feature_dim(); ++i) p[i] = scale * rng.normal();
    }
    return project_member(fclass, p);
  };
  if (config.critic_init) {
    if (config.critic_init->size() != P)
      throw ArgumentError("run_practical: critic_init has the wrong dimension");
    state.f1 = project_member(fclass, *config.critic_init);
    state.f2 = state.f1;
  } else {
    state.f1 = draw();
    state.f2 = config.identical_critic_init ? state.f1 : draw();
  }
  state.target1 = state.f1;
  state.target2 = state.f2;
  state.logits = StateActionTable(env.num_states(), env.num_actions(), 0.0);
  state.alpha = config.alpha_init;

  PracticalTrace trace;
  std::vector<Transition> batch(config.minibatch_size);
  auto sample = [&] {
    const auto& tuples = data.tuples();
    for (auto& t : batch) t = tuples[rng.index(tuples.size())];
    return Batch(batch);
  };
  auto record = [&](std::size_t epoch) {
    const FullMetrics m = full_metrics(state, fclass, data, config);
    EpochRecord r{epoch, policy_return(env, policy_from_logits(state.logits)), m.td, m.l_critic,
                  m.l_actor, state.alpha, m.entropy};
    trace.epochs.push_back(r);
    return r;
  };

  try {
    if (config.warm_start_epochs > 0) {
      const TabularPolicy bc = behavior_cloning(data, config.bc_smoothing);
      for (std::size_t i = 0; i < bc.table().size(); ++i)
        state.logits.values()[i] = std::log(bc.table().values()[i]);
      if (config.beta > 0.0) {
        const std::size_t steps = config.warm_start_epochs * config.steps_per_epoch;
        for (std::size_t k = 0; k < steps; ++k) {
          update_critics(state, fclass, sample(), config, gamma, s0, false);
          target_step(state, config.tau);
        }
        state.opt_f1 = {};
        state.opt_f2 = {};
      }
    }
    record(0);
    for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
      for (std::size_t k = 0; k < config.steps_per_epoch; ++k) {
        const Batch b = sample();
        critic_step(state, fclass, b, config, gamma, s0);
        actor_step(state, fclass, b, config);
        target_step(state, config.tau);
        ++state.step;
      }
      const EpochRecord r = record(epoch);
      if (!std::isfinite(r.td_error) || !std::isfinite(r.l_critic))
        throw NumericalDivergence("non-finite full-dataset loss", state.step);
      if (epoch % config.checkpoint_every == 0 || epoch == config.epochs)
        trace.checkpoints.push_back(
            {epoch, r.value, policy_from_logits(state.logits), state.f1});
    }
  } catch (const NumericalDivergence& e) {
    trace.diverged = true;
    trace.divergence_step = e.step();
    trace.divergence_message = e.what();
  }

  trace.final_policy = policy_from_logits(state.logits);
  trace.last_value = policy_return(env, trace.final_policy);
  trace.best_value = trace.epochs.empty() ? trace.last_value : trace.epochs.front().value;
  if (!trace.checkpoints.empty()) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < trace.checkpoints.size(); ++i)
      if (trace.checkpoints[i].value > trace.checkpoints[best].value) best = i;
    trace.best_checkpoint = best;
    trace.best_value = trace.checkpoints[best].value;
  }
  trace.final_state = std::move(state);
  return trace;
}

}  // namespace atac
