#include "atac/dataset.hpp"

#include <cmath>
#include <string>

#include "atac/errors.hpp"
#include "atac/function_class.hpp"
#include "atac/kernels.hpp"
#include "atac/rng.hpp"

namespace atac {
namespace {

void require_data_shape(const Dataset& data, const StateActionTable& f, const char* what) {
  require_shape(f, data.num_states(), data.num_actions(), what);
}

void require_data_policy(const Dataset& data, const TabularPolicy& pi, const char* what) {
  if (pi.num_states() != data.num_states() || pi.num_actions() != data.num_actions())
    throw ArgumentError(std::string(what) + ": policy shape does not match the dataset");
}

}  // namespace

Dataset::Dataset(DatasetMetadata meta, std::vector<Transition> tuples)
    : meta_(std::move(meta)), tuples_(std::move(tuples)) {
  const std::size_t S = meta_.num_states;
  const std::size_t A = meta_.num_actions;
  if (tuples_.empty()) throw ArgumentError("dataset must contain at least one tuple");
  if (S == 0 || A == 0) throw ArgumentError("dataset metadata needs states and actions");
  if (!(meta_.gamma >= 0.0 && meta_.gamma < 1.0))
    throw ArgumentError("dataset gamma must lie in [0, 1)");
  if (meta_.start_state >= S) throw ArgumentError("dataset start state out of range");
  stats_.n = static_cast<double>(tuples_.size());
  stats_.s_count.assign(S, 0.0);
  stats_.sa_count.assign(S * A, 0.0);
  stats_.sas_count.assign(S * A * S, 0.0);
  stats_.reward.assign(S * A, 0.0);
  for (const auto& t : tuples_) {
    if (t.s >= S || t.a >= A || t.s_next >= S)
      throw ArgumentError("dataset tuple index out of range");
    if (!std::isfinite(t.r)) throw ArgumentError("dataset reward is not finite");
    const std::size_t sa = t.s * A + t.a;
    if (stats_.sa_count[sa] > 0.0 && stats_.reward[sa] != t.r)
      throw ArgumentError("dataset has two rewards for pair (" + std::to_string(t.s) + "," +
                          std::to_string(t.a) + ")");
    stats_.reward[sa] = t.r;
    stats_.s_count[t.s] += 1.0;
    stats_.sa_count[sa] += 1.0;
    stats_.sas_count[sa * S + t.s_next] += 1.0;
  }
}

void Dataset::validate_against(const Mdp& mdp) const {
  if (mdp.num_states() != num_states() || mdp.num_actions() != num_actions())
    throw ArgumentError("dataset shape does not match the MDP");
  if (mdp.gamma() != gamma() || mdp.start_state() != meta_.start_state)
    throw ArgumentError("dataset gamma/start state do not match the MDP");
  for (std::size_t i = 0; i < tuples_.size(); ++i) {
    const auto& t = tuples_[i];
    if (t.r != mdp.reward(t.s, t.a))
      throw ArgumentError("tuple " + std::to_string(i) + " reward differs from R(s,a)");
    if (!(mdp.transition(t.s, t.a, t.s_next) > 0.0))
      throw ArgumentError("tuple " + std::to_string(i) + " has an impossible transition");
  }
}

Dataset sample_dataset(const Mdp& mdp, const TabularPolicy& behavior, std::size_t n,
                       std::uint64_t seed, std::string behavior_id) {
  require_compatible(mdp, behavior, "sample_dataset");
  if (n == 0) throw ArgumentError("sample_dataset: n must be at least 1");
  Rng rng(seed);
  std::vector<Transition> tuples;
  tuples.reserve(n);
  const double stop = 1.0 - mdp.gamma();
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint64_t horizon = rng.geometric(stop);
    std::size_t s = mdp.start_state();
    std::size_t a = rng.categorical(behavior.row(s));
    for (std::uint64_t t = 0; t < horizon; ++t) {
      s = rng.categorical(mdp.next_state_distribution(s, a));
      a = rng.categorical(behavior.row(s));
    }
    const std::size_t s_next = rng.categorical(mdp.next_state_distribution(s, a));
    tuples.push_back({s, a, mdp.reward(s, a), s_next});
  }
  DatasetMetadata meta{mdp.id(), std::move(behavior_id), seed, mdp.num_states(),
                       mdp.num_actions(), mdp.gamma(), mdp.start_state()};
  return Dataset(std::move(meta), std::move(tuples));
}

std::vector<double> empirical_targets(const Dataset& data, std::span<const double> next_values) {
  const std::size_t S = data.num_states();
  const std::size_t A = data.num_actions();
  if (next_values.size() != S) throw ArgumentError("empirical_targets: value vector size");
  const auto& st = data.stats();
  std::vector<double> m(S * A, 0.0);
  for (std::size_t sa = 0; sa < S * A; ++sa) {
    if (st.sa_count[sa] == 0.0) continue;
    const std::span<const double> counts(st.sas_count.data() + sa * S, S);
    m[sa] = st.reward[sa] + data.gamma() * kernels::dot(counts, next_values) / st.sa_count[sa];
  }
  return m;
}

LossValue empirical_L(const Dataset& data, const StateActionTable& f, const TabularPolicy& policy) {
  require_data_shape(data, f, "empirical_L");
  require_data_policy(data, policy, "empirical_L");
  const auto& st = data.stats();
  double total = 0.0;
  for (std::size_t s = 0; s < data.num_states(); ++s) {
    if (st.s_count[s] == 0.0) continue;
    double logged = 0.0;
    for (std::size_t a = 0; a < data.num_actions(); ++a)
      logged += st.sa_count[s * data.num_actions() + a] * f(s, a);
    total += st.s_count[s] * policy_value_at(f, policy, s) - logged;
  }
  return {total / st.n, LossKind::L, Provenance::Empirical};
}

LossValue empirical_td(const Dataset& data, const StateActionTable& f,
                       const StateActionTable& bootstrap, const TabularPolicy& policy) {
  require_data_shape(data, f, "empirical_td");
  require_data_shape(data, bootstrap, "empirical_td bootstrap");
  require_data_policy(data, policy, "empirical_td");
  const std::size_t S = data.num_states();
  const auto& st = data.stats();
  const auto v = policy_values(bootstrap, policy);
  std::vector<double> residual(S);
  double total = 0.0;
  for (std::size_t sa = 0; sa < st.sa_count.size(); ++sa) {
    if (st.sa_count[sa] == 0.0) continue;
    const double base = f.values()[sa] - st.reward[sa];
    for (std::size_t sn = 0; sn < S; ++sn) residual[sn] = base - data.gamma() * v[sn];
    total += kernels::weighted_sq_sum({st.sas_count.data() + sa * S, S}, residual);
  }
  return {total / st.n, LossKind::Etd, Provenance::Empirical};
}

LossValue empirical_E(const Dataset& data, const StateActionTable& f, const TabularPolicy& policy,
                      const FunctionClass& fclass) {
  require_data_shape(data, f, "empirical_E");
  require_data_policy(data, policy, "empirical_E");
  const auto& st = data.stats();
  const auto targets = empirical_targets(data, policy_values(f, policy));
  std::vector<double> weights(st.sa_count.size());
  std::vector<double> residual(st.sa_count.size());
  for (std::size_t i = 0; i < weights.size(); ++i) {
    weights[i] = st.sa_count[i] / st.n;
    residual[i] = f.values()[i] - targets[i];
  }
  // The within-(s,a) target variance appears in both terms and cancels.
  const double outer = kernels::weighted_sq_sum(weights, residual);
  const double inner = fclass.min_weighted_distance(weights, targets);
  return {outer - inner, LossKind::E, Provenance::Empirical};
}

LossValue population_L(const Mdp& mdp, const Occupancy& mu, const StateActionTable& f,
                       const TabularPolicy& policy) {
  require_compatible(mdp, policy, "population_L");
  require_shape(mu.table(), mdp.num_states(), mdp.num_actions(), "population_L occupancy");
  require_shape(f, mdp.num_states(), mdp.num_actions(), "population_L critic");
  double total = 0.0;
  for (std::size_t s = 0; s < mdp.num_states(); ++s) {
    const double fpi = policy_value_at(f, policy, s);
    for (std::size_t a = 0; a < mdp.num_actions(); ++a) total += mu(s, a) * (fpi - f(s, a));
  }
  return {total, LossKind::L, Provenance::Population};
}

LossValue population_E(const Mdp& mdp, const Occupancy& mu, const StateActionTable& f,
                       const TabularPolicy& policy) {
  require_shape(mu.table(), mdp.num_states(), mdp.num_actions(), "population_E occupancy");
  const QTable backup = bellman_backup(mdp, f, policy);
  std::vector<double> residual(f.size());
  for (std::size_t i = 0; i < residual.size(); ++i)
    residual[i] = f.values()[i] - backup.values()[i];
  return {kernels::weighted_sq_sum(mu.table().values(), residual), LossKind::E,
          Provenance::Population};
}

TabularPolicy behavior_cloning(const Dataset& data, double smoothing) {
  if (!(smoothing >= 0.0)) throw ArgumentError("behavior_cloning: smoothing must be >= 0");
  const std::size_t S = data.num_states();
  const std::size_t A = data.num_actions();
  const auto& st = data.stats();
  StateActionTable probs(S, A);
  for (std::size_t s = 0; s < S; ++s) {
    if (st.s_count[s] == 0.0) {
      for (double& p : probs.row(s)) p = 1.0 / static_cast<double>(A);
      continue;
    }
    for (std::size_t a = 0; a < A; ++a) probs(s, a) = st.sa_count[s * A + a] + smoothing;
  }
  return TabularPolicy::normalized(std::move(probs));
}

}  // namespace atac
