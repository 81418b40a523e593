#include "atac/table.hpp"

#include <cmath>
#include <string>

#include "atac/errors.hpp"
#include "atac/kernels.hpp"

namespace atac {

StateActionTable::StateActionTable(std::size_t num_states, std::size_t num_actions,
                                   double fill)
    : states_(num_states), actions_(num_actions), values_(num_states * num_actions, fill) {}

StateActionTable::StateActionTable(std::size_t num_states, std::size_t num_actions,
                                   std::vector<double> values)
    : states_(num_states), actions_(num_actions), values_(std::move(values)) {
  if (values_.size() != states_ * actions_)
    throw ArgumentError("table has " + std::to_string(values_.size()) + " entries, expected " +
                        std::to_string(states_ * actions_));
}

TabularPolicy::TabularPolicy(StateActionTable probs) : probs_(std::move(probs)) {
  if (probs_.num_states() == 0 || probs_.num_actions() == 0)
    throw ArgumentError("policy must have at least one state and one action");
  for (std::size_t s = 0; s < probs_.num_states(); ++s) {
    double total = 0.0;
    for (double p : probs_.row(s)) {
      if (!(p >= 0.0) || !std::isfinite(p))
        throw ArgumentError("policy row " + std::to_string(s) + " has a negative entry");
      total += p;
    }
    if (std::abs(total - 1.0) > kRowTolerance)
      throw ArgumentError("policy row " + std::to_string(s) + " sums to " +
                          std::to_string(total));
  }
}

TabularPolicy TabularPolicy::uniform(std::size_t num_states, std::size_t num_actions) {
  if (num_actions == 0) throw ArgumentError("uniform policy needs at least one action");
  return TabularPolicy(StateActionTable(num_states, num_actions,
                                        1.0 / static_cast<double>(num_actions)));
}

TabularPolicy TabularPolicy::deterministic(std::size_t num_actions,
                                           std::span<const std::size_t> actions) {
  StateActionTable probs(actions.size(), num_actions, 0.0);
  for (std::size_t s = 0; s < actions.size(); ++s) {
    if (actions[s] >= num_actions) throw ArgumentError("deterministic policy: bad action");
    probs(s, actions[s]) = 1.0;
  }
  return TabularPolicy(std::move(probs));
}

TabularPolicy TabularPolicy::normalized(StateActionTable weights) {
  for (std::size_t s = 0; s < weights.num_states(); ++s) {
    auto row = weights.row(s);
    double total = 0.0;
    for (double w : row) {
      if (!(w >= 0.0)) throw ArgumentError("normalized: negative weight");
      total += w;
    }
    if (!(total > 0.0) || !std::isfinite(total))
      throw ArgumentError("normalized: row " + std::to_string(s) + " has no mass");
    for (double& w : row) w /= total;
  }
  return TabularPolicy(std::move(weights));
}

Occupancy::Occupancy(StateActionTable weights) : weights_(std::move(weights)) {
  double total = 0.0;
  for (double w : weights_.values()) {
    if (!(w >= 0.0)) throw ArgumentError("occupancy has a negative entry");
    total += w;
  }
  if (std::abs(total - 1.0) > kMassTolerance)
    throw ArgumentError("occupancy mass is " + std::to_string(total));
}

std::vector<double> Occupancy::state_marginal() const {
  std::vector<double> marginal(num_states(), 0.0);
  for (std::size_t s = 0; s < num_states(); ++s)
    for (double w : weights_.row(s)) marginal[s] += w;
  return marginal;
}

bool Occupancy::full_support() const {
  for (double w : weights_.values())
    if (!(w > 0.0)) return false;
  return true;
}

double policy_value_at(const StateActionTable& f, const TabularPolicy& pi, std::size_t s) {
  return kernels::dot(f.row(s), pi.row(s));
}

std::vector<double> policy_values(const StateActionTable& f, const TabularPolicy& pi) {
  std::vector<double> v(f.num_states());
  for (std::size_t s = 0; s < v.size(); ++s) v[s] = policy_value_at(f, pi, s);
  return v;
}

void require_shape(const StateActionTable& table, std::size_t num_states,
                   std::size_t num_actions, const char* what) {
  if (table.num_states() != num_states || table.num_actions() != num_actions)
    throw ArgumentError(std::string(what) + ": expected " + std::to_string(num_states) + "x" +
                        std::to_string(num_actions) + " table, got " +
                        std::to_string(table.num_states()) + "x" +
                        std::to_string(table.num_actions()));
}

}  // namespace atac
