#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace atac {

/// Dense S×A table, row-major by state.
class StateActionTable {
 public:
  StateActionTable() = default;
  StateActionTable(std::size_t num_states, std::size_t num_actions, double fill = 0.0);
  StateActionTable(std::size_t num_states, std::size_t num_actions,
                   std::vector<double> values);

  std::size_t num_states() const noexcept { return states_; }
  std::size_t num_actions() const noexcept { return actions_; }
  std::size_t size() const noexcept { return values_.size(); }

  double operator()(std::size_t s, std::size_t a) const { return values_[s * actions_ + a]; }
  double& operator()(std::size_t s, std::size_t a) { return values_[s * actions_ + a]; }

  std::span<const double> row(std::size_t s) const {
    return {values_.data() + s * actions_, actions_};
  }
  std::span<double> row(std::size_t s) { return {values_.data() + s * actions_, actions_}; }
  std::span<const double> values() const noexcept { return values_; }
  std::span<double> values() noexcept { return values_; }

  bool same_shape(const StateActionTable& other) const noexcept {
    return states_ == other.states_ && actions_ == other.actions_;
  }
  bool operator==(const StateActionTable&) const = default;

 private:
  std::size_t states_ = 0;
  std::size_t actions_ = 0;
  std::vector<double> values_;
};

/// A critic f(s,a). Class-member bounds are checked by the owning class, not here.
class QTable : public StateActionTable {
 public:
  using StateActionTable::StateActionTable;
  QTable() = default;
  explicit QTable(StateActionTable table) : StateActionTable(std::move(table)) {}
};

/// Row-stochastic π(a|s). Immutable once constructed.
class TabularPolicy {
 public:
  static constexpr double kRowTolerance = 1e-12;

  TabularPolicy() = default;
  /// Throws ArgumentError unless every row is a distribution within kRowTolerance.
  explicit TabularPolicy(StateActionTable probs);

  static TabularPolicy uniform(std::size_t num_states, std::size_t num_actions);
  /// Point mass on actions[s] in every state.
  static TabularPolicy deterministic(std::size_t num_actions,
                                     std::span<const std::size_t> actions);
  /// Divides each row by its sum; rows must be nonnegative with positive mass.
  static TabularPolicy normalized(StateActionTable weights);

  std::size_t num_states() const noexcept { return probs_.num_states(); }
  std::size_t num_actions() const noexcept { return probs_.num_actions(); }
  double operator()(std::size_t s, std::size_t a) const { return probs_(s, a); }
  std::span<const double> row(std::size_t s) const { return probs_.row(s); }
  const StateActionTable& table() const noexcept { return probs_; }
  bool operator==(const TabularPolicy&) const = default;

 private:
  StateActionTable probs_;
};

/// Normalized state-action distribution d(s,a).
class Occupancy {
 public:
  static constexpr double kMassTolerance = 1e-10;

  Occupancy() = default;
  /// Throws ArgumentError on negative entries or total mass off 1 by more than kMassTolerance.
  explicit Occupancy(StateActionTable weights);

  std::size_t num_states() const noexcept { return weights_.num_states(); }
  std::size_t num_actions() const noexcept { return weights_.num_actions(); }
  double operator()(std::size_t s, std::size_t a) const { return weights_(s, a); }
  const StateActionTable& table() const noexcept { return weights_; }
  /// d(s) = Σ_a d(s,a).
  std::vector<double> state_marginal() const;
  bool full_support() const;

 private:
  StateActionTable weights_;
};

/// f(s,π) = Σ_a π(a|s) f(s,a).
double policy_value_at(const StateActionTable& f, const TabularPolicy& pi, std::size_t s);
/// The vector s ↦ f(s,π).
std::vector<double> policy_values(const StateActionTable& f, const TabularPolicy& pi);

void require_shape(const StateActionTable& table, std::size_t num_states,
                   std::size_t num_actions, const char* what);

}  // namespace atac
