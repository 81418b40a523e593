#pragma once

// Offline datasets drawn from a behavior occupancy and the loss functionals
// built on them: L (behavior advantage), E (estimated Bellman error) and the
// TD loss, at both the empirical and the population level.

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "atac/mdp.hpp"
#include "atac/table.hpp"

namespace atac {

class FunctionClass;

struct Transition {
  std::size_t s = 0;
  std::size_t a = 0;
  double r = 0.0;
  std::size_t s_next = 0;
  bool operator==(const Transition&) const = default;
};

struct DatasetMetadata {
  std::string mdp_id;
  std::string behavior_id;
  std::uint64_t seed = 0;
  std::size_t num_states = 0;
  std::size_t num_actions = 0;
  double gamma = 0.0;
  std::size_t start_state = 0;
  bool operator==(const DatasetMetadata&) const = default;
};

/// Count statistics of a dataset. Rewards are deterministic per (s,a), so
/// (s,a,s') counts plus one reward per visited pair determine every loss.
struct SufficientStats {
  double n = 0.0;
  std::vector<double> s_count;    // S
  std::vector<double> sa_count;   // S*A
  std::vector<double> sas_count;  // (S*A)*S
  std::vector<double> reward;     // S*A; 0 where unvisited
};

class Dataset {
 public:
  /// Throws ArgumentError when empty, out of range, or when one (s,a) pair
  /// carries two different rewards.
  Dataset(DatasetMetadata meta, std::vector<Transition> tuples);

  std::size_t size() const noexcept { return tuples_.size(); }
  const std::vector<Transition>& tuples() const noexcept { return tuples_; }
  const DatasetMetadata& meta() const noexcept { return meta_; }
  const SufficientStats& stats() const noexcept { return stats_; }
  std::size_t num_states() const noexcept { return meta_.num_states; }
  std::size_t num_actions() const noexcept { return meta_.num_actions; }
  double gamma() const noexcept { return meta_.gamma; }

  /// Checks r = R(s,a) exactly and P(s'|s,a) > 0 for every tuple.
  void validate_against(const Mdp& mdp) const;

 private:
  DatasetMetadata meta_;
  std::vector<Transition> tuples_;
  SufficientStats stats_;
};

/// N i.i.d. tuples with (s,a) ~ d^μ: each tuple rolls μ from s0 for a
/// Geometric(1 − γ) horizon T and logs the step-T transition.
Dataset sample_dataset(const Mdp& mdp, const TabularPolicy& behavior, std::size_t n,
                       std::uint64_t seed, std::string behavior_id = "behavior");

enum class LossKind { L, E, Etd, Ew };
enum class Provenance { Population, Empirical };

struct LossValue {
  double value = 0.0;
  LossKind kind = LossKind::L;
  Provenance provenance = Provenance::Empirical;
};

/// L_D(f,π) = E_D[f(s,π) − f(s,a)].
LossValue empirical_L(const Dataset& data, const StateActionTable& f, const TabularPolicy& policy);
/// E_D(f,π) = E_D[(f − r − γ f(s',π))²] − min_{f'∈F} E_D[(f' − r − γ f(s',π))²].
LossValue empirical_E(const Dataset& data, const StateActionTable& f, const TabularPolicy& policy,
                      const FunctionClass& fclass);
/// E^td_D(f, f', π) over the whole dataset.
LossValue empirical_td(const Dataset& data, const StateActionTable& f,
                       const StateActionTable& bootstrap, const TabularPolicy& policy);
/// L_μ(π,f) = E_μ[f(s,π) − f(s,a)].
LossValue population_L(const Mdp& mdp, const Occupancy& mu, const StateActionTable& f,
                       const TabularPolicy& policy);
/// E_μ(π,f) = E_μ[((f − T^π f)(s,a))²].
LossValue population_E(const Mdp& mdp, const Occupancy& mu, const StateActionTable& f,
                       const TabularPolicy& policy);

/// π̂(a|s) ∝ count(s,a) + smoothing; unseen states get the uniform row.
TabularPolicy behavior_cloning(const Dataset& data, double smoothing = 0.1);

/// Empirical TD targets m(s,a) = r(s,a) + γ Σ_s' P̂(s'|s,a) v(s') for visited
/// pairs (0 elsewhere).
std::vector<double> empirical_targets(const Dataset& data, std::span<const double> next_values);

}  // namespace atac
