#pragma once

// Critic hypothesis classes and the pessimistic critic objectives
//   Relative: L(π,f) + β E(π,f)       Absolute: f(s0,π) + β E(π,f)
// at population level (exact occupancy) or sample level (a dataset).

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <variant>
#include <vector>

#include "atac/dataset.hpp"
#include "atac/mdp.hpp"
#include "atac/table.hpp"

namespace atac {

enum class ClassKind { FiniteEnumeration, TabularBox, LinearBounded };

class FunctionClass {
 public:
  /// Members must share one shape and lie in [0, vmax].
  static FunctionClass finite(std::vector<QTable> members, double vmax);
  /// All tables with 0 ≤ f(s,a) ≤ vmax.
  static FunctionClass box(std::size_t num_states, std::size_t num_actions, double vmax);
  /// f(s,a) = φ(s,a)·w (+ b when bias_unconstrained) with ‖w‖ ≤ bound.
  /// `features` is row-major (S*A) × dim.
  static FunctionClass linear(std::size_t num_states, std::size_t num_actions,
                              std::vector<double> features, std::size_t dim, double bound,
                              bool bias_unconstrained);

  ClassKind kind() const noexcept { return kind_; }
  std::size_t num_states() const noexcept { return states_; }
  std::size_t num_actions() const noexcept { return actions_; }
  /// The value bound the class was declared with (box bound, member bound).
  double vmax() const noexcept { return vmax_; }

  // FiniteEnumeration
  const std::vector<QTable>& members() const;

  // LinearBounded
  std::size_t feature_dim() const noexcept { return dim_; }
  double weight_bound() const noexcept { return bound_; }
  bool has_bias() const noexcept { return bias_; }
  std::span<const double> features() const noexcept { return features_; }

  bool is_parametric() const noexcept { return kind_ != ClassKind::FiniteEnumeration; }
  /// Box: S*A. Linear: dim (+1 for the bias, stored last). Throws NotParametric.
  std::size_t parameter_dim() const;
  /// Table represented by a parameter vector. Throws NotParametric.
  QTable evaluate(std::span<const double> params) const;
  /// Jᵀ g for a table-space vector g (the chain rule through evaluate).
  std::vector<double> pullback(std::span<const double> table_grad) const;
  /// Row-major (S*A) × parameter_dim() Jacobian of evaluate.
  std::vector<double> jacobian() const;
  /// Parameters of the given table when it lies in the range of evaluate.
  std::vector<double> parameters_of(const QTable& f) const;

  /// min over members f' of Σ w (f' − target)². Finite: exact scan. Box:
  /// coordinatewise clamp. Linear: weighted least squares on the norm ball.
  double min_weighted_distance(std::span<const double> weights,
                               std::span<const double> targets) const;

 private:
  ClassKind kind_ = ClassKind::TabularBox;
  std::size_t states_ = 0;
  std::size_t actions_ = 0;
  double vmax_ = 0.0;
  std::vector<QTable> members_;
  std::vector<double> features_;
  std::size_t dim_ = 0;
  double bound_ = 0.0;
  bool bias_ = false;
};

/// Box: clamp to [0, vmax]. Linear: radial rescale of the weights onto the
/// ball of radius B, bias untouched. Finite: throws NotParametric.
std::vector<double> project_member(const FunctionClass& fclass, std::span<const double> raw);

enum class PessimismMode { Relative, Absolute };

struct PopulationSource {
  std::shared_ptr<const Mdp> mdp;
  Occupancy mu;
};

struct SampleSource {
  std::shared_ptr<const Dataset> data;
};

using DataSource = std::variant<PopulationSource, SampleSource>;

struct CriticObjective {
  PessimismMode mode = PessimismMode::Relative;
  double beta = 0.0;
  DataSource source;
  TabularPolicy policy;
};

void validate_objective(const FunctionClass& fclass, const CriticObjective& objective);

struct ObjectiveValue {
  double total = 0.0;
  double l_term = 0.0;  // L(π,f) or f(s0,π)
  double e_term = 0.0;  // E(π,f), before β
};

ObjectiveValue evaluate_objective(const FunctionClass& fclass, const CriticObjective& objective,
                                  const StateActionTable& f);

struct SolveOptions {
  double gradient_tolerance = 1e-8;
  std::size_t max_iterations = 100000;
  std::size_t power_iterations = 50;
  std::size_t probes = 32;
  std::uint64_t probe_seed = 0x5eed;
  /// Parameters to start from (warm start); ignored when the size is wrong.
  std::vector<double> initial;
};

struct CriticSolution {
  QTable f;
  std::vector<double> params;        // empty for FiniteEnumeration
  std::optional<std::size_t> index;  // FiniteEnumeration member
  ObjectiveValue objective;
  std::size_t iterations = 0;
  double gradient_norm = 0.0;  // projected-gradient norm of the quadratic model
  bool converged = true;
  bool certified = true;  // objective ≤ every probe's objective
};

/// Minimizes the critic objective over the class. Throws UnidentifiedCritic for
/// TabularBox + population + Relative when μ lacks full support.
CriticSolution solve_critic(const FunctionClass& fclass, const CriticObjective& objective,
                            const SolveOptions& options = {});

QTable critic_argmin(const FunctionClass& fclass, const CriticObjective& objective);

struct AuditReport {
  /// Per supplied policy: min over the class of max over the listed
  /// occupancies of ‖f − T^π f‖²_ν.
  std::vector<double> values;
  std::size_t admissible_count = 0;
  /// True when the class min was found by exact scan (finite classes).
  bool exact = true;
};

/// The admissible set is approximated by the occupancies of `policies`.
/// Throws EmptyAdmissibleSet when the list is empty.
AuditReport class_realizability_audit(const FunctionClass& fclass, const Mdp& mdp,
                                      const std::vector<TabularPolicy>& policies);

}  // namespace atac
