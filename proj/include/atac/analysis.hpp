#pragma once

// Diagnostics and experiment protocols: concentrability, the robust policy
// improvement score, β sweeps, the DQRA stability study and the
// maximin-versus-minimax bandit comparison.

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "atac/dataset.hpp"
#include "atac/function_class.hpp"
#include "atac/mdp.hpp"
#include "atac/solvers.hpp"
#include "atac/two_timescale.hpp"

namespace atac {

/// max over members of ‖f − T^π f‖²_ν / ‖f − T^π f‖²_μ. Members with both
/// norms zero are skipped; a zero denominator alone gives +infinity.
double concentrability(const Occupancy& nu, const Occupancy& mu, const FunctionClass& fclass,
                       const TabularPolicy& policy, const Mdp& mdp);

/// (J(π) − J(μ)) / |J(μ)|.
double rpi_score(double j_pi, double j_mu);

/// Linear interpolation between order statistics, q in [0, 1].
double percentile(std::vector<double> values, double q);

/// {0, 4⁻⁴, 4⁻³, …, 4⁴}.
std::vector<double> default_beta_grid();

enum class SweepSolver { Game, Practical };

struct SweepSpec {
  std::vector<double> betas = default_beta_grid();
  std::vector<PessimismMode> modes{PessimismMode::Relative};
  std::size_t seeds = 10;
  std::uint64_t global_seed = 0;
  std::size_t workers = 1;
  SweepSolver solver = SweepSolver::Game;
  std::shared_ptr<const Mdp> env;
  TabularPolicy behavior;
  /// Tuples per cell dataset; 0 runs the game solver at population level.
  std::size_t dataset_size = 0;
  /// Template for the game solver: class, K, η and solver options.
  GameConfig game;
  /// Template for the practical solver.
  PracticalConfig practical;
};

struct SweepCell {
  PessimismMode mode = PessimismMode::Relative;
  std::size_t beta_index = 0;
  std::size_t seed_index = 0;
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;
  double j_last = 0.0;
  double j_best = 0.0;
  double j_mu = 0.0;
};

struct SweepSummary {
  PessimismMode mode = PessimismMode::Relative;
  std::size_t beta_index = 0;
  double beta = 0.0;
  double last_p25 = 0.0, last_p50 = 0.0, last_p75 = 0.0;
  double best_p25 = 0.0, best_p50 = 0.0, best_p75 = 0.0;
  double j_mu = 0.0;
  std::size_t completed = 0;
  bool complete = false;
};

struct SweepResult {
  std::vector<double> betas;
  std::vector<PessimismMode> modes;
  double j_mu = 0.0;
  double vmax = 0.0;
  std::vector<SweepCell> cells;  // ordered by (mode, beta, seed)
  std::vector<SweepSummary> summaries;
  std::vector<std::string> warnings;
  const SweepSummary& summary(PessimismMode mode, std::size_t beta_index) const;
};

/// Runs every (mode, β, seed) cell through a work queue. Cell seeds come from
/// derive_seed(global_seed, β index, seed index).
SweepResult beta_sweep(const SweepSpec& spec);

struct BanditGame {
  std::vector<double> rewards;                // true reward per arm
  std::vector<std::vector<double>> critics;   // finite critic class
  std::vector<std::vector<double>> policies;  // finite policy class (distributions)
  std::vector<double> behavior;               // μ over arms
  std::string id;
};

void validate_game(const BanditGame& game);

struct ComparisonReport {
  std::size_t atac_policy = 0;       // maximin argmax, lowest index
  double maximin_value = 0.0;
  std::size_t cql_critic = 0;        // minimax argmin, lowest index
  std::vector<std::size_t> cql_minimizers;
  double minimax_value = 0.0;
  std::size_t cql_greedy_action = 0;  // argmax of the CQL critic, lowest index
  bool cql_minimizers_constant_on_support = false;
  double atac_return = 0.0;
  double cql_return = 0.0;
  double behavior_return = 0.0;
  bool values_differ = false;
  bool policies_differ = false;
};

/// Exact pure-strategy enumeration of max_π min_f and min_f max_π of
/// E_μ[f(π) − f(a)] + β E_μ[(f − r)²].
ComparisonReport cql_bandit_compare(const BanditGame& game, double beta);

struct StabilitySpec {
  std::shared_ptr<const Mdp> env;
  TabularPolicy behavior;
  std::size_t dataset_size = 1000;
  PracticalConfig practical;
  std::vector<double> w_grid{0.0, 0.25, 0.5, 0.75, 1.0};
  std::size_t seeds = 10;
  std::uint64_t global_seed = 0;
  std::size_t workers = 1;
  std::string instance = "custom";
};

struct StabilityRun {
  std::size_t w_index = 0;
  std::size_t seed_index = 0;
  double w = 0.0;
  double initial_td = 0.0;
  double final_td = 0.0;
  double peak_td = 0.0;
  double final_return = 0.0;
  bool diverged = false;
  bool finite = true;  // every recorded loss finite
};

struct StabilitySummary {
  double w = 0.0;
  double median_initial_td = 0.0;
  double median_final_td = 0.0;
  double median_peak_td = 0.0;
  double median_return = 0.0;
  std::size_t diverged = 0;
  bool all_finite = true;
};

struct StabilityReport {
  std::string instance;
  std::vector<StabilityRun> runs;  // ordered by (w, seed)
  std::vector<StabilitySummary> summaries;
};

/// Runs the practical trainer for every w with shared per-seed datasets and
/// seeds. Divergence is recorded, never thrown.
StabilityReport dqra_stability_study(const StabilitySpec& spec);

/// Runs jobs 0..count−1 on `workers` threads; job i writes only its own slot.
void parallel_for(std::size_t count, std::size_t workers,
                  const std::function<void(std::size_t)>& job);

}  // namespace atac
