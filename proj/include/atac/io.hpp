#pragma once

// File formats: JSON for MDPs, policies, critic classes, bandit games and
// checkpoints; CSV for datasets and every tabular report.

#include <filesystem>
#include <string>
#include <vector>

#include "atac/analysis.hpp"
#include "atac/dataset.hpp"
#include "atac/function_class.hpp"
#include "atac/mdp.hpp"
#include "atac/solvers.hpp"
#include "atac/table.hpp"
#include "atac/two_timescale.hpp"

namespace atac::io {

/// Malformed or unreadable files and unwritable paths.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Shortest text that parses back to the same double.
std::string format_exact(double value);
/// 9 significant digits, for human-facing summaries.
std::string format_summary(double value);

void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

std::string mdp_to_json(const Mdp& mdp);
Mdp mdp_from_json(const std::string& text);
std::string policy_to_json(const TabularPolicy& policy);
TabularPolicy policy_from_json(const std::string& text);
std::string class_to_json(const FunctionClass& fclass);
FunctionClass class_from_json(const std::string& text);
std::string game_to_json(const BanditGame& game);
BanditGame game_from_json(const std::string& text);
std::string checkpoint_to_json(const Checkpoint& checkpoint);
Checkpoint checkpoint_from_json(const std::string& text);
std::string comparison_to_json(const ComparisonReport& report);

void save_mdp(const std::filesystem::path& path, const Mdp& mdp);
Mdp load_mdp(const std::filesystem::path& path);
void save_policy(const std::filesystem::path& path, const TabularPolicy& policy);
TabularPolicy load_policy(const std::filesystem::path& path);
void save_class(const std::filesystem::path& path, const FunctionClass& fclass);
FunctionClass load_class(const std::filesystem::path& path);
void save_game(const std::filesystem::path& path, const BanditGame& game);
BanditGame load_game(const std::filesystem::path& path);

/// `s,a,r,s_next` rows; metadata goes to the sidecar `<path>.meta.json`.
void save_dataset(const std::filesystem::path& path, const Dataset& data);
Dataset load_dataset(const std::filesystem::path& path);
std::filesystem::path dataset_meta_path(const std::filesystem::path& path);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

std::string to_csv(const CsvTable& table);
CsvTable parse_csv(const std::string& text);
CsvTable read_csv(const std::filesystem::path& path);

/// k, J(pi_k), critic_objective, L_term, E_term, eta.
CsvTable trace_table(const RunTrace& trace);
/// epoch, value, td_error, l_critic, l_actor, alpha, entropy.
CsvTable epoch_table(const PracticalTrace& trace);
/// beta, then p25/p50/p75 per mode of the final (or mixture) return.
CsvTable sweep_table(const SweepResult& result, bool best);
/// One row per (mode, beta, seed) cell.
CsvTable sweep_cells_table(const SweepResult& result);
CsvTable stability_runs_table(const StabilityReport& report);
CsvTable stability_summary_table(const StabilityReport& report);

std::string mode_name(PessimismMode mode);
PessimismMode parse_mode(const std::string& name);

}  // namespace atac::io
