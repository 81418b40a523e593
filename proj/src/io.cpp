#include "atac/io.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "atac/errors.hpp"

namespace atac::io {
namespace {

using nlohmann::json;

json parse_json(const std::string& text, const char* what) {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw IoError(std::string(what) + ": " + e.what());
  }
}

template <class T>
T field(const json& j, const char* key, const char* what) {
  if (!j.contains(key)) throw IoError(std::string(what) + ": missing field '" + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw IoError(std::string(what) + ": field '" + key + "': " + e.what());
  }
}

json table_to_json(const StateActionTable& t) {
  json rows = json::array();
  for (std::size_t s = 0; s < t.num_states(); ++s)
    rows.push_back(std::vector<double>(t.row(s).begin(), t.row(s).end()));
  return rows;
}

StateActionTable table_from_json(const json& rows, std::size_t S, std::size_t A, const char* what) {
  if (!rows.is_array() || rows.size() != S) throw IoError(std::string(what) + ": expected S rows");
  StateActionTable t(S, A);
  for (std::size_t s = 0; s < S; ++s) {
    const auto row = rows[s].get<std::vector<double>>();
    if (row.size() != A) throw IoError(std::string(what) + ": expected A entries per row");
    for (std::size_t a = 0; a < A; ++a) t(s, a) = row[a];
  }
  return t;
}

double parse_double(const std::string& s, const char* what) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size())
    throw IoError(std::string(what) + ": not a number: '" + s + "'");
  return v;
}

std::size_t parse_index(const std::string& s, const char* what) {
  std::size_t v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size())
    throw IoError(std::string(what) + ": not an index: '" + s + "'");
  return v;
}

std::string flag(bool b) { return b ? "1" : "0"; }

}  // namespace

std::string format_exact(double value) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, res.ptr);
}

std::string format_summary(double value) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9g", value);
  return buf;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed for " + path.string());
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string mdp_to_json(const Mdp& mdp) {
  const std::size_t S = mdp.num_states(), A = mdp.num_actions();
  json j;
  j["id"] = mdp.id();
  j["num_states"] = S;
  j["num_actions"] = A;
  j["gamma"] = mdp.gamma();
  j["start_state"] = mdp.start_state();
  if (mdp.reward_max_explicit()) j["reward_max"] = mdp.reward_max();
  j["rewards"] = table_to_json(mdp.reward());
  json p = json::array();
  for (std::size_t s = 0; s < S; ++s) {
    json row = json::array();
    for (std::size_t a = 0; a < A; ++a) {
      const auto next = mdp.next_state_distribution(s, a);
      row.push_back(std::vector<double>(next.begin(), next.end()));
    }
    p.push_back(std::move(row));
  }
  j["transitions"] = std::move(p);
  return j.dump(1) + "\n";
}

Mdp mdp_from_json(const std::string& text) {
  const json j = parse_json(text, "mdp");
  const auto S = field<std::size_t>(j, "num_states", "mdp");
  const auto A = field<std::size_t>(j, "num_actions", "mdp");
  StateActionTable r = table_from_json(j.at("rewards"), S, A, "mdp rewards");
  const json& p = j.at("transitions");
  if (!p.is_array() || p.size() != S) throw IoError("mdp transitions: expected S blocks");
  std::vector<double> t;
  t.reserve(S * A * S);
  for (std::size_t s = 0; s < S; ++s) {
    if (!p[s].is_array() || p[s].size() != A) throw IoError("mdp transitions: expected A rows");
    for (std::size_t a = 0; a < A; ++a) {
      const auto row = p[s][a].get<std::vector<double>>();
      if (row.size() != S) throw IoError("mdp transitions: expected S entries per row");
      t.insert(t.end(), row.begin(), row.end());
    }
  }
  std::optional<double> rmax;
  if (j.contains("reward_max")) rmax = j.at("reward_max").get<double>();
  return Mdp(S, A, std::move(t), std::move(r), field<double>(j, "gamma", "mdp"),
             field<std::size_t>(j, "start_state", "mdp"), rmax,
             j.contains("id") ? j.at("id").get<std::string>() : std::string());
}

std::string policy_to_json(const TabularPolicy& policy) {
  json j;
  j["num_states"] = policy.num_states();
  j["num_actions"] = policy.num_actions();
  j["probabilities"] = table_to_json(policy.table());
  return j.dump(1) + "\n";
}

TabularPolicy policy_from_json(const std::string& text) {
  const json j = parse_json(text, "policy");
  const auto S = field<std::size_t>(j, "num_states", "policy");
  const auto A = field<std::size_t>(j, "num_actions", "policy");
  return TabularPolicy(table_from_json(j.at("probabilities"), S, A, "policy"));
}

std::string class_to_json(const FunctionClass& fclass) {
  json j;
  j["num_states"] = fclass.num_states();
  j["num_actions"] = fclass.num_actions();
  switch (fclass.kind()) {
    case ClassKind::FiniteEnumeration: {
      j["kind"] = "finite";
      j["vmax"] = fclass.vmax();
      json members = json::array();
      for (const auto& m : fclass.members()) members.push_back(table_to_json(m));
      j["members"] = std::move(members);
      break;
    }
    case ClassKind::TabularBox:
      j["kind"] = "box";
      j["vmax"] = fclass.vmax();
      break;
    case ClassKind::LinearBounded: {
      j["kind"] = "linear";
      j["dim"] = fclass.feature_dim();
      j["bound"] = fclass.weight_bound();
      j["bias"] = fclass.has_bias();
      const auto f = fclass.features();
      json rows = json::array();
      for (std::size_t i = 0; i < fclass.num_states() * fclass.num_actions(); ++i)
        rows.push_back(std::vector<double>(f.begin() + static_cast<std::ptrdiff_t>(i * fclass.feature_dim()),
                                           f.begin() + static_cast<std::ptrdiff_t>((i + 1) * fclass.feature_dim())));
      j["features"] = std::move(rows);
      break;
    }
  }
  return j.dump(1) + "\n";
}

FunctionClass class_from_json(const std::string& text) {
  const json j = parse_json(text, "function class");
  const auto kind = field<std::string>(j, "kind", "function class");
  const auto S = field<std::size_t>(j, "num_states", "function class");
  const auto A = field<std::size_t>(j, "num_actions", "function class");
  if (kind == "finite") {
    std::vector<QTable> members;
    for (const auto& m : j.at("members")) members.emplace_back(table_from_json(m, S, A, "member"));
    return FunctionClass::finite(std::move(members), field<double>(j, "vmax", "function class"));
  }
  if (kind == "box") return FunctionClass::box(S, A, field<double>(j, "vmax", "function class"));
  if (kind == "linear") {
    const auto d = field<std::size_t>(j, "dim", "function class");
    std::vector<double> features;
    const json& rows = j.at("features");
    if (!rows.is_array() || rows.size() != S * A) throw IoError("features: expected S*A rows");
    for (const auto& row : rows) {
      const auto v = row.get<std::vector<double>>();
      if (v.size() != d) throw IoError("features: expected dim entries per row");
      features.insert(features.end(), v.begin(), v.end());
    }
    return FunctionClass::linear(S, A, std::move(features), d,
                                 field<double>(j, "bound", "function class"),
                                 field<bool>(j, "bias", "function class"));
  }
  throw IoError("function class: unknown kind '" + kind + "'");
}

std::string game_to_json(const BanditGame& game) {
  json j;
  j["id"] = game.id;
  j["rewards"] = game.rewards;
  j["behavior"] = game.behavior;
  j["critics"] = game.critics;
  j["policies"] = game.policies;
  return j.dump(1) + "\n";
}

BanditGame game_from_json(const std::string& text) {
  const json j = parse_json(text, "game");
  BanditGame g;
  g.id = j.contains("id") ? j.at("id").get<std::string>() : std::string();
  g.rewards = field<std::vector<double>>(j, "rewards", "game");
  g.behavior = field<std::vector<double>>(j, "behavior", "game");
  g.critics = field<std::vector<std::vector<double>>>(j, "critics", "game");
  g.policies = field<std::vector<std::vector<double>>>(j, "policies", "game");
  validate_game(g);
  return g;
}

std::string checkpoint_to_json(const Checkpoint& c) {
  json j;
  j["epoch"] = c.epoch;
  j["value"] = c.value;
  j["num_states"] = c.policy.num_states();
  j["num_actions"] = c.policy.num_actions();
  j["policy"] = table_to_json(c.policy.table());
  j["f1"] = c.f1;
  return j.dump(1) + "\n";
}

Checkpoint checkpoint_from_json(const std::string& text) {
  const json j = parse_json(text, "checkpoint");
  Checkpoint c;
  c.epoch = field<std::size_t>(j, "epoch", "checkpoint");
  c.value = field<double>(j, "value", "checkpoint");
  const auto S = field<std::size_t>(j, "num_states", "checkpoint");
  const auto A = field<std::size_t>(j, "num_actions", "checkpoint");
  c.policy = TabularPolicy(table_from_json(j.at("policy"), S, A, "checkpoint policy"));
  c.f1 = field<std::vector<double>>(j, "f1", "checkpoint");
  return c;
}

std::string comparison_to_json(const ComparisonReport& r) {
  json j;
  j["atac_policy"] = r.atac_policy;
  j["maximin_value"] = r.maximin_value;
  j["cql_critic"] = r.cql_critic;
  j["cql_minimizers"] = r.cql_minimizers;
  j["minimax_value"] = r.minimax_value;
  j["cql_greedy_action"] = r.cql_greedy_action;
  j["cql_minimizers_constant_on_support"] = r.cql_minimizers_constant_on_support;
  j["atac_return"] = r.atac_return;
  j["cql_return"] = r.cql_return;
  j["behavior_return"] = r.behavior_return;
  j["values_differ"] = r.values_differ;
  j["policies_differ"] = r.policies_differ;
  return j.dump(1) + "\n";
}

void save_mdp(const std::filesystem::path& path, const Mdp& mdp) { write_text(path, mdp_to_json(mdp)); }
Mdp load_mdp(const std::filesystem::path& path) { return mdp_from_json(read_text(path)); }
void save_policy(const std::filesystem::path& path, const TabularPolicy& policy) {
  write_text(path, policy_to_json(policy));
}
TabularPolicy load_policy(const std::filesystem::path& path) {
  return policy_from_json(read_text(path));
}
void save_class(const std::filesystem::path& path, const FunctionClass& fclass) {
  write_text(path, class_to_json(fclass));
}
FunctionClass load_class(const std::filesystem::path& path) {
  return class_from_json(read_text(path));
}
void save_game(const std::filesystem::path& path, const BanditGame& game) {
  write_text(path, game_to_json(game));
}
BanditGame load_game(const std::filesystem::path& path) { return game_from_json(read_text(path)); }

std::filesystem::path dataset_meta_path(const std::filesystem::path& path) {
  return std::filesystem::path(path.string() + ".meta.json");
}

void save_dataset(const std::filesystem::path& path, const Dataset& data) {
  std::string out = "s,a,r,s_next\n";
  for (const auto& t : data.tuples())
    out += std::to_string(t.s) + "," + std::to_string(t.a) + "," + format_exact(t.r) + "," +
           std::to_string(t.s_next) + "\n";
  write_text(path, out);
  const auto& m = data.meta();
  json j;
  j["mdp_id"] = m.mdp_id;
  j["behavior_id"] = m.behavior_id;
  j["seed"] = m.seed;
  j["num_states"] = m.num_states;
  j["num_actions"] = m.num_actions;
  j["gamma"] = m.gamma;
  j["start_state"] = m.start_state;
  j["size"] = data.size();
  write_text(dataset_meta_path(path), j.dump(1) + "\n");
}

Dataset load_dataset(const std::filesystem::path& path) {
  const json j = parse_json(read_text(dataset_meta_path(path)), "dataset metadata");
  DatasetMetadata m;
  m.mdp_id = field<std::string>(j, "mdp_id", "dataset metadata");
  m.behavior_id = field<std::string>(j, "behavior_id", "dataset metadata");
  m.seed = field<std::uint64_t>(j, "seed", "dataset metadata");
  m.num_states = field<std::size_t>(j, "num_states", "dataset metadata");
  m.num_actions = field<std::size_t>(j, "num_actions", "dataset metadata");
  m.gamma = field<double>(j, "gamma", "dataset metadata");
  m.start_state = field<std::size_t>(j, "start_state", "dataset metadata");
  const CsvTable csv = read_csv(path);
  if (csv.header != std::vector<std::string>{"s", "a", "r", "s_next"})
    throw IoError("dataset: expected header s,a,r,s_next");
  std::vector<Transition> tuples;
  tuples.reserve(csv.rows.size());
  for (const auto& row : csv.rows) {
    if (row.size() != 4) throw IoError("dataset: expected 4 fields per row");
    tuples.push_back({parse_index(row[0], "dataset s"), parse_index(row[1], "dataset a"),
                      parse_double(row[2], "dataset r"), parse_index(row[3], "dataset s_next")});
  }
  return Dataset(std::move(m), std::move(tuples));
}

std::string to_csv(const CsvTable& table) {
  auto cell = [](const std::string& v) {
    if (v.find_first_of(",\"\n") == std::string::npos) return v;
    std::string q = "\"";
    for (char c : v) {
      if (c == '"') q += '"';
      q += c;
    }
    return q + "\"";
  };
  auto line = [&](const std::vector<std::string>& fields) {
    std::string out;
    for (std::size_t i = 0; i < fields.size(); ++i) out += (i ? "," : "") + cell(fields[i]);
    return out + "\n";
  };
  std::string out = line(table.header);
  for (const auto& row : table.rows) out += line(row);
  return out;
}

CsvTable parse_csv(const std::string& text) {
  std::vector<std::vector<std::string>> lines;
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false, any = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (quoted) {
      if (c == '"' && i + 1 < text.size() && text[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
      continue;
    }
    if (c == '"') {
      quoted = true;
      any = true;
    } else if (c == ',') {
      fields.push_back(std::move(cur));
      cur.clear();
      any = true;
    } else if (c == '\n') {
      fields.push_back(std::move(cur));
      cur.clear();
      lines.push_back(std::move(fields));
      fields.clear();
      any = false;
    } else if (c != '\r') {
      cur += c;
      any = true;
    }
  }
  if (quoted) throw IoError("csv: unterminated quote");
  if (any) {
    fields.push_back(std::move(cur));
    lines.push_back(std::move(fields));
  }
  if (lines.empty()) throw IoError("csv: missing header");
  CsvTable t;
  t.header = std::move(lines.front());
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (lines[i].size() != t.header.size())
      throw IoError("csv: row " + std::to_string(i) + " has the wrong field count");
    t.rows.push_back(std::move(lines[i]));
  }
  return t;
}

CsvTable read_csv(const std::filesystem::path& path) { return parse_csv(read_text(path)); }

CsvTable trace_table(const RunTrace& trace) {
  CsvTable t{{"k", "J(pi_k)", "critic_objective", "L_term", "E_term", "eta"}, {}};
  for (std::size_t k = 0; k < trace.iterates.size(); ++k) {
    const auto& it = trace.iterates[k];
    t.rows.push_back({std::to_string(k + 1), it.value ? format_exact(*it.value) : "",
                      format_exact(it.objective.total), format_exact(it.objective.l_term),
                      format_exact(it.objective.e_term), format_exact(trace.eta)});
  }
  return t;
}

CsvTable epoch_table(const PracticalTrace& trace) {
  CsvTable t{{"epoch", "value", "td_error", "l_critic", "l_actor", "alpha", "entropy"}, {}};
  for (const auto& e : trace.epochs)
    t.rows.push_back({std::to_string(e.epoch), format_exact(e.value), format_exact(e.td_error),
                      format_exact(e.l_critic), format_exact(e.l_actor), format_exact(e.alpha),
                      format_exact(e.entropy)});
  return t;
}

CsvTable sweep_table(const SweepResult& result, bool best) {
  CsvTable t;
  t.header.push_back("beta");
  for (PessimismMode m : result.modes)
    for (const char* q : {"p25", "p50", "p75"}) t.header.push_back(mode_name(m) + "_" + q);
  for (std::size_t b = 0; b < result.betas.size(); ++b) {
    std::vector<std::string> row{format_exact(result.betas[b])};
    for (PessimismMode m : result.modes) {
      const SweepSummary& s = result.summary(m, b);
      const double v[3] = {best ? s.best_p25 : s.last_p25, best ? s.best_p50 : s.last_p50,
                           best ? s.best_p75 : s.last_p75};
      for (double x : v) row.push_back(s.completed ? format_exact(x) : "");
    }
    t.rows.push_back(std::move(row));
  }
  return t;
}

CsvTable sweep_cells_table(const SweepResult& result) {
  CsvTable t{{"mode", "beta_index", "beta", "seed_index", "seed", "ok", "j_last", "j_best", "j_mu",
              "error"},
             {}};
  for (const auto& c : result.cells)
    t.rows.push_back({mode_name(c.mode), std::to_string(c.beta_index),
                      format_exact(result.betas[c.beta_index]), std::to_string(c.seed_index),
                      std::to_string(c.seed), flag(c.ok), format_exact(c.j_last),
                      format_exact(c.j_best), format_exact(c.j_mu), c.error});
  return t;
}

CsvTable stability_runs_table(const StabilityReport& report) {
  CsvTable t{{"w", "seed_index", "initial_td", "final_td", "peak_td", "final_return", "diverged",
              "finite"},
             {}};
  for (const auto& r : report.runs)
    t.rows.push_back({format_exact(r.w), std::to_string(r.seed_index), format_exact(r.initial_td),
                      format_exact(r.final_td), format_exact(r.peak_td),
                      format_exact(r.final_return), flag(r.diverged), flag(r.finite)});
  return t;
}

CsvTable stability_summary_table(const StabilityReport& report) {
  CsvTable t{{"w", "median_initial_td", "median_final_td", "median_peak_td", "median_return",
              "diverged", "all_finite"},
             {}};
  for (const auto& s : report.summaries)
    t.rows.push_back({format_exact(s.w), format_exact(s.median_initial_td),
                      format_exact(s.median_final_td), format_exact(s.median_peak_td),
                      format_exact(s.median_return), std::to_string(s.diverged),
                      flag(s.all_finite)});
  return t;
}

std::string mode_name(PessimismMode mode) {
  return mode == PessimismMode::Relative ? "relative" : "absolute";
}

PessimismMode parse_mode(const std::string& name) {
  if (name == "relative") return PessimismMode::Relative;
  if (name == "absolute") return PessimismMode::Absolute;
  throw ArgumentError("unknown pessimism mode '" + name + "' (relative | absolute)");
}

}  // namespace atac::io
