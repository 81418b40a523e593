#include <doctest.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>

#include "atac/io.hpp"
#include "atac/analysis.hpp"
#include "atac/solvers.hpp"

namespace fs = std::filesystem;
using namespace atac;

namespace {

fs::path scratch() {
  static const fs::path root = [] {
    fs::path p = fs::temp_directory_path() / ("atac_cli_" + std::to_string(::getpid()));
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
  }();
  return root;
}

// Exit status of the binary; output goes to a log next to the run.
int cli(const std::string& args, const std::string& env = "") {
  const std::string cmd = env + " \"" ATAC_CLI_PATH "\" " + args + " > \"" +
                          (scratch() / "last.log").string() + "\" 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::map<std::string, std::string> summary(const fs::path& dir) {
  std::map<std::string, std::string> out;
  std::stringstream in(slurp(dir / "summary"));
  for (std::string line; std::getline(in, line);) {
    const auto eq = line.find(" = ");
    if (eq != std::string::npos) out[line.substr(0, eq)] = line.substr(eq + 3);
  }
  return out;
}

std::string dir_arg(const std::string& name) { return "--out \"" + (scratch() / name).string() + "\""; }

}  // namespace

TEST_CASE("generate is deterministic and its files reload") {
  const std::string base = "generate --instance chain --states 5 --seed 7 --dataset-size 300 ";
  REQUIRE(cli(base + dir_arg("g1")) == 0);
  REQUIRE(cli(base + dir_arg("g2")) == 0);
  for (const char* f : {"mdp.json", "behavior.json", "dataset.csv", "dataset.csv.meta.json", "summary",
                        "config.snapshot"})
    CHECK(slurp(scratch() / "g1" / f) == slurp(scratch() / "g2" / f));

  const Mdp m = io::load_mdp(scratch() / "g1" / "mdp.json");
  CHECK(m.num_states() == 5);
  const TabularPolicy mu = io::load_policy(scratch() / "g1" / "behavior.json");
  CHECK(policy_return(m, mu) ==
        doctest::Approx(std::stod(summary(scratch() / "g1").at("J_behavior"))).epsilon(1e-8));
  const Dataset d = io::load_dataset(scratch() / "g1" / "dataset.csv");
  CHECK(d.size() == 300);
  CHECK_NOTHROW(d.validate_against(m));
}

TEST_CASE("generate writes the bandit game") {
  REQUIRE(cli("generate --instance bandit-appendix-c " + dir_arg("gb")) == 0);
  const BanditGame g = io::load_game(scratch() / "gb" / "game.json");
  CHECK(g.critics.size() > 0);
  CHECK(g.policies.size() > 0);
  CHECK(fs::exists(scratch() / "gb" / "mdp.json"));
}

TEST_CASE("run on a saved dataset and at population level") {
  REQUIRE(cli("generate --instance chain --states 5 --seed 3 --dataset-size 2000 " + dir_arg("gd")) == 0);
  const std::string data = "\"" + (scratch() / "gd" / "dataset.csv").string() + "\"";
  REQUIRE(cli("run --solver bc --instance chain --states 5 --dataset " + data + " " + dir_arg("rb")) == 0);
  const auto bc = summary(scratch() / "rb");
  CHECK(bc.count("J_bc") == 1);
  const Mdp m = io::load_mdp(scratch() / "gd" / "mdp.json");
  const TabularPolicy pi = io::load_policy(scratch() / "rb" / "policy.json");
  CHECK(policy_return(m, pi) == doctest::Approx(std::stod(bc.at("J_bc"))).epsilon(1e-8));

  const std::string pop = "run --solver atac --beta 0 --population --instance chain --states 5 "
                          "--iterations 50 ";
  REQUIRE(cli(pop + dir_arg("ra1")) == 0);
  REQUIRE(cli(pop + dir_arg("ra2")) == 0);
  CHECK(slurp(scratch() / "ra1" / "summary") == slurp(scratch() / "ra2" / "summary"));
  CHECK(slurp(scratch() / "ra1" / "trace.csv") == slurp(scratch() / "ra2" / "trace.csv"));
  CHECK(std::stod(summary(scratch() / "ra1").at("rpi_score")) >= -0.01);
  CHECK(io::read_csv(scratch() / "ra1" / "trace.csv").rows.size() == 50);
  CHECK_NOTHROW(io::load_policy(scratch() / "ra1" / "final_policy.json"));
}

TEST_CASE("usage errors exit with 2") {
  REQUIRE(cli("generate --instance chain --states 4 --dataset-size 50 " + dir_arg("ge")) == 0);
  const std::string data = "\"" + (scratch() / "ge" / "dataset.csv").string() + "\"";
  CHECK(cli("run --population --dataset " + data + " " + dir_arg("bad1")) == 2);
  CHECK(cli("run --solver bc --population " + dir_arg("bad2")) == 2);
  CHECK(cli("compare-cql --game /nonexistent/game.json " + dir_arg("bad3")) == 2);
  CHECK(cli("run --mdp /nonexistent/mdp.json " + dir_arg("bad4")) == 2);
  CHECK(cli("run --no-such-flag") == 2);
  CHECK(cli("") == 2);
  CHECK(cli("run --instance nowhere") == 2);
}

TEST_CASE("sweep writes one row per beta and three percentiles per mode") {
  REQUIRE(cli("sweep --instance chain --states 4 --betas default --modes relative,absolute --seeds 10 "
              "--iterations 5 --dataset-size 100 " +
              dir_arg("sw")) == 0);
  const auto table = io::read_csv(scratch() / "sw" / "sweep.csv");
  CHECK(table.rows.size() == default_beta_grid().size());
  CHECK(table.header.size() == 1 + 2 * 3);
  CHECK(table.header[1] == "relative_p25");
  const auto cells = io::read_csv(scratch() / "sw" / "cells.csv");
  CHECK(cells.rows.size() == 2 * 10 * default_beta_grid().size());
  CHECK(summary(scratch() / "sw").at("cells_completed") == std::to_string(cells.rows.size()));
  CHECK(cli("sweep --instance chain --states 4 --betas 1 --seeds 1 " + dir_arg("sw1")) == 2);
}

TEST_CASE("compare-cql on the packaged game and on a saved copy") {
  REQUIRE(cli("compare-cql --game bandit-appendix-c --beta 0 " + dir_arg("cq")) == 0);
  const auto s = summary(scratch() / "cq");
  CHECK(s.at("cql_minimizers_constant_on_support") == "yes");
  CHECK(std::stod(s.at("atac_return")) >= std::stod(s.at("behavior_return")));
  CHECK(!slurp(scratch() / "cq" / "report.json").empty());

  REQUIRE(cli("generate --instance bandit-appendix-c " + dir_arg("cg")) == 0);
  const std::string game = "\"" + (scratch() / "cg" / "game.json").string() + "\"";
  REQUIRE(cli("compare-cql --game " + game + " --beta 0 " + dir_arg("cq2")) == 0);
  const auto s2 = summary(scratch() / "cq2");
  for (const char* k : {"atac_policy", "cql_critic", "atac_return", "cql_return", "policies_differ"})
    CHECK(s2.at(k) == s.at(k));
}

TEST_CASE("stability writes per-run and per-w tables") {
  REQUIRE(cli("stability --instance divergence --w-grid 0,1 --seeds 2 --epochs 2 --steps-per-epoch 10 " +
              dir_arg("st")) == 0);
  const auto runs = io::read_csv(scratch() / "st" / "stability.csv");
  CHECK(runs.rows.size() == 4);
  const auto per_w = io::read_csv(scratch() / "st" / "stability_summary.csv");
  CHECK(per_w.rows.size() == 2);
  CHECK(summary(scratch() / "st").count("diverged[w=1]") == 1);
}

TEST_CASE("default output root comes from the environment") {
  const fs::path root = scratch() / "root";
  REQUIRE(cli("generate --instance chain --states 3 --seed 2", "ATAC_OUTPUT_ROOT=\"" + root.string() + "\"") ==
          0);
  CHECK(fs::exists(root / "generate-chain-seed2" / "mdp.json"));
}
