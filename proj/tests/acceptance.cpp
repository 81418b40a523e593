// Acceptance checks: one PASS/FAIL line per criterion. Exit status 1 when any
// selected criterion fails.

#include <CLI11.hpp>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "atac/analysis.hpp"
#include "atac/instances.hpp"
#include "atac/rng.hpp"
#include "atac/solvers.hpp"
#include "atac/two_timescale.hpp"

using namespace atac;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

double median(std::vector<double> v) { return percentile(std::move(v), 0.5); }

double rel_err(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-6});
}

GameConfig population_game(const std::shared_ptr<const Mdp>& mdp, const TabularPolicy& mu,
                           double beta, std::size_t k) {
  GameConfig c;
  c.beta = beta;
  c.iterations = k;
  c.source = PopulationSource{mdp, occupancy_measure(*mdp, mu)};
  c.fclass = FunctionClass::box(mdp->num_states(), mdp->num_actions(), mdp->vmax());
  return c;
}

Outcome robust_improvement() {
  std::size_t failing = 0;
  double worst = 1e300;
  for (std::uint64_t i = 0; i < 50; ++i) {
    const std::uint64_t seed = derive_seed(2024, 11, i);
    const std::size_t S = 2 + mix64(seed) % 5, A = 2 + mix64(seed + 1) % 3;
    auto mdp = std::make_shared<const Mdp>(random_mdp(S, A, i % 2 ? 0.9 : 0.5, seed));
    const auto mu = random_policy(S, A, seed ^ 0xabc);
    const double j_mu = policy_return(*mdp, mu);
    bool ok = true;
    for (double beta : {0.0, 0.25, 1.0, 4.0, 16.0, 64.0}) {
      const auto trace = run_atac(population_game(mdp, mu, beta, 500));
      const double gap = (*trace.mixture_return - j_mu) / mdp->vmax();
      worst = std::min(worst, gap);
      ok = ok && gap >= -0.01;
    }
    failing += !ok;
  }
  return {failing == 0, std::to_string(failing) + "/50 MDPs below J(mu) - 0.01 Vmax, worst gap " +
                            fmt("%.4f", worst) + " Vmax"};
}

Outcome decomposition_identity() {
  double worst = 0.0;
  for (std::uint64_t i = 0; i < 200; ++i) {
    const std::uint64_t seed = derive_seed(2025, 2, i);
    const std::size_t S = 1 + mix64(seed) % 6, A = 1 + mix64(seed + 1) % 4;
    const Mdp m = random_mdp(S, A, 0.99 * Rng(seed).uniform(), seed);
    const auto f = random_qtable(S, A, m.vmax(), seed + 2);
    const auto r = performance_difference_decomposition(m, f, random_policy(S, A, seed + 3),
                                                        random_policy(S, A, seed + 4),
                                                        random_policy(S, A, seed + 5));
    worst = std::max(worst, std::abs(r.residual()));
  }
  return {worst <= 1e-9, "max residual " + fmt("%.3g", worst) + " over 200 instances"};
}

Outcome coverage() {
  const auto inst = coverage_instance();
  auto mdp = std::make_shared<const Mdp>(inst.mdp);
  const double j_star = optimal_policy(*mdp).start_value;
  auto shortfall = [&](std::size_t n) {
    SweepSpec spec;
    spec.seeds = 10;
    spec.global_seed = 7;
    spec.env = mdp;
    spec.behavior = inst.behavior;
    spec.dataset_size = n;
    spec.game.iterations = 1000;
    spec.game.fclass = FunctionClass::box(mdp->num_states(), mdp->num_actions(), mdp->vmax());
    const auto res = beta_sweep(spec);
    double best = -1e300;
    for (std::size_t b = 0; b < res.betas.size(); ++b)
      best = std::max(best, res.summary(PessimismMode::Relative, b).last_p50);
    return (j_star - best) / mdp->vmax();
  };
  const double s2 = shortfall(100), s4 = shortfall(10000), s5 = shortfall(100000);
  return {s5 <= 0.05 && s2 > s4, "median shortfall / Vmax at N=1e2 " + fmt("%.4f", s2) +
                                     ", 1e4 " + fmt("%.4f", s4) + ", 1e5 " + fmt("%.4f", s5)};
}

Outcome regret_slope() {
  const auto inst = coverage_instance();
  auto mdp = std::make_shared<const Mdp>(inst.mdp);
  std::vector<double> avg;
  for (std::size_t k : {100, 400, 1600})
    avg.push_back(
        best_comparator_regret(run_atac(population_game(mdp, inst.behavior, 1.0, k)), *mdp)
            .regret.average);
  const double f1 = avg[0] / avg[1], f2 = avg[1] / avg[2];
  return {f1 >= 1.7 && f2 >= 1.7, "average regret " + fmt("%.4f", avg[0]) + " / " +
                                      fmt("%.4f", avg[1]) + " / " + fmt("%.4f", avg[2]) +
                                      ", factors " + fmt("%.2f", f1) + " and " + fmt("%.2f", f2)};
}

Outcome pessimism_contrast() {
  const auto inst = robust_pi_instance();
  auto mdp = std::make_shared<const Mdp>(inst.mdp);
  SweepSpec spec;
  spec.modes = {PessimismMode::Relative, PessimismMode::Absolute};
  spec.seeds = 10;
  spec.global_seed = 5;
  spec.env = mdp;
  spec.behavior = inst.behavior;
  spec.dataset_size = inst.dataset_size;
  spec.game.iterations = inst.iterations;
  spec.game.fclass = inst.fclass;
  const auto res = beta_sweep(spec);
  const double vmax = mdp->vmax(), j_mu = res.j_mu;
  // Longest run of consecutive positive grid points where the relative median holds.
  std::size_t best_lo = 0, best_hi = 0, lo = 0;
  double span = 0.0;
  bool open = false;
  for (std::size_t b = 0; b < res.betas.size(); ++b) {
    const bool ok = res.betas[b] > 0 &&
                    res.summary(PessimismMode::Relative, b).last_p50 >= j_mu - 0.02 * vmax;
    if (ok && !open) lo = b, open = true;
    if (!ok) open = false;
    if (open && res.betas[b] / res.betas[lo] >= span) {
      span = res.betas[b] / res.betas[lo];
      best_lo = lo;
      best_hi = b;
    }
  }
  double abs_low = 1e300;
  for (std::size_t b = best_lo; b <= best_hi; ++b)
    abs_low = std::min(abs_low, res.summary(PessimismMode::Absolute, b).last_p50);
  return {span >= 1000 && abs_low < j_mu - 0.1 * vmax,
          "relative holds on beta " + fmt("%g", res.betas[best_lo]) + ".." +
              fmt("%g", res.betas[best_hi]) + " (ratio " + fmt("%g", span) +
              "), lowest absolute median " + fmt("%.3f", abs_low) + " vs J(mu) " +
              fmt("%.3f", j_mu)};
}

Outcome dqra_stability() {
  const auto inst = divergence_instance();
  StabilitySpec spec;
  spec.env = std::make_shared<const Mdp>(inst.mdp);
  spec.behavior = inst.behavior;
  spec.dataset_size = inst.dataset_size;
  spec.practical = inst.config;
  spec.w_grid = {0.0, 0.5, 1.0};
  spec.seeds = 10;
  spec.global_seed = 6;
  const auto rep = dqra_stability_study(spec);
  std::size_t failing = 0;
  for (std::size_t k = 0; k < spec.seeds; ++k) {
    const StabilityRun* run[3] = {};
    for (const auto& r : rep.runs)
      if (r.seed_index == k) run[r.w_index] = &r;
    const bool ok = run[2]->peak_td >= 10 * run[2]->initial_td &&
                    run[1]->final_td <= run[1]->initial_td && run[0]->finite &&
                    !run[0]->diverged && run[0]->final_return <= run[1]->final_return;
    failing += !ok;
  }
  const auto& s = rep.summaries;
  return {failing == 0, std::to_string(failing) + "/10 seeds failing; medians: w=1 peak/initial " +
                            fmt("%.3g", s[2].median_peak_td / s[2].median_initial_td) +
                            ", w=0.5 final/initial " +
                            fmt("%.3g", s[1].median_final_td / s[1].median_initial_td) +
                            ", returns w=0 " + fmt("%.3f", s[0].median_return) + " w=0.5 " +
                            fmt("%.3f", s[1].median_return)};
}

Outcome bandit_comparison() {
  const auto r = cql_bandit_compare(bandit_appendix_c().game, 0.0);
  return {r.cql_minimizers_constant_on_support && r.atac_return >= r.behavior_return,
          std::string("minimizers constant on support: ") +
              (r.cql_minimizers_constant_on_support ? "yes" : "no") + ", ATAC return " +
              fmt("%.4f", r.atac_return) + " vs behavior " + fmt("%.4f", r.behavior_return)};
}

Outcome concentrability_bounds() {
  double self_err = 0.0, excess = -1e300;
  for (std::uint64_t i = 0; i < 100; ++i) {
    const std::uint64_t seed = derive_seed(2025, 8, i);
    const std::size_t S = 1 + mix64(seed) % 5, A = 1 + mix64(seed + 1) % 3;
    const Mdp m = random_mdp(S, A, 0.9, seed);
    std::vector<QTable> members;
    for (std::uint64_t j = 0; j < 6; ++j) members.push_back(random_qtable(S, A, m.vmax(), seed + 10 + j));
    const auto fc = FunctionClass::finite(members, m.vmax());
    const auto pi = random_policy(S, A, seed + 2);
    const auto mu = random_occupancy(S, A, seed + 3), nu = random_occupancy(S, A, seed + 4);
    self_err = std::max(self_err, std::abs(concentrability(mu, mu, fc, pi, m) - 1.0));
    double ratio = 0.0;
    for (std::size_t x = 0; x < S * A; ++x) ratio = std::max(ratio, nu.table().values()[x] / mu.table().values()[x]);
    excess = std::max(excess, concentrability(nu, mu, fc, pi, m) - ratio);
  }
  return {self_err <= 1e-12 && excess <= 1e-9,
          "max |C(mu;mu) - 1| " + fmt("%.3g", self_err) + ", max C(nu;mu) - ratio " +
              fmt("%.3g", excess)};
}

Outcome gradient_audit() {
  double worst = 0.0;
  Rng rng(2025);
  for (int rep = 0; rep < 50; ++rep) {
    const std::size_t S = 1 + rng.index(4), A = 2 + rng.index(3);
    const double vmax = 10.0;
    FunctionClass fc = FunctionClass::box(S, A, vmax);
    if (rep % 2) {
      const std::size_t d = 1 + rng.index(3);
      std::vector<double> phi(S * A * d);
      for (double& x : phi) x = rng.uniform(-1, 1);
      fc = FunctionClass::linear(S, A, phi, d, 100.0, rep % 4 == 1);
    }
    std::vector<double> r(S * A);
    for (double& x : r) x = rng.uniform();
    std::vector<Transition> batch(1 + rng.index(30));
    for (auto& t : batch) {
      t.s = rng.index(S);
      t.a = rng.index(A);
      t.r = r[t.s * A + t.a];
      t.s_next = rng.index(S);
    }
    const std::size_t P = fc.parameter_dim();
    std::vector<double> f1(P), t1(P), t2(P);
    for (auto* v : {&f1, &t1, &t2})
      for (double& x : *v) x = rng.uniform(0.5, 9.5);
    StateActionTable logits(S, A);
    for (double& x : logits.values()) x = rng.uniform(-2, 2);
    const auto pi = policy_from_logits(logits);
    PracticalConfig cfg;
    cfg.beta = rng.uniform(0, 5);
    cfg.w = rng.uniform();
    cfg.mode = rep % 3 == 0 ? PessimismMode::Absolute : PessimismMode::Relative;
    const std::size_t s0 = rng.index(S);
    const double h = 1e-5;

    auto critic = [&](const std::vector<double>& p) {
      return critic_loss_gradient(fc, batch, p, t1, t2, pi, cfg, 0.9, s0);
    };
    const auto g = critic(f1);
    for (std::size_t k = 0; k < P; ++k) {
      auto up = f1, dn = f1;
      up[k] += h;
      dn[k] -= h;
      worst = std::max(worst, rel_err(g.gradient[k], (critic(up).loss - critic(dn).loss) / (2 * h)));
    }

    const auto f1_table = fc.evaluate(f1);
    const double alpha = rng.uniform(0, 3), hmin = rng.uniform();
    const auto ga = actor_loss_gradient(batch, f1_table, logits, alpha, hmin);
    for (std::size_t i = 0; i < S * A; ++i) {
      auto up = logits, dn = logits;
      up.values()[i] += h;
      dn.values()[i] -= h;
      const double fd = (actor_loss_gradient(batch, f1_table, up, alpha, hmin).loss -
                         actor_loss_gradient(batch, f1_table, dn, alpha, hmin).loss) /
                        (2 * h);
      worst = std::max(worst, rel_err(ga.logit_gradient.values()[i], fd));
    }
    const double fda = (actor_loss_gradient(batch, f1_table, logits, alpha + h, hmin).loss -
                        actor_loss_gradient(batch, f1_table, logits, alpha - h, hmin).loss) /
                       (2 * h);
    worst = std::max(worst, rel_err(ga.alpha_gradient, fda));
  }
  return {worst <= 1e-4, "max relative error " + fmt("%.3g", worst) + " over 50 instances"};
}

Outcome bellman_error_consistency() {
  std::vector<std::pair<Mdp, TabularPolicy>> cases;
  cases.emplace_back(Mdp(2, 2, {0.7, 0.3, 0.2, 0.8, 0.4, 0.6, 0.9, 0.1},
                         StateActionTable(2, 2, std::vector<double>{0.1, 1.0, 0.5, 0.0}), 0.8, 0),
                     TabularPolicy(StateActionTable(2, 2, std::vector<double>{0.2, 0.8, 0.5, 0.5})));
  cases.emplace_back(random_mdp(4, 3, 0.9, 31), random_policy(4, 3, 32));
  cases.emplace_back(random_mdp(6, 2, 0.5, 41), random_policy(6, 2, 42));
  bool pass = true;
  std::string detail;
  for (std::size_t c = 0; c < cases.size(); ++c) {
    const Mdp& m = cases[c].first;
    const TabularPolicy& pi = cases[c].second;
    const auto mu = TabularPolicy::uniform(m.num_states(), m.num_actions());
    const auto q = exact_q_values(m, pi);
    const auto box = FunctionClass::box(m.num_states(), m.num_actions(), m.vmax());
    const double vmax2 = m.vmax() * m.vmax();
    double med[2];
    const std::size_t sizes[2] = {100, 10000};
    for (int i = 0; i < 2; ++i) {
      std::vector<double> e;
      for (std::uint64_t k = 0; k < 20; ++k)
        e.push_back(empirical_E(sample_dataset(m, mu, sizes[i], derive_seed(10 + c, sizes[i], k)), q,
                                pi, box)
                        .value);
      med[i] = median(e);
      pass = pass && med[i] < 10 * vmax2 * std::log(double(sizes[i])) / double(sizes[i]);
    }
    pass = pass && med[1] < med[0];
    detail += (c ? "; " : "") + std::string("mdp ") + std::to_string(c) + ": " + fmt("%.3g", med[0]) +
              " -> " + fmt("%.3g", med[1]);
  }
  return {pass, "median E at N=1e2 -> 1e4, " + detail};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria"};
  std::vector<int> only;
  app.add_option("criteria", only, "criterion numbers to run (default: all)")->check(CLI::Range(1, 10));
  CLI11_PARSE(app, argc, argv);

  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"robust policy improvement on 50 random MDPs", robust_improvement},
      {"performance difference identity", decomposition_identity},
      {"near-optimality under full coverage", coverage},
      {"no-regret slope", regret_slope},
      {"relative vs absolute pessimism across beta", pessimism_contrast},
      {"DQRA stability on the divergence instance", dqra_stability},
      {"maximin vs minimax on the bandit game", bandit_comparison},
      {"concentrability bounds", concentrability_bounds},
      {"gradient audit", gradient_audit},
      {"estimated Bellman error consistency", bellman_error_consistency},
  };
  bool all = true;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    if (!only.empty() && std::find(only.begin(), only.end(), int(i + 1)) == only.end()) continue;
    const auto t0 = std::chrono::steady_clock::now();
    const Outcome o = criteria[i].second();
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("%s %2zu %s: %s (%.1fs)\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first,
                o.detail.c_str(), secs);
    std::fflush(stdout);
    all = all && o.pass;
  }
  return all ? 0 : 1;
}
