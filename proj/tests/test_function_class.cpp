#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>

#include "atac/errors.hpp"
#include "atac/function_class.hpp"
#include "atac/instances.hpp"
#include "support.hpp"

using namespace atac;

namespace {

// Population objective written out term by term.
double oracle_objective(const Mdp& m, const Occupancy& mu, const StateActionTable& f,
                        const TabularPolicy& pi, double beta, PessimismMode mode) {
  const std::size_t S = m.num_states(), A = m.num_actions();
  std::vector<double> v(S, 0.0);
  for (std::size_t s = 0; s < S; ++s)
    for (std::size_t a = 0; a < A; ++a) v[s] += pi(s, a) * f(s, a);
  double l = 0.0, e = 0.0;
  for (std::size_t s = 0; s < S; ++s)
    for (std::size_t a = 0; a < A; ++a) {
      double next = 0.0;
      for (std::size_t sn = 0; sn < S; ++sn) next += m.transition(s, a, sn) * v[sn];
      const double resid = f(s, a) - m.reward(s, a) - m.gamma() * next;
      l += mu(s, a) * (v[s] - f(s, a));
      e += mu(s, a) * resid * resid;
    }
  if (mode == PessimismMode::Absolute) l = v[m.start_state()];
  return l + beta * e;
}

struct Setup {
  std::shared_ptr<const Mdp> mdp;
  TabularPolicy mu;
  Occupancy d_mu;
  TabularPolicy pi;
};

Setup random_setup(testing::Gen& gen, std::size_t S, std::size_t A, double gamma) {
  auto mdp = std::make_shared<const Mdp>(gen.mdp(S, A, gamma));
  auto mu = gen.policy(S, A, 0.05);
  auto d = occupancy_measure(*mdp, mu);
  return {mdp, mu, d, gen.policy(S, A)};
}

// Exact coordinate minimization over the box: each coordinate's objective is a
// parabola, recovered from three evaluations.
std::vector<double> coordinate_descent_box(const Setup& st, double beta, PessimismMode mode,
                                           double vmax, std::size_t sweeps) {
  const std::size_t S = st.mdp->num_states(), A = st.mdp->num_actions();
  StateActionTable f(S, A, vmax / 2.0);
  auto obj = [&](const StateActionTable& g) {
    return oracle_objective(*st.mdp, st.d_mu, g, st.pi, beta, mode);
  };
  for (std::size_t sweep = 0; sweep < sweeps; ++sweep)
    for (std::size_t i = 0; i < S * A; ++i) {
      double& x = f.values()[i];
      const double x0 = x;
      const double f0 = obj(f);
      x = x0 + 1.0;
      const double fp = obj(f);
      x = x0 - 1.0;
      const double fm = obj(f);
      const double curv = (fp + fm - 2.0 * f0) / 2.0;
      const double slope = (fp - fm) / 2.0;
      double target;
      if (curv > 1e-15)
        target = x0 - slope / (2.0 * curv);
      else
        target = slope > 0 ? 0.0 : vmax;
      x = std::clamp(target, 0.0, vmax);
    }
  return {f.values().begin(), f.values().end()};
}

}  // namespace

TEST_CASE("class construction validates members and parameters") {
  CHECK_THROWS_AS(FunctionClass::finite({}, 1.0), ArgumentError);
  CHECK_THROWS_AS(FunctionClass::finite({QTable(1, 2, 3.0)}, 1.0), ArgumentError);
  CHECK_THROWS_AS(FunctionClass::finite({QTable(1, 2, 0.0), QTable(2, 2, 0.0)}, 1.0),
                  ArgumentError);
  CHECK_THROWS_AS(FunctionClass::linear(1, 2, {1.0, 2.0}, 1, 0.0, false), ArgumentError);
  CHECK_THROWS_AS(FunctionClass::linear(1, 2, {1.0}, 1, 1.0, false), ArgumentError);
  CHECK_THROWS_AS(FunctionClass::linear(1, 2, {1.0, NAN}, 1, 1.0, false), ArgumentError);
  const auto fc = FunctionClass::finite({QTable(1, 2, 0.0)}, 1.0);
  CHECK_THROWS_AS(fc.parameter_dim(), NotParametric);
}

TEST_CASE("projection examples") {
  const auto lin = FunctionClass::linear(1, 2, {1, 0, 0, 1}, 2, 2.0, false);
  const std::vector<double> inside{0.6, 0.8};
  CHECK(project_member(lin, inside) == inside);
  const std::vector<double> outside{2.4, 3.2};
  const auto p = project_member(lin, outside);
  CHECK(std::hypot(p[0], p[1]) == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(p[0] / p[1] == doctest::Approx(0.75).epsilon(1e-15));

  const std::vector<double> huge{3e200, 4e200};
  const auto ph = project_member(lin, huge);
  CHECK(ph[0] == doctest::Approx(1.2).epsilon(1e-15));
  CHECK(ph[1] == doctest::Approx(1.6).epsilon(1e-15));

  const auto biased = FunctionClass::linear(1, 2, {1, 0, 0, 1}, 2, 1.0, true);
  const std::vector<double> raw{3.0, 4.0, -50.0};
  const auto pb = project_member(biased, raw);
  CHECK(std::hypot(pb[0], pb[1]) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(pb[2] == -50.0);

  const auto box = FunctionClass::box(1, 2, 10.0);
  const std::vector<double> clamp_in{-1.0, 11.0};
  CHECK(project_member(box, clamp_in) == std::vector<double>{0.0, 10.0});

  const auto fin = FunctionClass::finite({QTable(1, 2, 0.0)}, 1.0);
  CHECK_THROWS_AS(project_member(fin, clamp_in), NotParametric);
}

TEST_CASE("projection is idempotent") {
  testing::Gen gen(21);
  for (int rep = 0; rep < 200; ++rep) {
    const std::size_t S = gen.between(1, 4), A = gen.between(1, 3), d = gen.between(1, 4);
    std::vector<double> phi(S * A * d);
    for (double& x : phi) x = gen.uniform(-2, 2);
    const bool bias = gen.uniform() < 0.5;
    const auto lin = FunctionClass::linear(S, A, phi, d, gen.uniform(0.1, 5), bias);
    std::vector<double> raw(lin.parameter_dim());
    for (double& x : raw) x = gen.uniform(-10, 10);
    const auto once = project_member(lin, raw);
    const auto twice = project_member(lin, once);
    CHECK(testing::max_abs_diff(once, twice) <= 1e-15 * 10.0);
    const auto box = FunctionClass::box(S, A, 3.0);
    std::vector<double> rb(S * A);
    for (double& x : rb) x = gen.uniform(-5, 8);
    const auto b1 = project_member(box, rb);
    CHECK(project_member(box, b1) == b1);
  }
}

TEST_CASE("evaluate, jacobian and pullback agree") {
  testing::Gen gen(22);
  for (int rep = 0; rep < 50; ++rep) {
    const std::size_t S = gen.between(1, 4), A = gen.between(1, 3), d = gen.between(1, 3);
    std::vector<double> phi(S * A * d);
    for (double& x : phi) x = gen.uniform(-2, 2);
    const bool bias = gen.uniform() < 0.5;
    const auto lin = FunctionClass::linear(S, A, phi, d, 10.0, bias);
    const std::size_t n = lin.parameter_dim();
    CHECK(n == d + (bias ? 1 : 0));
    std::vector<double> w(n);
    for (double& x : w) x = gen.uniform(-1, 1);
    const auto f = lin.evaluate(w);
    for (std::size_t sa = 0; sa < S * A; ++sa) {
      double expect = bias ? w[d] : 0.0;
      for (std::size_t k = 0; k < d; ++k) expect += phi[sa * d + k] * w[k];
      CHECK(f.values()[sa] == doctest::Approx(expect).epsilon(1e-14));
    }
    const auto jac = lin.jacobian();
    std::vector<double> g(S * A);
    for (double& x : g) x = gen.uniform(-1, 1);
    const auto back = lin.pullback(g);
    for (std::size_t k = 0; k < n; ++k) {
      double expect = 0.0;
      for (std::size_t sa = 0; sa < S * A; ++sa) expect += jac[sa * n + k] * g[sa];
      CHECK(back[k] == doctest::Approx(expect).epsilon(1e-12));
    }
  }
}

TEST_CASE("singleton class returns its only member") {
  testing::Gen gen(23);
  const auto st = random_setup(gen, 3, 2, 0.8);
  const auto q = exact_q_values(*st.mdp, st.pi);
  const auto fc = FunctionClass::finite({q}, st.mdp->vmax());
  for (double beta : {0.0, 1.0, 100.0}) {
    const CriticObjective obj{PessimismMode::Relative, beta, PopulationSource{st.mdp, st.d_mu},
                              st.pi};
    CHECK(critic_argmin(fc, obj) == q);
  }
}

TEST_CASE("finite argmin equals the brute-force minimum with lowest-index ties") {
  testing::Gen gen(24);
  for (int rep = 0; rep < 100; ++rep) {
    const auto st = random_setup(gen, gen.between(1, 4), gen.between(1, 3), gen.uniform(0, 0.9));
    const std::size_t S = st.mdp->num_states(), A = st.mdp->num_actions();
    const double vmax = st.mdp->vmax();
    std::vector<QTable> members;
    const std::size_t count = gen.between(1, 6);
    for (std::size_t i = 0; i < count; ++i) members.push_back(gen.table(S, A, 0.0, vmax));
    if (gen.uniform() < 0.5) members.push_back(members[gen.index(members.size())]);
    const auto fc = FunctionClass::finite(members, vmax);
    const double beta = gen.uniform() < 0.3 ? 0.0 : gen.uniform(0, 10);
    const auto mode = gen.uniform() < 0.5 ? PessimismMode::Relative : PessimismMode::Absolute;
    const CriticObjective obj{mode, beta, PopulationSource{st.mdp, st.d_mu}, st.pi};
    std::size_t best = 0;
    double best_val = 1e300;
    for (std::size_t i = 0; i < members.size(); ++i) {
      const double v = oracle_objective(*st.mdp, st.d_mu, members[i], st.pi, beta, mode);
      if (v < best_val - 1e-12) {
        best_val = v;
        best = i;
      }
    }
    const auto sol = solve_critic(fc, obj);
    REQUIRE(sol.index.has_value());
    CHECK(*sol.index == best);
    CHECK(sol.objective.total == doctest::Approx(best_val).epsilon(1e-10));
  }
}

TEST_CASE("finite argmin value is permutation invariant") {
  testing::Gen gen(25);
  for (int rep = 0; rep < 30; ++rep) {
    const auto st = random_setup(gen, 3, 2, 0.7);
    std::vector<QTable> members;
    for (int i = 0; i < 5; ++i) members.push_back(gen.table(3, 2, 0.0, st.mdp->vmax()));
    const CriticObjective obj{PessimismMode::Relative, 2.0, PopulationSource{st.mdp, st.d_mu},
                              st.pi};
    const double v1 = solve_critic(FunctionClass::finite(members, st.mdp->vmax()), obj).objective.total;
    std::shuffle(members.begin(), members.end(), gen.engine());
    const double v2 = solve_critic(FunctionClass::finite(members, st.mdp->vmax()), obj).objective.total;
    CHECK(v1 == v2);
  }
}

TEST_CASE("relative objective of a constant critic is zero at beta zero") {
  testing::Gen gen(26);
  for (int rep = 0; rep < 30; ++rep) {
    const auto st = random_setup(gen, 3, 3, 0.8);
    std::vector<QTable> members{gen.table(3, 3, 0.0, st.mdp->vmax()),
                                QTable(3, 3, gen.uniform(0.0, st.mdp->vmax())),
                                gen.table(3, 3, 0.0, st.mdp->vmax())};
    const auto fc = FunctionClass::finite(members, st.mdp->vmax());
    const CriticObjective obj{PessimismMode::Relative, 0.0, PopulationSource{st.mdp, st.d_mu},
                              st.pi};
    CHECK(evaluate_objective(fc, obj, members[1]).total == doctest::Approx(0.0));
    CHECK(solve_critic(fc, obj).objective.total <= 1e-15);
    const auto box = FunctionClass::box(3, 3, st.mdp->vmax());
    CHECK(solve_critic(box, obj).objective.total <= 1e-12);
  }
}

TEST_CASE("finite class containing Q is selected when its rivals are worse") {
  testing::Gen gen(27);
  for (int rep = 0; rep < 30; ++rep) {
    const auto st = random_setup(gen, 3, 2, 0.8);
    const auto q = exact_q_values(*st.mdp, st.pi);
    std::vector<QTable> members{gen.table(3, 2, 0.0, st.mdp->vmax()), q,
                                gen.table(3, 2, 0.0, st.mdp->vmax())};
    const auto fc = FunctionClass::finite(members, st.mdp->vmax());
    const CriticObjective obj{PessimismMode::Relative, 1e4, PopulationSource{st.mdp, st.d_mu},
                              st.pi};
    std::size_t best = 0;
    double best_val = 1e300;
    for (std::size_t i = 0; i < members.size(); ++i) {
      const double v = oracle_objective(*st.mdp, st.d_mu, members[i], st.pi, 1e4,
                                        PessimismMode::Relative);
      if (v < best_val) best_val = v, best = i;
    }
    CHECK(best == 1);
    CHECK(*solve_critic(fc, obj).index == 1);
  }
}

TEST_CASE("box solve with large beta drives the Bellman error to zero") {
  testing::Gen gen(28);
  for (int rep = 0; rep < 10; ++rep) {
    const auto st = random_setup(gen, gen.between(2, 5), gen.between(2, 3), 0.9);
    const std::size_t S = st.mdp->num_states(), A = st.mdp->num_actions();
    const double vmax = st.mdp->vmax();
    const auto box = FunctionClass::box(S, A, vmax);
    const CriticObjective obj{PessimismMode::Relative, 1e6, PopulationSource{st.mdp, st.d_mu},
                              st.pi};
    const auto sol = solve_critic(box, obj);
    CHECK(sol.certified);
    CHECK(population_E(*st.mdp, st.d_mu, sol.f, st.pi).value <= 1e-6 * vmax * vmax);
    const auto q = exact_q_values(*st.mdp, st.pi);
    CHECK(testing::max_abs_diff(sol.f.values(), q.values()) < 1e-2);
  }
}

TEST_CASE("box solve matches exact coordinate descent") {
  testing::Gen gen(29);
  for (int rep = 0; rep < 12; ++rep) {
    const auto st = random_setup(gen, gen.between(1, 3), 2, gen.uniform(0.3, 0.8));
    const std::size_t S = st.mdp->num_states(), A = st.mdp->num_actions();
    const double vmax = st.mdp->vmax();
    const double beta = gen.uniform(0.05, 4.0);
    const auto mode = rep % 2 ? PessimismMode::Absolute : PessimismMode::Relative;
    const auto box = FunctionClass::box(S, A, vmax);
    const CriticObjective obj{mode, beta, PopulationSource{st.mdp, st.d_mu}, st.pi};
    const auto sol = solve_critic(box, obj);
    CHECK(sol.converged);
    CHECK(sol.gradient_norm <= 1e-8);
    CHECK(sol.certified);
    const auto cd = coordinate_descent_box(st, beta, mode, vmax, 20000);
    const double oracle = oracle_objective(*st.mdp, st.d_mu,
                                           StateActionTable(S, A, cd), st.pi, beta, mode);
    CHECK(sol.objective.total <= oracle + 1e-8);
    CHECK(sol.objective.total == doctest::Approx(oracle).epsilon(1e-6));
  }
}

TEST_CASE("linear solve is never beaten by random feasible points") {
  testing::Gen gen(30);
  for (int rep = 0; rep < 20; ++rep) {
    const auto st = random_setup(gen, 3, 2, 0.8);
    const std::size_t d = 2;
    std::vector<double> phi(6 * d);
    for (double& x : phi) x = gen.uniform(-1, 1);
    const double bound = gen.uniform(0.5, 20);
    const bool bias = rep % 2 == 0;
    const auto lin = FunctionClass::linear(3, 2, phi, d, bound, bias);
    const double beta = gen.uniform(0.1, 5);
    const CriticObjective obj{PessimismMode::Relative, beta, PopulationSource{st.mdp, st.d_mu},
                              st.pi};
    const auto sol = solve_critic(lin, obj);
    CHECK(sol.converged);
    CHECK(sol.gradient_norm <= 1e-8);
    double norm = 0.0;
    for (std::size_t k = 0; k < d; ++k) norm += sol.params[k] * sol.params[k];
    CHECK(std::sqrt(norm) <= bound * (1 + 1e-12));
    for (int probe = 0; probe < 200; ++probe) {
      std::vector<double> w(lin.parameter_dim());
      for (double& x : w) x = gen.uniform(-bound, bound);
      w = project_member(lin, w);
      const double v = oracle_objective(*st.mdp, st.d_mu, lin.evaluate(w), st.pi, beta,
                                        PessimismMode::Relative);
      CHECK(sol.objective.total <= v + 1e-9);
    }
  }
}

TEST_CASE("box class at population level refuses a behavior without full support") {
  const Mdp m = chain_mdp(3, 0.9);
  auto mdp = std::make_shared<const Mdp>(m);
  const std::vector<std::size_t> acts{1, 1, 1};
  const auto mu = TabularPolicy::deterministic(2, acts);
  const CriticObjective obj{PessimismMode::Relative, 1.0,
                            PopulationSource{mdp, occupancy_measure(m, mu)},
                            TabularPolicy::uniform(3, 2)};
  CHECK_THROWS_AS(solve_critic(FunctionClass::box(3, 2, m.vmax()), obj), UnidentifiedCritic);
}

TEST_CASE("objective validation") {
  testing::Gen gen(31);
  const auto st = random_setup(gen, 3, 2, 0.8);
  const auto box = FunctionClass::box(3, 2, st.mdp->vmax());
  CHECK_THROWS_AS(validate_objective(box, CriticObjective{PessimismMode::Relative, -1.0,
                                                          PopulationSource{st.mdp, st.d_mu},
                                                          st.pi}),
                  ArgumentError);
  CHECK_THROWS_AS(validate_objective(box, CriticObjective{PessimismMode::Relative, 1.0,
                                                          PopulationSource{st.mdp, st.d_mu},
                                                          TabularPolicy::uniform(2, 2)}),
                  ArgumentError);
}

TEST_CASE("audit of a realizable class is zero") {
  testing::Gen gen(32);
  const Mdp m = gen.mdp(4, 2, 0.8);
  std::vector<TabularPolicy> policies;
  std::vector<QTable> members;
  for (int i = 0; i < 4; ++i) {
    policies.push_back(gen.policy(4, 2));
    members.push_back(exact_q_values(m, policies.back()));
  }
  const auto rep = class_realizability_audit(FunctionClass::finite(members, 1e9), m, policies);
  CHECK(rep.exact);
  CHECK(rep.admissible_count == 4);
  for (double v : rep.values) CHECK(std::abs(v) < 1e-10);
}

TEST_CASE("audit of the zero class equals the worst weighted squared reward") {
  testing::Gen gen(33);
  const std::size_t S = 3, A = 2;
  std::vector<double> p;
  for (std::size_t sa = 0; sa < S * A; ++sa) {
    const auto row = gen.simplex(S);
    p.insert(p.end(), row.begin(), row.end());
  }
  StateActionTable r(S, A);
  for (double& x : r.values()) x = gen.uniform(0.2, 1.0);
  const Mdp m(S, A, p, r, 0.7, 0);
  std::vector<TabularPolicy> policies{gen.policy(S, A), gen.policy(S, A), gen.policy(S, A)};
  const auto rep = class_realizability_audit(FunctionClass::finite({QTable(S, A, 0.0)}, 1.0), m,
                                             policies);
  double expect = 0.0;
  for (const auto& nu_pi : policies) {
    const auto d = testing::power_series_occupancy(m, nu_pi, 400);
    double v = 0.0;
    for (std::size_t sa = 0; sa < S * A; ++sa) v += d.values()[sa] * r.values()[sa] * r.values()[sa];
    expect = std::max(expect, v);
  }
  for (double v : rep.values) CHECK(v == doctest::Approx(expect).epsilon(1e-10));

  const Mdp ones(S, A, p, StateActionTable(S, A, 1.0), 0.7, 0);
  const auto rep1 = class_realizability_audit(FunctionClass::finite({QTable(S, A, 0.0)}, 1.0),
                                              ones, policies);
  for (double v : rep1.values) CHECK(v == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("audit needs at least one policy") {
  const Mdp m = chain_mdp(3);
  CHECK_THROWS_AS(class_realizability_audit(FunctionClass::box(3, 2, m.vmax()), m, {}),
                  EmptyAdmissibleSet);
}

TEST_CASE("parametric audit of the box class is near zero") {
  testing::Gen gen(34);
  const Mdp m = gen.mdp(3, 2, 0.8);
  std::vector<TabularPolicy> policies{gen.policy(3, 2, 0.1), gen.policy(3, 2, 0.1)};
  const auto rep = class_realizability_audit(FunctionClass::box(3, 2, m.vmax()), m, policies);
  CHECK_FALSE(rep.exact);
  for (double v : rep.values) CHECK(v < 1e-8);
}
