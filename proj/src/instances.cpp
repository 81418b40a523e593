#include "atac/instances.hpp"

#include <cmath>

#include "atac/errors.hpp"
#include "atac/rng.hpp"

namespace atac {
namespace {

std::vector<double> dirichlet(Rng& rng, std::size_t n, double concentration) {
  std::vector<double> x(n);
  double total = 0.0;
  for (double& v : x) {
    // Gamma(k) for integer k as a sum of exponentials; fractional k by the
    // Marsaglia–Tsang method.
    if (concentration == 1.0) {
      v = rng.exponential();
    } else {
      const double k = concentration < 1.0 ? concentration + 1.0 : concentration;
      const double d = k - 1.0 / 3.0;
      const double c = 1.0 / std::sqrt(9.0 * d);
      for (;;) {
        const double z = rng.normal();
        const double t = 1.0 + c * z;
        if (t <= 0.0) continue;
        const double t3 = t * t * t;
        const double u = rng.uniform();
        if (std::log(u) < 0.5 * z * z + d - d * t3 + d * std::log(t3)) {
          v = d * t3;
          break;
        }
      }
      if (concentration < 1.0) v *= std::pow(rng.uniform(), 1.0 / concentration);
    }
    total += v;
  }
  for (double& v : x) v /= total;
  return x;
}

// Transition tensor helper: t[((s*A)+a)*S + s'].
struct Tensor {
  std::size_t S, A;
  std::vector<double> t;
  Tensor(std::size_t s, std::size_t a) : S(s), A(a), t(s * a * s, 0.0) {}
  double& operator()(std::size_t s, std::size_t a, std::size_t sn) { return t[(s * A + a) * S + sn]; }
};

}  // namespace

Mdp random_mdp(std::size_t S, std::size_t A, double gamma, std::uint64_t seed,
               double concentration) {
  if (S == 0 || A == 0) throw ArgumentError("random_mdp: sizes must be positive");
  if (!(concentration > 0.0)) throw ArgumentError("random_mdp: concentration must be positive");
  Rng rng(seed);
  Tensor p(S, A);
  StateActionTable r(S, A);
  for (std::size_t s = 0; s < S; ++s)
    for (std::size_t a = 0; a < A; ++a) {
      const auto row = dirichlet(rng, S, concentration);
      for (std::size_t sn = 0; sn < S; ++sn) p(s, a, sn) = row[sn];
      r(s, a) = rng.uniform();
    }
  return Mdp(S, A, std::move(p.t), std::move(r), gamma, 0, 1.0,
             "random-" + std::to_string(S) + "x" + std::to_string(A) + "-" + std::to_string(seed));
}

TabularPolicy random_policy(std::size_t S, std::size_t A, std::uint64_t seed, double floor_mix) {
  if (!(floor_mix >= 0.0 && floor_mix <= 1.0))
    throw ArgumentError("random_policy: floor_mix must lie in [0, 1]");
  Rng rng(seed);
  StateActionTable w(S, A);
  for (std::size_t s = 0; s < S; ++s) {
    const auto row = dirichlet(rng, A, 1.0);
    for (std::size_t a = 0; a < A; ++a)
      w(s, a) = (1.0 - floor_mix) * row[a] + floor_mix / static_cast<double>(A);
  }
  return TabularPolicy::normalized(std::move(w));
}

QTable random_qtable(std::size_t S, std::size_t A, double vmax, std::uint64_t seed) {
  Rng rng(seed);
  QTable q(S, A);
  for (double& v : q.values()) v = rng.uniform(0.0, vmax);
  return q;
}

Occupancy random_occupancy(std::size_t S, std::size_t A, std::uint64_t seed) {
  Rng rng(seed);
  const auto flat = dirichlet(rng, S * A, 1.0);
  return Occupancy(StateActionTable(S, A, flat));
}

Mdp chain_mdp(std::size_t n, double gamma) {
  if (n < 2) throw ArgumentError("chain needs at least 2 states");
  Tensor p(n, 2);
  StateActionTable r(n, 2, 0.0);
  for (std::size_t s = 0; s < n; ++s) {
    p(s, 0, s == 0 ? 0 : s - 1) += 1.0;
    const std::size_t right = s + 1 < n ? s + 1 : s;
    p(s, 1, right) += 0.9;
    p(s, 1, s) += 0.1;
  }
  r(n - 1, 0) = 1.0;
  r(n - 1, 1) = 1.0;
  return Mdp(n, 2, std::move(p.t), std::move(r), gamma, 0, std::nullopt,
             "chain-" + std::to_string(n));
}

Mdp gridworld_mdp(std::size_t width, std::size_t height, double gamma) {
  if (width == 0 || height == 0 || width * height < 2)
    throw ArgumentError("gridworld needs at least 2 cells");
  const std::size_t S = width * height;
  const std::size_t goal = S - 1;
  Tensor p(S, 4);
  StateActionTable r(S, 4, 0.0);
  auto move = [&](std::size_t s, std::size_t a) {
    std::size_t x = s % width, y = s / width;
    switch (a) {
      case 0: y = y + 1 < height ? y + 1 : y; break;
      case 1: x = x + 1 < width ? x + 1 : x; break;
      case 2: y = y > 0 ? y - 1 : y; break;
      default: x = x > 0 ? x - 1 : x; break;
    }
    return y * width + x;
  };
  for (std::size_t s = 0; s < S; ++s)
    for (std::size_t a = 0; a < 4; ++a) {
      if (s == goal) {
        p(s, a, s) = 1.0;
        r(s, a) = 1.0;
        continue;
      }
      p(s, a, move(s, a)) += 0.9;
      for (std::size_t b = 0; b < 4; ++b) p(s, a, move(s, b)) += 0.025;
    }
  return Mdp(S, 4, std::move(p.t), std::move(r), gamma, 0, std::nullopt,
             "gridworld-" + std::to_string(width) + "x" + std::to_string(height));
}

BanditInstance bandit_appendix_c() {
  BanditGame g;
  g.id = "bandit-appendix-c";
  g.rewards = {1.0, 2.0};
  g.behavior = {0.25, 0.75};
  g.critics = {{1.0, 2.0}, {2.0, 0.0}, {0.0, 0.0}, {1.0, 1.0}, {2.0, 2.0}};
  for (int i = 0; i <= 20; ++i) {
    const double q = 0.05 * i;
    g.policies.push_back({1.0 - q, q});
  }
  g.policies.front() = {1.0, 0.0};
  g.policies.back() = {0.0, 1.0};
  g.policies[5] = {0.25, 0.75};
  StateActionTable r(1, 2, std::vector<double>{1.0, 2.0});
  Mdp mdp(1, 2, {1.0, 1.0}, std::move(r), 0.0, 0, std::nullopt, g.id);
  TabularPolicy mu(StateActionTable(1, 2, std::vector<double>{0.25, 0.75}));
  return {std::move(mdp), std::move(g), std::move(mu)};
}

PessimismContrast pessimism_contrast_bandit() {
  StateActionTable r(1, 2, std::vector<double>{1.0, 2.0});
  Mdp mdp(1, 2, {1.0, 1.0}, std::move(r), 0.0, 0, std::nullopt, "pessimism-contrast");
  TabularPolicy mu(StateActionTable(1, 2, std::vector<double>{0.0, 1.0}));
  std::vector<QTable> members{QTable(1, 2, std::vector<double>{1.0, 2.0}),
                              QTable(1, 2, std::vector<double>{2.0, 0.0})};
  return {std::move(mdp), std::move(mu), FunctionClass::finite(std::move(members), 2.0)};
}

RobustPiInstance robust_pi_instance() {
  // 0: start, 1: rewarding branch, 2: barren branch (both absorbing).
  const double gamma = 0.9;
  Tensor p(3, 2);
  StateActionTable r(3, 2, 0.0);
  p(0, 0, 1) = 1.0;
  p(0, 1, 2) = 1.0;
  for (std::size_t a = 0; a < 2; ++a) {
    p(1, a, 1) = 1.0;
    p(2, a, 2) = 1.0;
    r(1, a) = 1.0;
  }
  Mdp mdp(3, 2, std::move(p.t), std::move(r), gamma, 0, std::nullopt, "robust-pi");
  const double v = 1.0 / (1.0 - gamma);
  QTable truth(3, 2, std::vector<double>{gamma * v, 0.0, v, v, 0.0, 0.0});
  QTable rival(3, 2, std::vector<double>{0.0, gamma * v, 0.0, 0.0, v, v});
  TabularPolicy mu(StateActionTable(3, 2, std::vector<double>{0.7, 0.3, 0.5, 0.5, 0.5, 0.5}));
  return {std::move(mdp), std::move(mu),
          FunctionClass::finite({std::move(truth), std::move(rival)}, v), 10000, 1000};
}

CoverageInstance coverage_instance() {
  // 0: decision. Action 0 fans out uniformly over kFan intermediate states that
  // all lead to the rewarding absorbing state; action 1 goes to an absorbing
  // state paying half the reward.
  constexpr std::size_t kFan = 20;
  const std::size_t S = kFan + 3;
  const std::size_t good = kFan + 1;
  const std::size_t fallback = kFan + 2;
  Tensor p(S, 2);
  StateActionTable r(S, 2, 0.0);
  for (std::size_t m = 1; m <= kFan; ++m) p(0, 0, m) = 1.0 / static_cast<double>(kFan);
  p(0, 1, fallback) = 1.0;
  for (std::size_t a = 0; a < 2; ++a) {
    for (std::size_t m = 1; m <= kFan; ++m) p(m, a, good) = 1.0;
    p(good, a, good) = 1.0;
    p(fallback, a, fallback) = 1.0;
    r(good, a) = 1.0;
    r(fallback, a) = 0.5;
  }
  Mdp mdp(S, 2, std::move(p.t), std::move(r), 0.9, 0, std::nullopt, "coverage");
  return {std::move(mdp), TabularPolicy::uniform(S, 2)};
}

DivergenceInstance divergence_instance() {
  // 0: action 0 stays, action 1 moves to state 1 w.p. 1/2; both pay 0.5.
  // 1: absorbing; action 1 pays 1, action 0 pays 0. The logged actions are
  // mostly action 0, and state 1's features for its two actions are collinear.
  Tensor p(2, 2);
  p(0, 0, 0) = 1.0;
  p(0, 1, 0) = 0.5;
  p(0, 1, 1) = 0.5;
  p(1, 0, 1) = 1.0;
  p(1, 1, 1) = 1.0;
  StateActionTable r(2, 2, std::vector<double>{0.5, 0.5, 0.0, 1.0});
  Mdp mdp(2, 2, std::move(p.t), std::move(r), 0.99, 0, std::nullopt, "divergence");
  TabularPolicy mu(StateActionTable(2, 2, std::vector<double>{0.9, 0.1, 0.9, 0.1}));
  PracticalConfig c;
  c.critic_class =
      FunctionClass::linear(2, 2, {4.0, 0.0, 0.0, 4.0, 2.0, 1.0, 4.0, 2.0}, 2, 1e3, false);
  c.critic_init = std::vector<double>{1.0, 1.0};
  c.optimizer.kind = OptimizerKind::PlainSGD;
  c.beta = 1.0;
  c.eta_fast = 0.01;
  c.eta_slow = 0.001;
  c.tau = 0.005;
  c.epochs = 40;
  c.steps_per_epoch = 100;
  c.minibatch_size = 256;
  c.warm_start_epochs = 0;
  return {std::move(mdp), std::move(mu), 2000, std::move(c)};
}

std::vector<std::string> instance_names() {
  return {"random", "chain", "gridworld", "bandit-appendix-c", "divergence", "robust-pi",
          "coverage", "pessimism-contrast"};
}

}  // namespace atac
