#pragma once

// Hand-rolled generators and independent oracles shared by the test suites.

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "atac/mdp.hpp"
#include "atac/table.hpp"

namespace testing {

class Gen {
 public:
  explicit Gen(std::uint64_t seed) : eng_(seed) {}

  double uniform(double lo = 0.0, double hi = 1.0) {
    return std::uniform_real_distribution<double>(lo, hi)(eng_);
  }
  std::size_t index(std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(eng_); }
  std::size_t between(std::size_t lo, std::size_t hi) {
    return std::uniform_int_distribution<std::size_t>(lo, hi)(eng_);
  }
  std::vector<double> simplex(std::size_t n, double floor = 0.0) {
    std::vector<double> x(n);
    double total = 0.0;
    for (double& v : x) {
      v = -std::log(1.0 - uniform()) + floor;
      total += v;
    }
    for (double& v : x) v /= total;
    return x;
  }
  /// Random MDP with sparse-ish rows and rewards in [0, 1].
  atac::Mdp mdp(std::size_t S, std::size_t A, double gamma) {
    std::vector<double> p;
    std::vector<double> r(S * A);
    for (std::size_t sa = 0; sa < S * A; ++sa) {
      auto row = simplex(S);
      if (uniform() < 0.3) row[index(S)] += 1.0;
      double total = 0.0;
      for (double v : row) total += v;
      for (double& v : row) v /= total;
      p.insert(p.end(), row.begin(), row.end());
      r[sa] = uniform();
    }
    return atac::Mdp(S, A, std::move(p), atac::StateActionTable(S, A, std::move(r)), gamma,
                     index(S));
  }
  atac::TabularPolicy policy(std::size_t S, std::size_t A, double floor = 0.0) {
    atac::StateActionTable t(S, A);
    for (std::size_t s = 0; s < S; ++s) {
      const auto row = simplex(A, floor);
      for (std::size_t a = 0; a < A; ++a) t(s, a) = row[a];
    }
    return atac::TabularPolicy::normalized(std::move(t));
  }
  atac::QTable table(std::size_t S, std::size_t A, double lo, double hi) {
    atac::QTable f(S, A);
    for (double& v : f.values()) v = uniform(lo, hi);
    return f;
  }
  std::mt19937_64& engine() { return eng_; }

 private:
  std::mt19937_64 eng_;
};

/// Occupancy by summing the discounted state-action distribution for `steps` steps.
inline atac::StateActionTable power_series_occupancy(const atac::Mdp& m,
                                                     const atac::TabularPolicy& pi,
                                                     std::size_t steps) {
  const std::size_t S = m.num_states(), A = m.num_actions();
  std::vector<double> ps(S, 0.0);
  ps[m.start_state()] = 1.0;
  atac::StateActionTable d(S, A, 0.0);
  double disc = 1.0;
  for (std::size_t t = 0; t <= steps; ++t) {
    std::vector<double> next(S, 0.0);
    for (std::size_t s = 0; s < S; ++s)
      for (std::size_t a = 0; a < A; ++a) {
        const double mass = ps[s] * pi(s, a);
        d(s, a) += (1.0 - m.gamma()) * disc * mass;
        for (std::size_t sn = 0; sn < S; ++sn) next[sn] += mass * m.transition(s, a, sn);
      }
    ps = std::move(next);
    disc *= m.gamma();
  }
  return d;
}

/// Q^π by iterating the Bellman operator to numerical convergence.
inline atac::StateActionTable iterated_q(const atac::Mdp& m, const atac::TabularPolicy& pi) {
  const std::size_t S = m.num_states(), A = m.num_actions();
  atac::StateActionTable q(S, A, 0.0);
  for (int it = 0; it < 100000; ++it) {
    atac::StateActionTable next(S, A);
    double delta = 0.0;
    for (std::size_t s = 0; s < S; ++s)
      for (std::size_t a = 0; a < A; ++a) {
        double v = m.reward(s, a);
        for (std::size_t sn = 0; sn < S; ++sn) {
          double vn = 0.0;
          for (std::size_t an = 0; an < A; ++an) vn += pi(sn, an) * q(sn, an);
          v += m.gamma() * m.transition(s, a, sn) * vn;
        }
        next(s, a) = v;
        delta = std::max(delta, std::abs(v - q(s, a)));
      }
    q = std::move(next);
    if (delta < 1e-14) break;
  }
  return q;
}

inline double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
  return d;
}

}  // namespace testing
