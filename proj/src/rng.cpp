#include "atac/rng.hpp"

#include <cmath>
#include <numbers>

#include "atac/errors.hpp"

namespace atac {

std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t global_seed, std::uint64_t index_a,
                          std::uint64_t index_b) {
  return mix64(mix64(mix64(global_seed) ^ index_a) ^ (index_b * 0xd1b54a32d192ed03ULL));
}

double Rng::uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

std::size_t Rng::index(std::size_t n) {
  if (n == 0) throw ArgumentError("Rng::index: empty range");
  auto k = static_cast<std::size_t>(uniform() * static_cast<double>(n));
  return k < n ? k : n - 1;
}

std::size_t Rng::categorical(std::span<const double> probs) {
  if (probs.empty()) throw ArgumentError("Rng::categorical: empty distribution");
  const double u = uniform();
  double cumulative = 0.0;
  std::size_t last_positive = 0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (probs[i] <= 0.0) continue;
    last_positive = i;
    cumulative += probs[i];
    if (u < cumulative) return i;
  }
  return last_positive;
}

std::uint64_t Rng::geometric(double p) {
  if (!(p > 0.0 && p <= 1.0)) throw ArgumentError("Rng::geometric: p must lie in (0, 1]");
  if (p == 1.0) return 0;
  // P(T >= t) = (1-p)^t, so T = floor(log(U) / log(1-p)) with U in (0, 1].
  const double u = 1.0 - uniform();
  return static_cast<std::uint64_t>(std::floor(std::log(u) / std::log1p(-p)));
}

double Rng::normal() {
  const double u1 = 1.0 - uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

double Rng::exponential() { return -std::log(1.0 - uniform()); }

}  // namespace atac
