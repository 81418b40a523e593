#pragma once

#include <cstdint>
#include <random>
#include <span>

namespace atac {

/// splitmix64 finalizer; the 64-bit mix used for all seed derivation.
std::uint64_t mix64(std::uint64_t x);

/// Seed for sweep cell (index_a, index_b) under a global seed. Depends only on
/// its own indices, so growing a grid never perturbs existing cells.
std::uint64_t derive_seed(std::uint64_t global_seed, std::uint64_t index_a,
                          std::uint64_t index_b);

/// Seeded generator with implementation-independent sampling: the engine is
/// mt19937_64 (output fixed by the standard) and every variate is produced by
/// explicit inversion rather than std:: distributions.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }
  /// Uniform on [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Uniform integer in [0, n).
  std::size_t index(std::size_t n);
  /// Draw from a probability vector (inverse CDF; last positive entry absorbs round-off).
  std::size_t categorical(std::span<const double> probs);
  /// Number of failures before the first success, success probability p in (0, 1].
  std::uint64_t geometric(double p);
  double normal();
  double exponential();

 private:
  std::mt19937_64 engine_;
};

}  // namespace atac
