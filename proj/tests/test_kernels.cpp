#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "atac/errors.hpp"
#include "atac/kernels.hpp"

using namespace atac::kernels;

namespace {

std::vector<double> random_vector(std::mt19937_64& eng, std::size_t n) {
  std::uniform_real_distribution<double> u(-10.0, 10.0);
  std::vector<double> v(n);
  for (double& x : v) x = u(eng);
  return v;
}

double tolerance(std::size_t n, double scale) { return 1e-14 * static_cast<double>(n + 1) * scale; }

}  // namespace

TEST_CASE("scalar kernels against naive loops") {
  std::mt19937_64 eng(1);
  const auto& k = scalar_table();
  for (std::size_t n : {0u, 1u, 3u, 4u, 7u, 16u, 33u, 250u}) {
    const auto a = random_vector(eng, n), b = random_vector(eng, n);
    double dot = 0, sum = 0, wsq = 0;
    for (std::size_t i = 0; i < n; ++i) {
      dot += a[i] * b[i];
      sum += a[i];
      wsq += std::abs(a[i]) * b[i] * b[i];
    }
    std::vector<double> w(n);
    for (std::size_t i = 0; i < n; ++i) w[i] = std::abs(a[i]);
    CHECK(std::abs(k.dot(a.data(), b.data(), n) - dot) <= tolerance(n, 100));
    CHECK(std::abs(k.sum(a.data(), n) - sum) <= tolerance(n, 10));
    CHECK(std::abs(k.weighted_sq_sum(w.data(), b.data(), n) - wsq) <= tolerance(n, 1000));
    auto y = b;
    k.axpby(2.0, a.data(), -0.5, y.data(), n);
    for (std::size_t i = 0; i < n; ++i) CHECK(y[i] == doctest::Approx(2.0 * a[i] - 0.5 * b[i]));
  }
}

TEST_CASE("avx2 kernels match the scalar reference") {
  const KernelTable* fast = avx2_table();
  if (!fast || !cpu_has_avx2()) {
    MESSAGE("AVX2 unavailable; equivalence not exercised");
    return;
  }
  const auto& ref = scalar_table();
  std::mt19937_64 eng(2);
  for (std::size_t n = 0; n < 70; ++n) {
    const auto a = random_vector(eng, n), b = random_vector(eng, n);
    std::vector<double> w(n);
    for (std::size_t i = 0; i < n; ++i) w[i] = std::abs(a[i]);
    CHECK(std::abs(fast->dot(a.data(), b.data(), n) - ref.dot(a.data(), b.data(), n)) <= tolerance(n, 100));
    CHECK(std::abs(fast->sum(a.data(), n) - ref.sum(a.data(), n)) <= tolerance(n, 10));
    CHECK(std::abs(fast->weighted_sq_sum(w.data(), b.data(), n) -
                   ref.weighted_sq_sum(w.data(), b.data(), n)) <= tolerance(n, 1000));
    auto y1 = b, y2 = b;
    ref.axpby(1.5, a.data(), 0.25, y1.data(), n);
    fast->axpby(1.5, a.data(), 0.25, y2.data(), n);
    for (std::size_t i = 0; i < n; ++i) CHECK(std::abs(y1[i] - y2[i]) <= 1e-13);
    for (std::size_t rows : {1u, 2u, 5u}) {
      const auto m = random_vector(eng, rows * n);
      std::vector<double> r1(rows), r2(rows);
      ref.gemv(m.data(), a.data(), r1.data(), rows, n);
      fast->gemv(m.data(), a.data(), r2.data(), rows, n);
      for (std::size_t i = 0; i < rows; ++i) CHECK(std::abs(r1[i] - r2[i]) <= tolerance(n, 100));
    }
  }
}

TEST_CASE("backend selection") {
  const Backend original = active_backend();
  set_backend(Backend::Scalar);
  CHECK(active_backend() == Backend::Scalar);
  const std::vector<double> a{1, 2, 3}, b{4, 5, 6};
  CHECK(dot(a, b) == 32.0);
  if (avx2_table() && cpu_has_avx2()) {
    set_backend(Backend::Avx2);
    CHECK(active_backend() == Backend::Avx2);
    CHECK(dot(a, b) == 32.0);
  } else {
    CHECK_THROWS_AS(set_backend(Backend::Avx2), atac::ArgumentError);
  }
  CHECK(backend_name(Backend::Scalar) == "scalar");
  set_backend(original);
}

TEST_CASE("span wrappers check sizes") {
  const std::vector<double> a{1, 2}, b{1};
  CHECK_THROWS_AS(dot(a, b), atac::ArgumentError);
  std::vector<double> y{0, 0};
  const std::vector<double> m{1, 2, 3, 4};
  gemv(m, a, y, 2, 2);
  CHECK(y == std::vector<double>{5, 11});
}
