#include "atac/kernels.hpp"

#if defined(__x86_64__) || defined(_M_X64)
#define ATAC_HAVE_AVX2_KERNELS 1
#include <immintrin.h>
#else
#define ATAC_HAVE_AVX2_KERNELS 0
#endif

namespace atac::kernels {

#if ATAC_HAVE_AVX2_KERNELS
namespace {

#define ATAC_AVX2 __attribute__((target("avx2,fma")))

ATAC_AVX2 inline double reduce_add(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_add_pd(lo, hi);
  __m128d shuf = _mm_unpackhi_pd(lo, lo);
  return _mm_cvtsd_f64(_mm_add_sd(lo, shuf));
}

// Two accumulators hide FMA latency; tails fall back to scalar.
ATAC_AVX2 double dot_avx2(const double* a, const double* b, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4), acc1);
  }
  for (; i + 4 <= n; i += 4)
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
  double acc = reduce_add(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

ATAC_AVX2 double sum_avx2(const double* a, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_add_pd(acc0, _mm256_loadu_pd(a + i));
    acc1 = _mm256_add_pd(acc1, _mm256_loadu_pd(a + i + 4));
  }
  for (; i + 4 <= n; i += 4) acc0 = _mm256_add_pd(acc0, _mm256_loadu_pd(a + i));
  double acc = reduce_add(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) acc += a[i];
  return acc;
}

ATAC_AVX2 double weighted_sq_sum_avx2(const double* w, const double* r, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d rv = _mm256_loadu_pd(r + i);
    acc = _mm256_fmadd_pd(_mm256_mul_pd(_mm256_loadu_pd(w + i), rv), rv, acc);
  }
  double total = reduce_add(acc);
  for (; i < n; ++i) total += w[i] * r[i] * r[i];
  return total;
}

ATAC_AVX2 void axpby_avx2(double a, const double* x, double b, double* y, std::size_t n) {
  const __m256d av = _mm256_set1_pd(a);
  const __m256d bv = _mm256_set1_pd(b);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d yv = _mm256_mul_pd(bv, _mm256_loadu_pd(y + i));
    _mm256_storeu_pd(y + i, _mm256_fmadd_pd(av, _mm256_loadu_pd(x + i), yv));
  }
  for (; i < n; ++i) y[i] = a * x[i] + b * y[i];
}

ATAC_AVX2 void gemv_avx2(const double* m, const double* x, double* y, std::size_t rows,
                         std::size_t cols) {
  for (std::size_t r = 0; r < rows; ++r) y[r] = dot_avx2(m + r * cols, x, cols);
}

}  // namespace

const KernelTable* avx2_table() {
  static const KernelTable table{dot_avx2, sum_avx2, weighted_sq_sum_avx2, axpby_avx2,
                                 gemv_avx2};
  return &table;
}

bool cpu_has_avx2() {
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
}

#else

const KernelTable* avx2_table() { return nullptr; }
bool cpu_has_avx2() { return false; }

#endif

}  // namespace atac::kernels
