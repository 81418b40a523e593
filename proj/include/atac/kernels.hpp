#pragma once

// Dense double-precision primitives used by the exact solvers and the
// two-timescale trainer. Each primitive has a scalar reference kernel and an
// AVX2/FMA kernel; the active backend is chosen once at startup from CPUID and
// can be overridden with ATAC_SIMD=scalar or set_backend().

#include <cstddef>
#include <span>
#include <string_view>

namespace atac::kernels {

enum class Backend { Scalar, Avx2 };

/// Function table for one backend. All spans of a call must have equal size.
struct KernelTable {
  double (*dot)(const double* a, const double* b, std::size_t n);
  double (*sum)(const double* a, std::size_t n);
  // sum_i w[i] * r[i]^2
  double (*weighted_sq_sum)(const double* w, const double* r, std::size_t n);
  // y <- a*x + b*y
  void (*axpby)(double a, const double* x, double b, double* y, std::size_t n);
  // y <- M x, M row-major rows x cols
  void (*gemv)(const double* m, const double* x, double* y, std::size_t rows,
               std::size_t cols);
};

const KernelTable& scalar_table();
/// Null when the binary was built without AVX2 support.
const KernelTable* avx2_table();

bool cpu_has_avx2();
Backend active_backend();
/// Throws ArgumentError if the backend is unavailable on this CPU.
void set_backend(Backend backend);
std::string_view backend_name(Backend backend);

double dot(std::span<const double> a, std::span<const double> b);
double sum(std::span<const double> a);
double weighted_sq_sum(std::span<const double> w, std::span<const double> r);
void axpby(double a, std::span<const double> x, double b, std::span<double> y);
void gemv(std::span<const double> m, std::span<const double> x, std::span<double> y,
          std::size_t rows, std::size_t cols);

}  // namespace atac::kernels
