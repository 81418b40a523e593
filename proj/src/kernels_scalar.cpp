#include "atac/kernels.hpp"

namespace atac::kernels {
namespace {

double dot_scalar(const double* a, const double* b, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

double sum_scalar(const double* a, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += a[i];
  return acc;
}

double weighted_sq_sum_scalar(const double* w, const double* r, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += w[i] * r[i] * r[i];
  return acc;
}

void axpby_scalar(double a, const double* x, double b, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] = a * x[i] + b * y[i];
}

void gemv_scalar(const double* m, const double* x, double* y, std::size_t rows,
                 std::size_t cols) {
  for (std::size_t r = 0; r < rows; ++r) y[r] = dot_scalar(m + r * cols, x, cols);
}

}  // namespace

const KernelTable& scalar_table() {
  static const KernelTable table{dot_scalar, sum_scalar, weighted_sq_sum_scalar,
                                 axpby_scalar, gemv_scalar};
  return table;
}

}  // namespace atac::kernels
