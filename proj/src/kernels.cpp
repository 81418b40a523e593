#include "atac/kernels.hpp"

#include <cstdlib>
#include <string>

#include "atac/errors.hpp"

namespace atac::kernels {
namespace {

Backend pick_default_backend() {
  if (const char* env = std::getenv("ATAC_SIMD"); env && std::string(env) == "scalar")
    return Backend::Scalar;
  return (avx2_table() && cpu_has_avx2()) ? Backend::Avx2 : Backend::Scalar;
}

struct Dispatch {
  Backend backend = pick_default_backend();
  const KernelTable* table =
      backend == Backend::Avx2 ? avx2_table() : &scalar_table();
};

Dispatch& dispatch() {
  static Dispatch d;
  return d;
}

void require_same(std::size_t a, std::size_t b) {
  if (a != b) throw ArgumentError("kernel operands differ in length");
}

}  // namespace

Backend active_backend() { return dispatch().backend; }

void set_backend(Backend backend) {
  if (backend == Backend::Avx2) {
    if (!avx2_table() || !cpu_has_avx2())
      throw ArgumentError("AVX2 backend unavailable on this CPU");
    dispatch().table = avx2_table();
  } else {
    dispatch().table = &scalar_table();
  }
  dispatch().backend = backend;
}

std::string_view backend_name(Backend backend) {
  return backend == Backend::Avx2 ? "avx2" : "scalar";
}

double dot(std::span<const double> a, std::span<const double> b) {
  require_same(a.size(), b.size());
  return dispatch().table->dot(a.data(), b.data(), a.size());
}

double sum(std::span<const double> a) { return dispatch().table->sum(a.data(), a.size()); }

double weighted_sq_sum(std::span<const double> w, std::span<const double> r) {
  require_same(w.size(), r.size());
  return dispatch().table->weighted_sq_sum(w.data(), r.data(), w.size());
}

void axpby(double a, std::span<const double> x, double b, std::span<double> y) {
  require_same(x.size(), y.size());
  dispatch().table->axpby(a, x.data(), b, y.data(), x.size());
}

void gemv(std::span<const double> m, std::span<const double> x, std::span<double> y,
          std::size_t rows, std::size_t cols) {
  if (m.size() != rows * cols || x.size() != cols || y.size() != rows)
    throw ArgumentError("gemv: shape mismatch");
  dispatch().table->gemv(m.data(), x.data(), y.data(), rows, cols);
}

}  // namespace atac::kernels
