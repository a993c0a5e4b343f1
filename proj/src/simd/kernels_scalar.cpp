#include "enr/simd/kernels.hpp"

#include <algorithm>
#include <cmath>

namespace enr::simd {
namespace {

double dot_scalar(const double* a, const double* b, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

double sum_squares_scalar(const double* x, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += x[i] * x[i];
  return acc;
}

double sum_abs_scalar(const double* x, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += std::fabs(x[i]);
  return acc;
}

void axpy_scalar(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void scale_scalar(double alpha, double* x, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) x[i] *= alpha;
}

void hadamard_scalar(const double* a, const double* b, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] * b[i];
}

void soft_threshold_scalar(const double* x, double* out, std::size_t n, double threshold) {
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = std::copysign(std::max(std::fabs(x[i]) - threshold, 0.0), x[i]);
  }
}

constexpr KernelTable kScalar{
    Isa::Scalar,   dot_scalar,      sum_squares_scalar,   sum_abs_scalar,
    axpy_scalar,   scale_scalar,    hadamard_scalar,      soft_threshold_scalar,
};

}  // namespace

const KernelTable& scalar_kernels() { return kScalar; }

}  // namespace enr::simd
