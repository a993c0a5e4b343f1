#pragma once

// Data-parallel inner loops shared by the solvers.
//
// Every kernel has a scalar reference implementation and, where the target
// allows it, an AVX2/FMA (x86-64) or NEON (aarch64) variant. The variant is
// picked once at startup from the CPU features; ENR_SIMD=scalar|avx2|neon
// overrides the choice. Elementwise kernels are bit-identical across
// variants; reductions may differ in the last bits because lanes are summed
// in a different order.

#include <cstddef>
#include <span>
#include <string_view>

namespace enr::simd {

enum class Isa { Scalar, Avx2, Neon };

std::string_view isa_name(Isa isa);

struct KernelTable {
  Isa isa;
  double (*dot)(const double* a, const double* b, std::size_t n);
  double (*sum_squares)(const double* x, std::size_t n);
  double (*sum_abs)(const double* x, std::size_t n);
  // y[i] += alpha * x[i]
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
  // x[i] *= alpha
  void (*scale)(double alpha, double* x, std::size_t n);
  // out[i] = a[i] * b[i]
  void (*hadamard)(const double* a, const double* b, double* out, std::size_t n);
  // out[i] = sign(x[i]) * max(|x[i]| - threshold, 0)
  void (*soft_threshold)(const double* x, double* out, std::size_t n, double threshold);
};

const KernelTable& scalar_kernels();

// nullptr when the variant was not compiled in or the CPU lacks it.
const KernelTable* avx2_kernels();
const KernelTable* neon_kernels();

// Runtime-selected table. The first call fixes the selection.
const KernelTable& active();

// Force a specific table (tests, benchmarks). Returns false if unavailable.
bool select(Isa isa);

inline double dot(std::span<const double> a, std::span<const double> b) {
  return active().dot(a.data(), b.data(), a.size());
}

inline double sum_squares(std::span<const double> x) {
  return active().sum_squares(x.data(), x.size());
}

inline double sum_abs(std::span<const double> x) { return active().sum_abs(x.data(), x.size()); }

inline void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  active().axpy(alpha, x.data(), y.data(), x.size());
}

inline void scale(double alpha, std::span<double> x) { active().scale(alpha, x.data(), x.size()); }

inline void hadamard(std::span<const double> a, std::span<const double> b, std::span<double> out) {
  active().hadamard(a.data(), b.data(), out.data(), a.size());
}

inline void soft_threshold(std::span<const double> x, std::span<double> out, double threshold) {
  active().soft_threshold(x.data(), out.data(), x.size(), threshold);
}

}  // namespace enr::simd
