#include <arm_neon.h>

#include <algorithm>
#include <cmath>

#include "enr/simd/kernels.hpp"

namespace enr::simd {

namespace {

double dot_neon(const double* a, const double* b, std::size_t n) {
  float64x2_t acc0 = vdupq_n_f64(0.0);
  float64x2_t acc1 = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    acc0 = vfmaq_f64(acc0, vld1q_f64(a + i), vld1q_f64(b + i));
    acc1 = vfmaq_f64(acc1, vld1q_f64(a + i + 2), vld1q_f64(b + i + 2));
  }
  double acc = vaddvq_f64(vaddq_f64(acc0, acc1));
  for (; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

double sum_squares_neon(const double* x, std::size_t n) { return dot_neon(x, x, n); }

double sum_abs_neon(const double* x, std::size_t n) {
  float64x2_t acc = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) acc = vaddq_f64(acc, vabsq_f64(vld1q_f64(x + i)));
  double out = vaddvq_f64(acc);
  for (; i < n; ++i) out += std::fabs(x[i]);
  return out;
}

void axpy_neon(double alpha, const double* x, double* y, std::size_t n) {
  const float64x2_t a = vdupq_n_f64(alpha);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    vst1q_f64(y + i, vaddq_f64(vld1q_f64(y + i), vmulq_f64(a, vld1q_f64(x + i))));
  }
  for (; i < n; ++i) y[i] += alpha * x[i];
}

void scale_neon(double alpha, double* x, std::size_t n) {
  const float64x2_t a = vdupq_n_f64(alpha);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) vst1q_f64(x + i, vmulq_f64(a, vld1q_f64(x + i)));
  for (; i < n; ++i) x[i] *= alpha;
}

void hadamard_neon(const double* a, const double* b, double* out, std::size_t n) {
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) vst1q_f64(out + i, vmulq_f64(vld1q_f64(a + i), vld1q_f64(b + i)));
  for (; i < n; ++i) out[i] = a[i] * b[i];
}

void soft_threshold_neon(const double* x, double* out, std::size_t n, double threshold) {
  const float64x2_t t = vdupq_n_f64(threshold);
  const float64x2_t zero = vdupq_n_f64(0.0);
  const uint64x2_t sign = vdupq_n_u64(0x8000000000000000ULL);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    float64x2_t v = vld1q_f64(x + i);
    float64x2_t mag = vmaxq_f64(vsubq_f64(vabsq_f64(v), t), zero);
    uint64x2_t bits = vorrq_u64(vreinterpretq_u64_f64(mag),
                                vandq_u64(vreinterpretq_u64_f64(v), sign));
    vst1q_f64(out + i, vreinterpretq_f64_u64(bits));
  }
  for (; i < n; ++i) out[i] = std::copysign(std::max(std::fabs(x[i]) - threshold, 0.0), x[i]);
}

constexpr KernelTable kNeon{
    Isa::Neon,  dot_neon,   sum_squares_neon, sum_abs_neon,
    axpy_neon,  scale_neon, hadamard_neon,    soft_threshold_neon,
};

}  // namespace

const KernelTable& neon_table() { return kNeon; }

}  // namespace enr::simd
