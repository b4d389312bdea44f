#include "somnus/kernels.hpp"

#if defined(SOMNUS_HAVE_NEON)

#include <arm_neon.h>

// NEON kernels, 2 doubles per vector. Same structure as the AVX2 unit:
// vector main loop, scalar tail.

namespace somnus::kern {
namespace {

double dot_neon(const double* a, const double* b, std::size_t n) {
  float64x2_t acc0 = vdupq_n_f64(0.0);
  float64x2_t acc1 = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    acc0 = vfmaq_f64(acc0, vld1q_f64(a + i), vld1q_f64(b + i));
    acc1 = vfmaq_f64(acc1, vld1q_f64(a + i + 2), vld1q_f64(b + i + 2));
  }
  for (; i + 2 <= n; i += 2) {
    acc0 = vfmaq_f64(acc0, vld1q_f64(a + i), vld1q_f64(b + i));
  }
  double acc = vaddvq_f64(vaddq_f64(acc0, acc1));
  for (; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

double sum_neon(const double* x, std::size_t n) {
  float64x2_t acc = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) acc = vaddq_f64(acc, vld1q_f64(x + i));
  double r = vaddvq_f64(acc);
  for (; i < n; ++i) r += x[i];
  return r;
}

double sumsq_neon(const double* x, std::size_t n) {
  float64x2_t acc = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    const float64x2_t v = vld1q_f64(x + i);
    acc = vfmaq_f64(acc, v, v);
  }
  double r = vaddvq_f64(acc);
  for (; i < n; ++i) r += x[i] * x[i];
  return r;
}

void axpy_neon(double a, const double* x, double* y, std::size_t n) {
  const float64x2_t va = vdupq_n_f64(a);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    vst1q_f64(y + i, vfmaq_f64(vld1q_f64(y + i), va, vld1q_f64(x + i)));
  }
  for (; i < n; ++i) y[i] += a * x[i];
}

void scale_neon(double a, double* x, std::size_t n) {
  const float64x2_t va = vdupq_n_f64(a);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) vst1q_f64(x + i, vmulq_f64(va, vld1q_f64(x + i)));
  for (; i < n; ++i) x[i] *= a;
}

void affine_neon(const double* x, double a, double b, double* y, std::size_t n) {
  const float64x2_t va = vdupq_n_f64(a);
  const float64x2_t vb = vdupq_n_f64(b);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    vst1q_f64(y + i, vfmaq_f64(vb, va, vld1q_f64(x + i)));
  }
  for (; i < n; ++i) y[i] = a * x[i] + b;
}

void mul_neon(const double* a, const double* b, double* y, std::size_t n) {
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    vst1q_f64(y + i, vmulq_f64(vld1q_f64(a + i), vld1q_f64(b + i)));
  }
  for (; i < n; ++i) y[i] = a[i] * b[i];
}

void relu_neon(const double* x, double* y, std::size_t n) {
  const float64x2_t zero = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) vst1q_f64(y + i, vmaxq_f64(zero, vld1q_f64(x + i)));
  for (; i < n; ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
}

void relu_grad_neon(const double* x, const double* dy, double* dx, std::size_t n) {
  const float64x2_t zero = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    const uint64x2_t mask = vcgtq_f64(vld1q_f64(x + i), zero);
    const float64x2_t g = vld1q_f64(dy + i);
    vst1q_f64(dx + i, vreinterpretq_f64_u64(vandq_u64(mask, vreinterpretq_u64_f64(g))));
  }
  for (; i < n; ++i) dx[i] = x[i] > 0.0 ? dy[i] : 0.0;
}

void avgpool2_neon(const double* x, double* y, std::size_t n_out) {
  std::size_t i = 0;
  for (; i + 2 <= n_out; i += 2) {
    const float64x2_t p0 = vld1q_f64(x + 2 * i);      // e0 o0
    const float64x2_t p1 = vld1q_f64(x + 2 * i + 2);  // e1 o1
    const float64x2_t sums = vpaddq_f64(p0, p1);      // e0+o0, e1+o1
    vst1q_f64(y + i, vmulq_n_f64(sums, 0.5));
  }
  for (; i < n_out; ++i) y[i] = 0.5 * (x[2 * i] + x[2 * i + 1]);
}

void avgpool2_grad_neon(const double* dy, double* dx, std::size_t n_out) {
  std::size_t i = 0;
  for (; i + 2 <= n_out; i += 2) {
    const float64x2_t g = vmulq_n_f64(vld1q_f64(dy + i), 0.5);  // g0 g1
    vst1q_f64(dx + 2 * i, vdupq_laneq_f64(g, 0));
    vst1q_f64(dx + 2 * i + 2, vdupq_laneq_f64(g, 1));
  }
  for (; i < n_out; ++i) {
    const double g = 0.5 * dy[i];
    dx[2 * i] = g;
    dx[2 * i + 1] = g;
  }
}

}  // namespace

const Ops& neon_ops() {
  static const Ops ops = {
      "neon",
      dot_neon,
      sum_neon,
      sumsq_neon,
      axpy_neon,
      scale_neon,
      affine_neon,
      mul_neon,
      relu_neon,
      relu_grad_neon,
      avgpool2_neon,
      avgpool2_grad_neon,
  };
  return ops;
}

}  // namespace somnus::kern

#endif  // SOMNUS_HAVE_NEON
