#include "somnus/kernels.hpp"

#if defined(SOMNUS_HAVE_AVX2)

#include <immintrin.h>

// AVX2 + FMA kernels, 4 doubles per vector. Main loops process full vectors,
// scalar tails pick up the remainder. Reductions use multiple accumulators,
// so results can differ from the scalar reference by reassociation rounding;
// the equivalence tests bound that difference.

namespace somnus::kern {
namespace {

inline double hsum(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_add_pd(lo, hi);
  __m128d swapped = _mm_unpackhi_pd(lo, lo);
  return _mm_cvtsd_f64(_mm_add_sd(lo, swapped));
}

double dot_avx2(const double* a, const double* b, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4), acc1);
  }
  for (; i + 4 <= n; i += 4) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
  }
  double acc = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

double sum_avx2(const double* x, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_add_pd(acc0, _mm256_loadu_pd(x + i));
    acc1 = _mm256_add_pd(acc1, _mm256_loadu_pd(x + i + 4));
  }
  for (; i + 4 <= n; i += 4) acc0 = _mm256_add_pd(acc0, _mm256_loadu_pd(x + i));
  double acc = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) acc += x[i];
  return acc;
}

double sumsq_avx2(const double* x, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256d v0 = _mm256_loadu_pd(x + i);
    const __m256d v1 = _mm256_loadu_pd(x + i + 4);
    acc0 = _mm256_fmadd_pd(v0, v0, acc0);
    acc1 = _mm256_fmadd_pd(v1, v1, acc1);
  }
  for (; i + 4 <= n; i += 4) {
    const __m256d v = _mm256_loadu_pd(x + i);
    acc0 = _mm256_fmadd_pd(v, v, acc0);
  }
  double acc = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) acc += x[i] * x[i];
  return acc;
}

void axpy_avx2(double a, const double* x, double* y, std::size_t n) {
  const __m256d va = _mm256_set1_pd(a);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d vy = _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i));
    _mm256_storeu_pd(y + i, vy);
  }
  for (; i < n; ++i) y[i] += a * x[i];
}

void scale_avx2(double a, double* x, std::size_t n) {
  const __m256d va = _mm256_set1_pd(a);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(x + i, _mm256_mul_pd(va, _mm256_loadu_pd(x + i)));
  }
  for (; i < n; ++i) x[i] *= a;
}

void affine_avx2(const double* x, double a, double b, double* y, std::size_t n) {
  const __m256d va = _mm256_set1_pd(a);
  const __m256d vb = _mm256_set1_pd(b);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(y + i, _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), vb));
  }
  for (; i < n; ++i) y[i] = a * x[i] + b;
}

void mul_avx2(const double* a, const double* b, double* y, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(y + i, _mm256_mul_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
  }
  for (; i < n; ++i) y[i] = a[i] * b[i];
}

void relu_avx2(const double* x, double* y, std::size_t n) {
  const __m256d zero = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(y + i, _mm256_max_pd(zero, _mm256_loadu_pd(x + i)));
  }
  for (; i < n; ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
}

void relu_grad_avx2(const double* x, const double* dy, double* dx, std::size_t n) {
  const __m256d zero = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d mask = _mm256_cmp_pd(_mm256_loadu_pd(x + i), zero, _CMP_GT_OQ);
    _mm256_storeu_pd(dx + i, _mm256_and_pd(mask, _mm256_loadu_pd(dy + i)));
  }
  for (; i < n; ++i) dx[i] = x[i] > 0.0 ? dy[i] : 0.0;
}

void avgpool2_avx2(const double* x, double* y, std::size_t n_out) {
  const __m256d half = _mm256_set1_pd(0.5);
  std::size_t i = 0;
  for (; i + 4 <= n_out; i += 4) {
    // x[2i..2i+7] holds four adjacent (even, odd) pairs.
    const __m256d lo = _mm256_loadu_pd(x + 2 * i);       // p0e p0o p1e p1o
    const __m256d hi = _mm256_loadu_pd(x + 2 * i + 4);   // p2e p2o p3e p3o
    const __m256d evens = _mm256_unpacklo_pd(lo, hi);    // p0e p2e p1e p3e
    const __m256d odds = _mm256_unpackhi_pd(lo, hi);     // p0o p2o p1o p3o
    __m256d avg = _mm256_mul_pd(half, _mm256_add_pd(evens, odds));  // p0 p2 p1 p3
    avg = _mm256_permute4x64_pd(avg, _MM_SHUFFLE(3, 1, 2, 0));      // p0 p1 p2 p3
    _mm256_storeu_pd(y + i, avg);
  }
  for (; i < n_out; ++i) y[i] = 0.5 * (x[2 * i] + x[2 * i + 1]);
}

void avgpool2_grad_avx2(const double* dy, double* dx, std::size_t n_out) {
  const __m256d half = _mm256_set1_pd(0.5);
  std::size_t i = 0;
  for (; i + 4 <= n_out; i += 4) {
    const __m256d g = _mm256_mul_pd(half, _mm256_loadu_pd(dy + i));  // g0 g1 g2 g3
    const __m256d swapped = _mm256_permute4x64_pd(g, _MM_SHUFFLE(3, 1, 2, 0));  // g0 g2 g1 g3
    _mm256_storeu_pd(dx + 2 * i, _mm256_unpacklo_pd(swapped, swapped));      // g0 g0 g1 g1
    _mm256_storeu_pd(dx + 2 * i + 4, _mm256_unpackhi_pd(swapped, swapped));  // g2 g2 g3 g3
  }
  for (; i < n_out; ++i) {
    const double g = 0.5 * dy[i];
    dx[2 * i] = g;
    dx[2 * i + 1] = g;
  }
}

}  // namespace

const Ops& avx2_ops() {
  static const Ops ops = {
      "avx2",
      dot_avx2,
      sum_avx2,
      sumsq_avx2,
      axpy_avx2,
      scale_avx2,
      affine_avx2,
      mul_avx2,
      relu_avx2,
      relu_grad_avx2,
      avgpool2_avx2,
      avgpool2_grad_avx2,
  };
  return ops;
}

}  // namespace somnus::kern

#endif  // SOMNUS_HAVE_AVX2
