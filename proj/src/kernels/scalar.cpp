#include "somnus/kernels.hpp"

// Scalar reference kernels. These define the semantics; the SIMD variants
// must agree with them up to floating-point reassociation.

namespace somnus::kern {
namespace {

double dot_scalar(const double* a, const double* b, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

double sum_scalar(const double* x, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += x[i];
  return acc;
}

double sumsq_scalar(const double* x, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += x[i] * x[i];
  return acc;
}

void axpy_scalar(double a, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

void scale_scalar(double a, double* x, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) x[i] *= a;
}

void affine_scalar(const double* x, double a, double b, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] = a * x[i] + b;
}

void mul_scalar(const double* a, const double* b, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] = a[i] * b[i];
}

void relu_scalar(const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
}

void relu_grad_scalar(const double* x, const double* dy, double* dx, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) dx[i] = x[i] > 0.0 ? dy[i] : 0.0;
}

void avgpool2_scalar(const double* x, double* y, std::size_t n_out) {
  for (std::size_t i = 0; i < n_out; ++i) y[i] = 0.5 * (x[2 * i] + x[2 * i + 1]);
}

void avgpool2_grad_scalar(const double* dy, double* dx, std::size_t n_out) {
  for (std::size_t i = 0; i < n_out; ++i) {
    const double g = 0.5 * dy[i];
    dx[2 * i] = g;
    dx[2 * i + 1] = g;
  }
}

}  // namespace

const Ops& scalar_ops() {
  static const Ops ops = {
      "scalar",
      dot_scalar,
      sum_scalar,
      sumsq_scalar,
      axpy_scalar,
      scale_scalar,
      affine_scalar,
      mul_scalar,
      relu_scalar,
      relu_grad_scalar,
      avgpool2_scalar,
      avgpool2_grad_scalar,
  };
  return ops;
}

}  // namespace somnus::kern
