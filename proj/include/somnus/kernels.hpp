#pragma once

#include <cstddef>
#include <string>
#include <vector>

// Low-level numeric kernels used by the hot loops (convolution, batch norm,
// FIR filtering, NLMS, normalization). Each primitive has a scalar reference
// implementation plus SIMD variants (AVX2 on x86, NEON on aarch64) selected
// once at runtime. The SOMNUS_KERNELS environment variable ("scalar", "avx2",
// "neon", "auto") overrides the automatic pick; set_backend() does the same
// programmatically, which the equivalence tests use.

namespace somnus::kern {

struct Ops {
  const char* name;
  // reductions
  double (*dot)(const double* a, const double* b, std::size_t n);
  double (*sum)(const double* x, std::size_t n);
  double (*sumsq)(const double* x, std::size_t n);
  // elementwise
  void (*axpy)(double a, const double* x, double* y, std::size_t n);   // y += a*x
  void (*scale)(double a, double* x, std::size_t n);                   // x *= a
  void (*affine)(const double* x, double a, double b, double* y, std::size_t n);  // y = a*x + b
  void (*mul)(const double* a, const double* b, double* y, std::size_t n);        // y = a.*b
  void (*relu)(const double* x, double* y, std::size_t n);             // y = max(x, 0)
  void (*relu_grad)(const double* x, const double* dy, double* dx, std::size_t n);  // dx = x>0 ? dy : 0
  // pooling, window 2 stride 2 along a contiguous row
  void (*avgpool2)(const double* x, double* y, std::size_t n_out);       // y[i] = (x[2i]+x[2i+1])/2
  void (*avgpool2_grad)(const double* dy, double* dx, std::size_t n_out);  // dx[2i] = dx[2i+1] = dy[i]/2
};

const Ops& scalar_ops();
#if defined(SOMNUS_HAVE_AVX2)
const Ops& avx2_ops();
#endif
#if defined(SOMNUS_HAVE_NEON)
const Ops& neon_ops();
#endif

// Active backend. Resolved on first use: SOMNUS_KERNELS if set, otherwise the
// widest variant this CPU supports. Stable for the life of the process unless
// set_backend() is called.
const Ops& active();
std::string backend_name();
bool set_backend(const std::string& name);  // false if unknown/unsupported
std::vector<std::string> available_backends();

// Convenience forwarders through the active backend.
inline double dot(const double* a, const double* b, std::size_t n) { return active().dot(a, b, n); }
inline double sum(const double* x, std::size_t n) { return active().sum(x, n); }
inline double sumsq(const double* x, std::size_t n) { return active().sumsq(x, n); }
inline void axpy(double a, const double* x, double* y, std::size_t n) { active().axpy(a, x, y, n); }
inline void scale(double a, double* x, std::size_t n) { active().scale(a, x, n); }
inline void affine(const double* x, double a, double b, double* y, std::size_t n) { active().affine(x, a, b, y, n); }
inline void mul(const double* a, const double* b, double* y, std::size_t n) { active().mul(a, b, y, n); }
inline void relu(const double* x, double* y, std::size_t n) { active().relu(x, y, n); }
inline void relu_grad(const double* x, const double* dy, double* dx, std::size_t n) { active().relu_grad(x, dy, dx, n); }
inline void avgpool2(const double* x, double* y, std::size_t n_out) { active().avgpool2(x, y, n_out); }
inline void avgpool2_grad(const double* dy, double* dx, std::size_t n_out) { active().avgpool2_grad(dy, dx, n_out); }

}  // namespace somnus::kern
