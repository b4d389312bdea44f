#include <doctest.h>

#include <cmath>
#include <vector>

#include "somnus/kernels.hpp"
#include "somnus/rng.hpp"

using namespace somnus;

namespace {

// Independent naive references; deliberately not the library's scalar path.
double ref_dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

std::vector<double> rand_vec(Rng& rng, std::size_t n, double lo = -2.0, double hi = 2.0) {
  std::vector<double> v(n);
  for (auto& x : v) x = rng.uniform(lo, hi);
  return v;
}

bool close(double a, double b, double tol) {
  const double scale = std::max({1.0, std::fabs(a), std::fabs(b)});
  return std::fabs(a - b) <= tol * scale;
}

struct BackendGuard {
  ~BackendGuard() { kern::set_backend("auto"); }
};

}  // namespace

TEST_SUITE("kernels") {

TEST_CASE("scalar backend always available and selectable") {
  BackendGuard guard;
  const auto names = kern::available_backends();
  REQUIRE(!names.empty());
  bool has_scalar = false;
  for (const auto& n : names) has_scalar |= (n == "scalar");
  CHECK(has_scalar);
  CHECK(kern::set_backend("scalar"));
  CHECK(kern::backend_name() == "scalar");
  CHECK_FALSE(kern::set_backend("no-such-backend"));
  CHECK(kern::backend_name() == "scalar");  // failed switch leaves state alone
  CHECK(kern::set_backend("auto"));
}

TEST_CASE("reductions match a naive reference on every backend") {
  BackendGuard guard;
  Rng rng(0x6b65726e);
  // Sizes straddle the SIMD widths and their remainders.
  const std::size_t sizes[] = {0, 1, 2, 3, 4, 5, 7, 8, 9, 15, 16, 17, 31, 32, 33, 64, 67, 129};
  for (const auto& name : kern::available_backends()) {
    REQUIRE(kern::set_backend(name));
    for (std::size_t n : sizes) {
      const auto a = rand_vec(rng, n);
      const auto b = rand_vec(rng, n);
      CAPTURE(name);
      CAPTURE(n);
      CHECK(close(kern::dot(a.data(), b.data(), n), ref_dot(a, b), 1e-12));
      double s = 0.0, sq = 0.0;
      for (double x : a) {
        s += x;
        sq += x * x;
      }
      CHECK(close(kern::sum(a.data(), n), s, 1e-12));
      CHECK(close(kern::sumsq(a.data(), n), sq, 1e-12));
    }
  }
}

TEST_CASE("elementwise ops match exactly on every backend") {
  BackendGuard guard;
  Rng rng(0x6b32);
  for (const auto& name : kern::available_backends()) {
    REQUIRE(kern::set_backend(name));
    for (std::size_t n : {1u, 5u, 8u, 13u, 32u, 57u}) {
      const auto x = rand_vec(rng, n);
      const auto d = rand_vec(rng, n);
      const double alpha = rng.uniform(-1.5, 1.5);
      const double beta = rng.uniform(-1.5, 1.5);
      CAPTURE(name);
      CAPTURE(n);

      auto y = rand_vec(rng, n);
      auto y_ref = y;
      kern::axpy(alpha, x.data(), y.data(), n);
      for (std::size_t i = 0; i < n; ++i) {
        // FMA backends fuse a*x+y into one rounding; allow ulp-scale wiggle.
        y_ref[i] += alpha * x[i];
        CHECK(close(y[i], y_ref[i], 1e-15));
      }

      auto s = x;
      kern::scale(alpha, s.data(), n);
      for (std::size_t i = 0; i < n; ++i) CHECK(s[i] == x[i] * alpha);

      std::vector<double> af(n);
      kern::affine(x.data(), alpha, beta, af.data(), n);
      for (std::size_t i = 0; i < n; ++i) {
        // FMA may contract a*x+b; allow one ulp-scale wiggle.
        CHECK(close(af[i], alpha * x[i] + beta, 1e-15));
      }

      std::vector<double> m(n);
      kern::mul(x.data(), d.data(), m.data(), n);
      for (std::size_t i = 0; i < n; ++i) CHECK(m[i] == x[i] * d[i]);

      std::vector<double> r(n);
      kern::relu(x.data(), r.data(), n);
      for (std::size_t i = 0; i < n; ++i) CHECK(r[i] == (x[i] > 0.0 ? x[i] : 0.0));

      std::vector<double> g(n);
      kern::relu_grad(x.data(), d.data(), g.data(), n);
      for (std::size_t i = 0; i < n; ++i) CHECK(g[i] == (x[i] > 0.0 ? d[i] : 0.0));
    }
  }
}

TEST_CASE("average pooling halves and its gradient doubles on every backend") {
  BackendGuard guard;
  Rng rng(0x706f6f6c);
  for (const auto& name : kern::available_backends()) {
    REQUIRE(kern::set_backend(name));
    for (std::size_t n_out : {1u, 2u, 3u, 4u, 5u, 8u, 11u, 16u, 21u}) {
      const auto x = rand_vec(rng, 2 * n_out);
      std::vector<double> y(n_out);
      kern::avgpool2(x.data(), y.data(), n_out);
      for (std::size_t i = 0; i < n_out; ++i) {
        CHECK(close(y[i], (x[2 * i] + x[2 * i + 1]) / 2.0, 1e-15));
      }
      std::vector<double> dx(2 * n_out);
      kern::avgpool2_grad(y.data(), dx.data(), n_out);
      for (std::size_t i = 0; i < n_out; ++i) {
        CHECK(dx[2 * i] == y[i] / 2.0);
        CHECK(dx[2 * i + 1] == y[i] / 2.0);
      }
    }
  }
}

}  // TEST_SUITE
