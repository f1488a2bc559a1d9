#include <cmath>
#include <random>
#include <vector>

#include "doctest.h"
#include "gmrt/simd.hpp"
#include "oracles.hpp"

using namespace gmrt::simd;

namespace {

std::vector<double> randn(std::mt19937_64& rng, std::size_t n) {
  std::normal_distribution<double> d;
  std::vector<double> v(n);
  for (auto& x : v) x = d(rng);
  return v;
}

// Vector kernels reassociate sums, so compare against a scale-aware bound.
void check_close(const std::vector<double>& a, const std::vector<double>& b) {
  REQUIRE(a.size() == b.size());
  CHECK(oracle::max_rel_error(a, b) < 1e-12);
}

}  // namespace

TEST_CASE("dispatch selects a usable table") {
  const auto& k = kernels();
  CHECK((k.name == "scalar" || k.name == "avx2"));
  if (avx2_kernels() == nullptr) MESSAGE("AVX2 kernels unavailable on this CPU; equivalence checks skipped");
}

TEST_CASE("scalar kernels against plain loops") {
  const auto& s = scalar_kernels();
  std::mt19937_64 rng(1);
  const auto x = randn(rng, 13), y = randn(rng, 13);
  double d = 0.0;
  for (std::size_t i = 0; i < 13; ++i) d += x[i] * y[i];
  CHECK(s.dot(x.data(), y.data(), 13) == doctest::Approx(d).epsilon(1e-14));

  // y[i] = sum_k w[k] x[offset + i - k]
  const std::vector<double> w{0.5, 0.3, 0.2};
  const std::vector<double> xs{1, 2, 3, 4, 5};
  std::vector<double> out(3);
  s.causal_conv(w.data(), 3, xs.data(), 2, out.data(), 3);
  CHECK(out[0] == doctest::Approx(0.5 * 3 + 0.3 * 2 + 0.2 * 1));
  CHECK(out[2] == doctest::Approx(0.5 * 5 + 0.3 * 4 + 0.2 * 3));
  s.causal_conv(w.data(), 3, xs.data(), 0, out.data(), 3);
  CHECK(out[0] == doctest::Approx(0.5 * 1));
  CHECK(out[1] == doctest::Approx(0.5 * 2 + 0.3 * 1));
}

TEST_CASE("causal_conv_adjoint is the transpose of causal_conv") {
  const auto& s = scalar_kernels();
  std::mt19937_64 rng(2);
  for (std::size_t nw : {1u, 3u, 6u}) {
    for (std::size_t offset : {0u, 2u, 5u}) {
      const std::size_t nx = 20, ny = nx - offset;
      const auto w = randn(rng, nw), x = randn(rng, nx), gy = randn(rng, ny);
      std::vector<double> y(ny), gx(nx, 0.0);
      s.causal_conv(w.data(), nw, x.data(), offset, y.data(), ny);
      s.causal_conv_adjoint(w.data(), nw, gy.data(), ny, offset, gx.data(), nx);
      double lhs = 0.0, rhs = 0.0;
      for (std::size_t i = 0; i < ny; ++i) lhs += gy[i] * y[i];
      for (std::size_t j = 0; j < nx; ++j) rhs += gx[j] * x[j];
      CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
    }
  }
}

TEST_CASE("AVX2 kernels match the scalar reference") {
  const KernelTable* v = avx2_kernels();
  if (v == nullptr) return;
  const auto& s = scalar_kernels();
  std::mt19937_64 rng(3);
  // sizes straddle the 4- and 8-wide loop boundaries
  for (std::size_t n : {0u, 1u, 3u, 4u, 5u, 7u, 8u, 9u, 15u, 16u, 17u, 33u, 100u, 257u}) {
    INFO("n = " << n);
    const auto x = randn(rng, n), y = randn(rng, n), m = randn(rng, n);
    check_close({v->dot(x.data(), y.data(), n)}, {s.dot(x.data(), y.data(), n)});
    check_close({v->weighted_sumsq(m.data(), x.data(), n)}, {s.weighted_sumsq(m.data(), x.data(), n)});

    auto ya = y, yb = y;
    v->axpy(0.7, x.data(), ya.data(), n);
    s.axpy(0.7, x.data(), yb.data(), n);
    check_close(ya, yb);
    ya = y;
    yb = y;
    v->axpy_scaled(-1.3, m.data(), x.data(), ya.data(), n);
    s.axpy_scaled(-1.3, m.data(), x.data(), yb.data(), n);
    check_close(ya, yb);

    for (std::size_t cols : {1u, 5u, 22u}) {
      const auto a = randn(rng, n * cols);
      const auto xc = randn(rng, cols), xr = randn(rng, n);
      std::vector<double> oa(n), ob(n), ta(cols), tb(cols);
      v->gemv(a.data(), n, cols, xc.data(), oa.data());
      s.gemv(a.data(), n, cols, xc.data(), ob.data());
      check_close(oa, ob);
      v->gemv_t(a.data(), n, cols, xr.data(), ta.data());
      s.gemv_t(a.data(), n, cols, xr.data(), tb.data());
      check_close(ta, tb);
    }

    for (std::size_t nw : {1u, 4u, 9u}) {
      if (n == 0) continue;
      const auto w = randn(rng, nw);
      const std::size_t offset = n / 3;
      const std::size_t ny = n - offset;
      std::vector<double> ca(ny), cb(ny);
      v->causal_conv(w.data(), nw, x.data(), offset, ca.data(), ny);
      s.causal_conv(w.data(), nw, x.data(), offset, cb.data(), ny);
      check_close(ca, cb);
      const auto gy = randn(rng, ny);
      std::vector<double> ga(n, 0.5), gb(n, 0.5);
      v->causal_conv_adjoint(w.data(), nw, gy.data(), ny, offset, ga.data(), n);
      s.causal_conv_adjoint(w.data(), nw, gy.data(), ny, offset, gb.data(), n);
      check_close(ga, gb);
    }
  }
}
