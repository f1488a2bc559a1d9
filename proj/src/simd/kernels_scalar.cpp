#include "gmrt/simd.hpp"

namespace gmrt::simd {
namespace {

double dot(const double* x, const double* y, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += x[i] * y[i];
  return s;
}

void axpy(double a, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

void axpy_scaled(double a, const double* m, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += a * (m[i] * x[i]);
}

double weighted_sumsq(const double* m, const double* x, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += m[i] * x[i] * x[i];
  return s;
}

void gemv(const double* a, std::size_t rows, std::size_t cols, const double* x, double* y) {
  for (std::size_t r = 0; r < rows; ++r) y[r] = dot(a + r * cols, x, cols);
}

void gemv_t(const double* a, std::size_t rows, std::size_t cols, const double* x, double* y) {
  for (std::size_t c = 0; c < cols; ++c) y[c] = 0.0;
  for (std::size_t r = 0; r < rows; ++r) axpy(x[r], a + r * cols, y, cols);
}

void causal_conv(const double* w, std::size_t nw, const double* x, std::size_t offset, double* y,
                 std::size_t ny) {
  for (std::size_t i = 0; i < ny; ++i) {
    const std::size_t pos = offset + i;
    const std::size_t kmax = pos + 1 < nw ? pos + 1 : nw;
    double s = 0.0;
    for (std::size_t k = 0; k < kmax; ++k) s += w[k] * x[pos - k];
    y[i] = s;
  }
}

void causal_conv_adjoint(const double* w, std::size_t nw, const double* gy, std::size_t ny,
                         std::size_t offset, double* gx, std::size_t nx) {
  for (std::size_t j = 0; j < nx; ++j) {
    double s = 0.0;
    for (std::size_t k = 0; k < nw; ++k) {
      // output index i = j - offset + k
      if (j + k < offset) continue;
      const std::size_t i = j + k - offset;
      if (i >= ny) break;
      s += w[k] * gy[i];
    }
    gx[j] = s;
  }
}

}  // namespace

const KernelTable& scalar_kernels() {
  static const KernelTable table{"scalar", dot,  axpy,        axpy_scaled,        weighted_sumsq,
                                 gemv,     gemv_t, causal_conv, causal_conv_adjoint};
  return table;
}

}  // namespace gmrt::simd
