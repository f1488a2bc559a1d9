#pragma once

#include <cstddef>
#include <string_view>

namespace gmrt::simd {

// Inner-loop kernels used by the posterior and the integrator. Every table
// computes the same quantities; vector variants may differ from the scalar
// reference by floating-point reassociation only.
struct KernelTable {
  std::string_view name;

  // sum_i x[i] * y[i]
  double (*dot)(const double* x, const double* y, std::size_t n);
  // y += a * x
  void (*axpy)(double a, const double* x, double* y, std::size_t n);
  // y += a * (m .* x)
  void (*axpy_scaled)(double a, const double* m, const double* x, double* y, std::size_t n);
  // sum_i m[i] * x[i]^2
  double (*weighted_sumsq)(const double* m, const double* x, std::size_t n);
  // y = A x, A row-major rows x cols
  void (*gemv)(const double* a, std::size_t rows, std::size_t cols, const double* x, double* y);
  // y = A^T x, A row-major rows x cols
  void (*gemv_t)(const double* a, std::size_t rows, std::size_t cols, const double* x, double* y);
  // y[i] = sum_k w[k] * x[offset + i - k], terms with negative x index dropped
  void (*causal_conv)(const double* w, std::size_t nw, const double* x, std::size_t offset,
                      double* y, std::size_t ny);
  // adjoint of causal_conv: gx[j] = sum_k w[k] * gy[j - offset + k] over valid output indices
  void (*causal_conv_adjoint)(const double* w, std::size_t nw, const double* gy, std::size_t ny,
                              std::size_t offset, double* gx, std::size_t nx);
};

const KernelTable& scalar_kernels();

/// Null when the build target or the running CPU lacks AVX2+FMA.
const KernelTable* avx2_kernels();

/// Table selected at first use: AVX2 when available, unless the environment
/// variable GMRT_SIMD=scalar forces the reference kernels.
const KernelTable& kernels();

}  // namespace gmrt::simd
