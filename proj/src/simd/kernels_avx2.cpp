#include "gmrt/simd.hpp"

#if defined(__x86_64__) || defined(_M_X64)
#define GMRT_HAVE_X86 1
#include <immintrin.h>
#else
#define GMRT_HAVE_X86 0
#endif

namespace gmrt::simd {

#if GMRT_HAVE_X86
namespace {

#define GMRT_AVX2 __attribute__((target("avx2,fma")))

GMRT_AVX2 inline double hsum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d s = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

GMRT_AVX2 double dot(const double* x, const double* y, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i + 4), _mm256_loadu_pd(y + i + 4), acc1);
  }
  for (; i + 4 <= n; i += 4) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), acc0);
  }
  double s = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) s += x[i] * y[i];
  return s;
}

GMRT_AVX2 void axpy(double a, const double* x, double* y, std::size_t n) {
  const __m256d va = _mm256_set1_pd(a);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(y + i, _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
  }
  for (; i < n; ++i) y[i] += a * x[i];
}

GMRT_AVX2 void axpy_scaled(double a, const double* m, const double* x, double* y, std::size_t n) {
  const __m256d va = _mm256_set1_pd(a);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d mx = _mm256_mul_pd(_mm256_loadu_pd(m + i), _mm256_loadu_pd(x + i));
    _mm256_storeu_pd(y + i, _mm256_fmadd_pd(va, mx, _mm256_loadu_pd(y + i)));
  }
  for (; i < n; ++i) y[i] += a * (m[i] * x[i]);
}

GMRT_AVX2 double weighted_sumsq(const double* m, const double* x, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d vx = _mm256_loadu_pd(x + i);
    acc = _mm256_fmadd_pd(_mm256_mul_pd(_mm256_loadu_pd(m + i), vx), vx, acc);
  }
  double s = hsum(acc);
  for (; i < n; ++i) s += m[i] * x[i] * x[i];
  return s;
}

GMRT_AVX2 void gemv(const double* a, std::size_t rows, std::size_t cols, const double* x,
                    double* y) {
  for (std::size_t r = 0; r < rows; ++r) y[r] = dot(a + r * cols, x, cols);
}

GMRT_AVX2 void gemv_t(const double* a, std::size_t rows, std::size_t cols, const double* x,
                      double* y) {
  for (std::size_t c = 0; c < cols; ++c) y[c] = 0.0;
  for (std::size_t r = 0; r < rows; ++r) axpy(x[r], a + r * cols, y, cols);
}

GMRT_AVX2 void causal_conv(const double* w, std::size_t nw, const double* x, std::size_t offset,
                           double* y, std::size_t ny) {
  std::size_t i = 0;
  // head: outputs whose window reaches below x[0]
  for (; i < ny && offset + i + 1 < nw; ++i) {
    const std::size_t pos = offset + i;
    double s = 0.0;
    for (std::size_t k = 0; k <= pos; ++k) s += w[k] * x[pos - k];
    y[i] = s;
  }
  for (; i + 4 <= ny; i += 4) {
    const std::size_t pos = offset + i;
    __m256d acc = _mm256_setzero_pd();
    for (std::size_t k = 0; k < nw; ++k) {
      acc = _mm256_fmadd_pd(_mm256_set1_pd(w[k]), _mm256_loadu_pd(x + pos - k), acc);
    }
    _mm256_storeu_pd(y + i, acc);
  }
  for (; i < ny; ++i) {
    const std::size_t pos = offset + i;
    double s = 0.0;
    for (std::size_t k = 0; k < nw; ++k) s += w[k] * x[pos - k];
    y[i] = s;
  }
}

GMRT_AVX2 void causal_conv_adjoint(const double* w, std::size_t nw, const double* gy,
                                   std::size_t ny, std::size_t offset, double* gx,
                                   std::size_t nx) {
  auto scalar_at = [&](std::size_t j) {
    double s = 0.0;
    for (std::size_t k = 0; k < nw; ++k) {
      if (j + k < offset) continue;
      const std::size_t i = j + k - offset;
      if (i >= ny) break;
      s += w[k] * gy[i];
    }
    gx[j] = s;
  };
  // full window: offset <= j and j - offset + nw - 1 < ny
  const std::size_t lo = offset < nx ? offset : nx;
  const std::size_t hi_excl = (offset + ny >= nw) ? offset + ny - nw + 1 : 0;
  const std::size_t hi = hi_excl < nx ? hi_excl : nx;
  std::size_t j = 0;
  for (; j < lo; ++j) scalar_at(j);
  for (; j + 4 <= hi; j += 4) {
    const double* base = gy + (j - offset);
    __m256d acc = _mm256_setzero_pd();
    for (std::size_t k = 0; k < nw; ++k) {
      acc = _mm256_fmadd_pd(_mm256_set1_pd(w[k]), _mm256_loadu_pd(base + k), acc);
    }
    _mm256_storeu_pd(gx + j, acc);
  }
  for (; j < nx; ++j) scalar_at(j);
}

#undef GMRT_AVX2

}  // namespace

const KernelTable* avx2_kernels() {
  static const bool supported = [] {
    __builtin_cpu_init();
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
  }();
  static const KernelTable table{"avx2", dot,    axpy,        axpy_scaled,        weighted_sumsq,
                                 gemv,   gemv_t, causal_conv, causal_conv_adjoint};
  return supported ? &table : nullptr;
}

#else

const KernelTable* avx2_kernels() { return nullptr; }

#endif

}  // namespace gmrt::simd
