// AVX2+FMA variants. This translation unit is compiled with -mavx2 -mfma and
// must only be entered after the dispatcher has checked CPU support.

#if defined(__x86_64__) || defined(__i386__)

#include <immintrin.h>

#include <cmath>
#include <cstdint>
#include <limits>

#include "lmdpp/simd.hpp"

namespace lmdpp::simd {

namespace {

// Fixed reduction order: (lane0+lane2, lane1+lane3) then the final pair.
inline double hsum(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  __m128d pair = _mm_add_pd(lo, hi);
  __m128d swapped = _mm_unpackhi_pd(pair, pair);
  return _mm_cvtsd_f64(_mm_add_sd(pair, swapped));
}

inline double hmax(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  __m128d pair = _mm_max_pd(lo, hi);
  __m128d swapped = _mm_unpackhi_pd(pair, pair);
  return _mm_cvtsd_f64(_mm_max_sd(pair, swapped));
}

double dot_avx2(const double* a, const double* b, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  __m256d acc2 = _mm256_setzero_pd();
  __m256d acc3 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 16 <= n; i += 16) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4), acc1);
    acc2 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 8), _mm256_loadu_pd(b + i + 8), acc2);
    acc3 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 12), _mm256_loadu_pd(b + i + 12), acc3);
  }
  for (; i + 4 <= n; i += 4) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
  }
  acc0 = _mm256_add_pd(_mm256_add_pd(acc0, acc1), _mm256_add_pd(acc2, acc3));
  double sum = hsum(acc0);
  for (; i < n; ++i) sum += a[i] * b[i];
  return sum;
}

double sqdist_avx2(const double* a, const double* b, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    __m256d d0 = _mm256_sub_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i));
    __m256d d1 = _mm256_sub_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4));
    acc0 = _mm256_fmadd_pd(d0, d0, acc0);
    acc1 = _mm256_fmadd_pd(d1, d1, acc1);
  }
  for (; i + 4 <= n; i += 4) {
    __m256d d0 = _mm256_sub_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i));
    acc0 = _mm256_fmadd_pd(d0, d0, acc0);
  }
  acc0 = _mm256_add_pd(acc0, acc1);
  double sum = hsum(acc0);
  for (; i < n; ++i) {
    const double d = a[i] - b[i];
    sum += d * d;
  }
  return sum;
}

void axpy_avx2(double* acc, const double* x, double s, std::size_t n) {
  const __m256d sv = _mm256_set1_pd(s);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    __m256d a0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), sv, _mm256_loadu_pd(acc + i));
    __m256d a1 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i + 4), sv, _mm256_loadu_pd(acc + i + 4));
    _mm256_storeu_pd(acc + i, a0);
    _mm256_storeu_pd(acc + i + 4, a1);
  }
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(acc + i, _mm256_fmadd_pd(_mm256_loadu_pd(x + i), sv,
                                              _mm256_loadu_pd(acc + i)));
  }
  for (; i < n; ++i) acc[i] = std::fma(x[i], s, acc[i]);
}

void scale_avx2(double* x, double s, std::size_t n) {
  const __m256d sv = _mm256_set1_pd(s);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(x + i, _mm256_mul_pd(_mm256_loadu_pd(x + i), sv));
  }
  for (; i < n; ++i) x[i] *= s;
}

void scale_mul_avx2(double* out, const double* w, double s, std::size_t n) {
  const __m256d sv = _mm256_set1_pd(s);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d ws = _mm256_mul_pd(_mm256_loadu_pd(w + i), sv);
    _mm256_storeu_pd(out + i, _mm256_mul_pd(_mm256_loadu_pd(out + i), ws));
  }
  for (; i < n; ++i) out[i] *= w[i] * s;
}

void residual_update_avx2(const double* row, const double* acc, double inv_d,
                          double* c_out, double* d2, std::size_t n) {
  const __m256d iv = _mm256_set1_pd(inv_d);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d e = _mm256_mul_pd(
        _mm256_sub_pd(_mm256_loadu_pd(row + i), _mm256_loadu_pd(acc + i)), iv);
    _mm256_storeu_pd(c_out + i, e);
    __m256d d2v = _mm256_loadu_pd(d2 + i);
    _mm256_storeu_pd(d2 + i, _mm256_fnmadd_pd(e, e, d2v));
  }
  for (; i < n; ++i) {
    const double e = (row[i] - acc[i]) * inv_d;
    c_out[i] = e;
    d2[i] = std::fma(-e, e, d2[i]);
  }
}

std::size_t argmax_masked_avx2(const double* values, const std::uint8_t* active,
                               std::size_t n) {
  // Pass 1: maximum value among active lanes (inactive mapped to -inf).
  const __m256d ninf = _mm256_set1_pd(-std::numeric_limits<double>::infinity());
  __m256d vmax = ninf;
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const std::uint32_t m = static_cast<std::uint32_t>(active[i]) |
                            (static_cast<std::uint32_t>(active[i + 1]) << 8) |
                            (static_cast<std::uint32_t>(active[i + 2]) << 16) |
                            (static_cast<std::uint32_t>(active[i + 3]) << 24);
    __m128i bytes = _mm_cvtsi32_si128(static_cast<int>(m));
    __m128i lanes32 = _mm_cvtepu8_epi32(bytes);
    __m256i lanes64 = _mm256_cvtepu32_epi64(lanes32);
    __m256d keep = _mm256_castsi256_pd(
        _mm256_cmpgt_epi64(lanes64, _mm256_setzero_si256()));
    __m256d v = _mm256_blendv_pd(ninf, _mm256_loadu_pd(values + i), keep);
    vmax = _mm256_max_pd(vmax, v);
  }
  double best = hmax(vmax);
  for (; i < n; ++i) {
    if (active[i] && values[i] > best) best = values[i];
  }
  if (!(best > -std::numeric_limits<double>::infinity())) {
    // Either nothing is active or every active value is -inf; resolve with
    // the plain argmax so the edge cases match the scalar reference.
    std::size_t first = npos;
    double fb = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (!active[j]) continue;
      if (first == npos || values[j] > fb) {
        first = j;
        fb = values[j];
      }
    }
    return first;
  }
  // Pass 2: first active index holding the maximum.
  const __m256d bv = _mm256_set1_pd(best);
  i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d eq = _mm256_cmp_pd(_mm256_loadu_pd(values + i), bv, _CMP_EQ_OQ);
    int mask = _mm256_movemask_pd(eq);
    if (mask) {
      for (int lane = 0; lane < 4; ++lane) {
        if ((mask & (1 << lane)) && active[i + lane]) {
          return i + static_cast<std::size_t>(lane);
        }
      }
    }
  }
  for (; i < n; ++i) {
    if (active[i] && values[i] == best) return i;
  }
  return npos;  // unreachable when any_vector
}

void matvec_rows_avx2(const double* rows, std::size_t stride, std::size_t n,
                      const double* v, std::size_t d, double* out) {
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = dot_avx2(rows + i * stride, v, d);
  }
}

}  // namespace

const Kernels& avx2_kernels() {
  static const Kernels k = {
      dot_avx2,        sqdist_avx2,        axpy_avx2,
      scale_avx2,      scale_mul_avx2,     residual_update_avx2,
      argmax_masked_avx2, matvec_rows_avx2, Isa::avx2,
  };
  return k;
}

}  // namespace lmdpp::simd

#endif  // x86
