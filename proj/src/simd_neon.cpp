// NEON variants for aarch64. Baseline on that architecture, so no runtime
// feature check is needed beyond the compile-time guard.

#if defined(__aarch64__)

#include <arm_neon.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>

#include "lmdpp/simd.hpp"

namespace lmdpp::simd {

namespace {

inline double hsum(float64x2_t v) { return vgetq_lane_f64(v, 0) + vgetq_lane_f64(v, 1); }

double dot_neon(const double* a, const double* b, std::size_t n) {
  float64x2_t acc0 = vdupq_n_f64(0.0);
  float64x2_t acc1 = vdupq_n_f64(0.0);
  float64x2_t acc2 = vdupq_n_f64(0.0);
  float64x2_t acc3 = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = vfmaq_f64(acc0, vld1q_f64(a + i), vld1q_f64(b + i));
    acc1 = vfmaq_f64(acc1, vld1q_f64(a + i + 2), vld1q_f64(b + i + 2));
    acc2 = vfmaq_f64(acc2, vld1q_f64(a + i + 4), vld1q_f64(b + i + 4));
    acc3 = vfmaq_f64(acc3, vld1q_f64(a + i + 6), vld1q_f64(b + i + 6));
  }
  for (; i + 2 <= n; i += 2) {
    acc0 = vfmaq_f64(acc0, vld1q_f64(a + i), vld1q_f64(b + i));
  }
  acc0 = vaddq_f64(vaddq_f64(acc0, acc1), vaddq_f64(acc2, acc3));
  double sum = hsum(acc0);
  for (; i < n; ++i) sum += a[i] * b[i];
  return sum;
}

double sqdist_neon(const double* a, const double* b, std::size_t n) {
  float64x2_t acc0 = vdupq_n_f64(0.0);
  float64x2_t acc1 = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    float64x2_t d0 = vsubq_f64(vld1q_f64(a + i), vld1q_f64(b + i));
    float64x2_t d1 = vsubq_f64(vld1q_f64(a + i + 2), vld1q_f64(b + i + 2));
    acc0 = vfmaq_f64(acc0, d0, d0);
    acc1 = vfmaq_f64(acc1, d1, d1);
  }
  for (; i + 2 <= n; i += 2) {
    float64x2_t d0 = vsubq_f64(vld1q_f64(a + i), vld1q_f64(b + i));
    acc0 = vfmaq_f64(acc0, d0, d0);
  }
  acc0 = vaddq_f64(acc0, acc1);
  double sum = hsum(acc0);
  for (; i < n; ++i) {
    const double d = a[i] - b[i];
    sum += d * d;
  }
  return sum;
}

void axpy_neon(double* acc, const double* x, double s, std::size_t n) {
  const float64x2_t sv = vdupq_n_f64(s);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    vst1q_f64(acc + i, vfmaq_f64(vld1q_f64(acc + i), vld1q_f64(x + i), sv));
  }
  for (; i < n; ++i) acc[i] = std::fma(x[i], s, acc[i]);
}

void scale_neon(double* x, double s, std::size_t n) {
  const float64x2_t sv = vdupq_n_f64(s);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    vst1q_f64(x + i, vmulq_f64(vld1q_f64(x + i), sv));
  }
  for (; i < n; ++i) x[i] *= s;
}

void scale_mul_neon(double* out, const double* w, double s, std::size_t n) {
  const float64x2_t sv = vdupq_n_f64(s);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    float64x2_t ws = vmulq_f64(vld1q_f64(w + i), sv);
    vst1q_f64(out + i, vmulq_f64(vld1q_f64(out + i), ws));
  }
  for (; i < n; ++i) out[i] *= w[i] * s;
}

void residual_update_neon(const double* row, const double* acc, double inv_d,
                          double* c_out, double* d2, std::size_t n) {
  const float64x2_t iv = vdupq_n_f64(inv_d);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    float64x2_t e = vmulq_f64(vsubq_f64(vld1q_f64(row + i), vld1q_f64(acc + i)), iv);
    vst1q_f64(c_out + i, e);
    vst1q_f64(d2 + i, vfmsq_f64(vld1q_f64(d2 + i), e, e));
  }
  for (; i < n; ++i) {
    const double e = (row[i] - acc[i]) * inv_d;
    c_out[i] = e;
    d2[i] = std::fma(-e, e, d2[i]);
  }
}

std::size_t argmax_masked_neon(const double* values, const std::uint8_t* active,
                               std::size_t n) {
  const double ninf = -std::numeric_limits<double>::infinity();
  float64x2_t vmax = vdupq_n_f64(ninf);
  const float64x2_t vninf = vdupq_n_f64(ninf);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    const uint64x2_t keep = {active[i] ? ~0ull : 0ull, active[i + 1] ? ~0ull : 0ull};
    float64x2_t v = vbslq_f64(keep, vld1q_f64(values + i), vninf);
    vmax = vmaxq_f64(vmax, v);
  }
  double best = std::max(vgetq_lane_f64(vmax, 0), vgetq_lane_f64(vmax, 1));
  for (; i < n; ++i) {
    if (active[i] && values[i] > best) best = values[i];
  }
  if (!(best > ninf)) {
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
  for (std::size_t j = 0; j < n; ++j) {
    if (active[j] && values[j] == best) return j;
  }
  return npos;
}

void matvec_rows_neon(const double* rows, std::size_t stride, std::size_t n,
                      const double* v, std::size_t d, double* out) {
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = dot_neon(rows + i * stride, v, d);
  }
}

}  // namespace

const Kernels& neon_kernels() {
  static const Kernels k = {
      dot_neon,        sqdist_neon,        axpy_neon,
      scale_neon,      scale_mul_neon,     residual_update_neon,
      argmax_masked_neon, matvec_rows_neon, Isa::neon,
  };
  return k;
}

}  // namespace lmdpp::simd

#endif  // aarch64
