// Scalar reference kernels. These are the semantic ground truth the SIMD
// variants are tested against; keep them as plain loops.

#include "lmdpp/simd.hpp"

namespace lmdpp::simd {

namespace {

double dot_scalar(const double* a, const double* b, std::size_t n) {
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) sum += a[i] * b[i];
  return sum;
}

double sqdist_scalar(const double* a, const double* b, std::size_t n) {
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = a[i] - b[i];
    sum += d * d;
  }
  return sum;
}

void axpy_scalar(double* acc, const double* x, double s, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) acc[i] += x[i] * s;
}

void scale_scalar(double* x, double s, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) x[i] *= s;
}

void scale_mul_scalar(double* out, const double* w, double s, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] *= w[i] * s;
}

void residual_update_scalar(const double* row, const double* acc, double inv_d,
                            double* c_out, double* d2, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    const double e = (row[i] - acc[i]) * inv_d;
    c_out[i] = e;
    d2[i] -= e * e;
  }
}

std::size_t argmax_masked_scalar(const double* values,
                                 const std::uint8_t* active, std::size_t n) {
  std::size_t best = npos;
  double best_value = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!active[i]) continue;
    if (best == npos || values[i] > best_value) {
      best = i;
      best_value = values[i];
    }
  }
  return best;
}

void matvec_rows_scalar(const double* rows, std::size_t stride, std::size_t n,
                        const double* v, std::size_t d, double* out) {
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = dot_scalar(rows + i * stride, v, d);
  }
}

}  // namespace

const Kernels& scalar_kernels() {
  static const Kernels k = {
      dot_scalar,        sqdist_scalar,          axpy_scalar,
      scale_scalar,      scale_mul_scalar,       residual_update_scalar,
      argmax_masked_scalar, matvec_rows_scalar,  Isa::scalar,
  };
  return k;
}

}  // namespace lmdpp::simd
