#pragma once

#include <cstddef>
#include <cstdint>
#include <string>

namespace lmdpp::simd {

inline constexpr std::size_t npos = static_cast<std::size_t>(-1);

enum class Isa { scalar, avx2, neon };

const char* isa_name(Isa isa);

// Data-parallel f64 primitives behind the hot loops: similarity rows,
// incremental-Cholesky updates, top-k scans, k-means distances.
//
// All variants of a kernel compute the same mathematical result; SIMD
// variants may differ from scalar in the low bits because the reduction
// tree differs. Each variant is individually deterministic: for a fixed
// backend the result depends only on the operands, never on threading or
// partitioning. Equivalence between backends is enforced by tests.
struct Kernels {
  // sum_i a[i]*b[i]
  double (*dot)(const double* a, const double* b, std::size_t n);

  // sum_i (a[i]-b[i])^2
  double (*sqdist)(const double* a, const double* b, std::size_t n);

  // acc[i] += x[i]*s
  void (*axpy)(double* acc, const double* x, double s, std::size_t n);

  // x[i] *= s
  void (*scale)(double* x, double s, std::size_t n);

  // out[i] = out[i] * w[i] * s
  void (*scale_mul)(double* out, const double* w, double s, std::size_t n);

  // Fused residual update used by greedy MAP:
  //   e = (row[i] - acc[i]) * inv_d;  c_out[i] = e;  d2[i] -= e*e
  void (*residual_update)(const double* row, const double* acc, double inv_d,
                          double* c_out, double* d2, std::size_t n);

  // Index of the maximum value among positions with active[i] != 0,
  // lowest index on exact ties; npos when nothing is active.
  std::size_t (*argmax_masked)(const double* values,
                               const std::uint8_t* active, std::size_t n);

  // out[i] = dot(rows + i*stride, v) for i in [0, n)
  void (*matvec_rows)(const double* rows, std::size_t stride, std::size_t n,
                      const double* v, std::size_t d, double* out);

  Isa isa;
};

// Backend chosen for this process: the best ISA the CPU supports, or the
// one named by the DPP_SIMD environment variable (scalar|avx2|neon|auto).
// The choice is made once and never changes mid-process.
const Kernels& active();

// A specific backend, for equivalence tests. Requires available(isa).
const Kernels& kernels(Isa isa);

bool available(Isa isa);

}  // namespace lmdpp::simd
