#include "lmdpp/simd.hpp"

#include <cstdlib>
#include <cstring>

namespace lmdpp::simd {

const Kernels& scalar_kernels();
#if defined(__x86_64__) || defined(__i386__)
const Kernels& avx2_kernels();
#endif
#if defined(__aarch64__)
const Kernels& neon_kernels();
#endif

const char* isa_name(Isa isa) {
  switch (isa) {
    case Isa::scalar: return "scalar";
    case Isa::avx2: return "avx2";
    case Isa::neon: return "neon";
  }
  return "scalar";
}

bool available(Isa isa) {
  switch (isa) {
    case Isa::scalar:
      return true;
    case Isa::avx2:
#if defined(__x86_64__) || defined(__i386__)
      return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
      return false;
#endif
    case Isa::neon:
#if defined(__aarch64__)
      return true;
#else
      return false;
#endif
  }
  return false;
}

const Kernels& kernels(Isa isa) {
#if defined(__x86_64__) || defined(__i386__)
  if (isa == Isa::avx2 && available(Isa::avx2)) return avx2_kernels();
#endif
#if defined(__aarch64__)
  if (isa == Isa::neon) return neon_kernels();
#endif
  return scalar_kernels();
}

namespace {

Isa pick_isa() {
  if (const char* env = std::getenv("DPP_SIMD"); env && *env) {
    if (std::strcmp(env, "scalar") == 0) return Isa::scalar;
    if (std::strcmp(env, "avx2") == 0 && available(Isa::avx2)) return Isa::avx2;
    if (std::strcmp(env, "neon") == 0 && available(Isa::neon)) return Isa::neon;
    // Unknown or unavailable values fall through to auto detection.
  }
  if (available(Isa::avx2)) return Isa::avx2;
  if (available(Isa::neon)) return Isa::neon;
  return Isa::scalar;
}

}  // namespace

const Kernels& active() {
  static const Kernels& k = kernels(pick_isa());
  return k;
}

}  // namespace lmdpp::simd
