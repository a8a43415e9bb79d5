// SPDX-License-Identifier: Apache-2.0
//
// Runtime backend selection. Default policy: take the SIMD table when the
// host supports it, unless ROBUSTNMT_KERNELS says otherwise. force_backend()
// (used by the equivalence tests) overrides everything until reset_backend().

#include <atomic>
#include <cstdlib>
#include <cstring>
#include <string>

#include "kernels_internal.hpp"
#include "robustnmt/error.hpp"
#include "robustnmt/kernels.hpp"

namespace robustnmt::kern {
namespace {

bool host_has_simd() {
#if defined(__x86_64__) || defined(_M_X64)
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#elif defined(__aarch64__)
  // Baseline aarch64 mandates Advanced SIMD with double support.
  return true;
#else
  return false;
#endif
}

const Kernels* simd_table() {
  if (const Kernels* t = avx2_kernels_table()) return t;
  if (const Kernels* t = neon_kernels_table()) return t;
  return nullptr;
}

// -1 = follow env/auto policy, otherwise a Backend value pinned by
// force_backend().
std::atomic<int> g_forced{-1};

Backend env_backend() {
  const char* env = std::getenv("ROBUSTNMT_KERNELS");
  if (env == nullptr || std::strcmp(env, "auto") == 0)
    return (host_has_simd() && simd_table() != nullptr) ? Backend::kSimd : Backend::kScalar;
  if (std::strcmp(env, "scalar") == 0) return Backend::kScalar;
  if (std::strcmp(env, "simd") == 0) {
    if (!host_has_simd() || simd_table() == nullptr)
      throw ConfigError("ROBUSTNMT_KERNELS=simd but this host has no supported SIMD backend");
    return Backend::kSimd;
  }
  throw ConfigError("ROBUSTNMT_KERNELS must be one of scalar|simd|auto, got \"" +
                    std::string(env) + "\"");
}

}  // namespace

bool simd_supported() { return host_has_simd() && simd_table() != nullptr; }

const Kernels& simd_kernels() {
  const Kernels* t = simd_table();
  return (t != nullptr && host_has_simd()) ? *t : scalar_kernels();
}

Backend active_backend() {
  int forced = g_forced.load(std::memory_order_relaxed);
  if (forced >= 0) return static_cast<Backend>(forced);
  // Resolve the env policy once; the result cannot change within a process.
  static const Backend resolved = env_backend();
  return resolved;
}

const Kernels& active() {
  return active_backend() == Backend::kSimd ? simd_kernels() : scalar_kernels();
}

void force_backend(Backend b) {
  if (b == Backend::kSimd && !simd_supported())
    throw ConfigError("cannot force the SIMD backend: unsupported on this host");
  g_forced.store(static_cast<int>(b), std::memory_order_relaxed);
}

void reset_backend() { g_forced.store(-1, std::memory_order_relaxed); }

void gemm_accum(const double* a, const double* b, double* c, std::size_t m,
                std::size_t k, std::size_t n) {
  // c[i,:] += sum_l a[i,l] * b[l,:], with l always advancing in order. The
  // accumulation order per output element is therefore fixed regardless of
  // which axpy implementation runs, so results are bitwise identical across
  // backends.
  const Kernels& K = active();
  for (std::size_t i = 0; i < m; ++i) {
    const double* arow = a + i * k;
    double* crow = c + i * n;
    for (std::size_t l = 0; l < k; ++l) K.axpy(arow[l], b + l * n, crow, n);
  }
}

}  // namespace robustnmt::kern
