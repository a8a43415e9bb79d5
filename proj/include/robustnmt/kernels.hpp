// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>

namespace robustnmt::kern {

enum class Backend { kScalar, kSimd };

// Dense double-precision inner loops shared by the tensor ops.
//
// Elementwise kernels (axpy, vadd, vsub, vmul, vfma, vscale) are bit-identical
// across backends: each output element is computed with the same rounding in
// both lanes (fused multiply-add where a product feeds an accumulation).
// Reduction kernels (vsum, dot) may differ across backends in the last ulps
// because the SIMD lane keeps partial accumulators; they are equivalence-tested
// to a tight relative tolerance instead.
struct Kernels {
  void (*axpy)(double a, const double* x, double* y, std::size_t n);          // y += a * x
  void (*vadd)(const double* a, const double* b, double* out, std::size_t n);  // out = a + b
  void (*vsub)(const double* a, const double* b, double* out, std::size_t n);  // out = a - b
  void (*vmul)(const double* a, const double* b, double* out, std::size_t n);  // out = a .* b
  void (*vfma)(const double* a, const double* b, double* out, std::size_t n);  // out += a .* b
  void (*vscale)(const double* x, double a, double* out, std::size_t n);       // out = a * x
  double (*vsum)(const double* x, std::size_t n);
  double (*dot)(const double* a, const double* b, std::size_t n);
  const char* name;
};

const Kernels& scalar_kernels();

// SIMD lane for this machine (AVX2+FMA on x86-64, NEON on aarch64). Falls back
// to the scalar table when the CPU or build lacks support.
const Kernels& simd_kernels();
bool simd_supported();

// Active table. Selected once from the ROBUSTNMT_KERNELS environment variable
// (scalar | simd | auto; default auto = simd when supported), unless overridden
// with force_backend.
const Kernels& active();
Backend active_backend();
void force_backend(Backend b);
void reset_backend();  // return to env/auto selection

// C[m,n] += A[m,k] * B[k,n], all row-major. The accumulation order over k is
// fixed and shared by both lanes, so gemm results are bit-identical across
// backends.
void gemm_accum(const double* a, const double* b, double* c,
                std::size_t m, std::size_t k, std::size_t n);

}  // namespace robustnmt::kern
