// SPDX-License-Identifier: Apache-2.0
//
// Reference kernels. Products that feed an accumulation go through std::fma so
// the SIMD lanes (which use hardware FMA) reproduce the same roundings.

#include <cmath>
#include <cstddef>

#include "robustnmt/kernels.hpp"

namespace robustnmt::kern {
namespace {

void axpy_scalar(double a, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] = std::fma(a, x[i], y[i]);
}

void vadd_scalar(const double* a, const double* b, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] + b[i];
}

void vsub_scalar(const double* a, const double* b, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] - b[i];
}

void vmul_scalar(const double* a, const double* b, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] * b[i];
}

void vfma_scalar(const double* a, const double* b, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = std::fma(a[i], b[i], out[i]);
}

void vscale_scalar(const double* x, double a, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a * x[i];
}

double vsum_scalar(const double* x, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += x[i];
  return s;
}

double dot_scalar(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s = std::fma(a[i], b[i], s);
  return s;
}

}  // namespace

const Kernels& scalar_kernels() {
  static const Kernels table{axpy_scalar, vadd_scalar, vsub_scalar, vmul_scalar,
                             vfma_scalar, vscale_scalar, vsum_scalar, dot_scalar,
                             "scalar"};
  return table;
}

}  // namespace robustnmt::kern
