// SPDX-License-Identifier: Apache-2.0
//
// Scalar vs SIMD kernel equivalence. Elementwise kernels must agree bitwise;
// reductions to a tight relative tolerance. Sizes sweep across and around the
// vector width so remainders and unaligned tails are covered.

#include <cmath>
#include <cstdlib>
#include <vector>

#include "doctest.h"
#include "robustnmt/error.hpp"
#include "robustnmt/kernels.hpp"
#include "robustnmt/rng.hpp"

using robustnmt::RngStream;
namespace kern = robustnmt::kern;

namespace {

std::vector<double> fill(std::size_t n, std::uint64_t seed, double scale = 1.0) {
  RngStream rng(seed);
  std::vector<double> v(n);
  for (double& x : v) x = scale * (2.0 * rng.next_double() - 1.0);
  return v;
}

const std::size_t kSizes[] = {0, 1, 2, 3, 4, 5, 7, 8, 9, 15, 16, 17, 31, 64, 100, 257};

}  // namespace

TEST_CASE("scalar table is always available and named") {
  CHECK(kern::scalar_kernels().name == std::string("scalar"));
}

TEST_CASE("elementwise kernels agree bitwise across backends") {
  if (!kern::simd_supported()) return;  // nothing to compare on this host
  const kern::Kernels& s = kern::scalar_kernels();
  const kern::Kernels& v = kern::simd_kernels();
  CHECK(std::string(v.name) != "scalar");

  for (std::size_t n : kSizes) {
    std::vector<double> a = fill(n, 11), b = fill(n, 22), base = fill(n, 33);

    std::vector<double> ys = base, yv = base;
    s.axpy(2.5, a.data(), ys.data(), n);
    v.axpy(2.5, a.data(), yv.data(), n);
    CHECK(ys == yv);

    std::vector<double> os(n), ov(n);
    s.vadd(a.data(), b.data(), os.data(), n);
    v.vadd(a.data(), b.data(), ov.data(), n);
    CHECK(os == ov);
    s.vsub(a.data(), b.data(), os.data(), n);
    v.vsub(a.data(), b.data(), ov.data(), n);
    CHECK(os == ov);
    s.vmul(a.data(), b.data(), os.data(), n);
    v.vmul(a.data(), b.data(), ov.data(), n);
    CHECK(os == ov);
    s.vscale(a.data(), -1.75, os.data(), n);
    v.vscale(a.data(), -1.75, ov.data(), n);
    CHECK(os == ov);

    std::vector<double> fs = base, fv = base;
    s.vfma(a.data(), b.data(), fs.data(), n);
    v.vfma(a.data(), b.data(), fv.data(), n);
    CHECK(fs == fv);
  }
}

TEST_CASE("reduction kernels agree across backends to 1e-13 relative") {
  if (!kern::simd_supported()) return;
  const kern::Kernels& s = kern::scalar_kernels();
  const kern::Kernels& v = kern::simd_kernels();
  for (std::size_t n : kSizes) {
    std::vector<double> a = fill(n, 44, 3.0), b = fill(n, 55, 3.0);
    const double ss = s.vsum(a.data(), n), sv = v.vsum(a.data(), n);
    CHECK(std::fabs(ss - sv) <= 1e-13 * std::max(1.0, std::fabs(ss)));
    const double ds = s.dot(a.data(), b.data(), n), dv = v.dot(a.data(), b.data(), n);
    CHECK(std::fabs(ds - dv) <= 1e-13 * std::max(1.0, std::fabs(ds)));
  }
}

TEST_CASE("gemm_accum is bitwise identical across backends") {
  if (!kern::simd_supported()) return;
  const std::size_t m = 7, k = 13, n = 9;
  std::vector<double> a = fill(m * k, 66), b = fill(k * n, 77);

  kern::force_backend(kern::Backend::kScalar);
  std::vector<double> cs(m * n, 0.25);
  kern::gemm_accum(a.data(), b.data(), cs.data(), m, k, n);

  kern::force_backend(kern::Backend::kSimd);
  std::vector<double> cv(m * n, 0.25);
  kern::gemm_accum(a.data(), b.data(), cv.data(), m, k, n);
  kern::reset_backend();

  CHECK(cs == cv);
}

TEST_CASE("gemm_accum matches a plain triple loop") {
  const std::size_t m = 3, k = 4, n = 5;
  std::vector<double> a = fill(m * k, 88), b = fill(k * n, 99), c(m * n, 0.0);
  kern::gemm_accum(a.data(), b.data(), c.data(), m, k, n);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      double want = 0.0;
      for (std::size_t l = 0; l < k; ++l) want += a[i * k + l] * b[l * n + j];
      CHECK(c[i * n + j] == doctest::Approx(want).epsilon(1e-12));
    }
}

TEST_CASE("force_backend pins the active table and reset restores policy") {
  kern::force_backend(kern::Backend::kScalar);
  CHECK(kern::active_backend() == kern::Backend::kScalar);
  CHECK(kern::active().name == std::string("scalar"));
  if (kern::simd_supported()) {
    kern::force_backend(kern::Backend::kSimd);
    CHECK(kern::active_backend() == kern::Backend::kSimd);
    CHECK(kern::active().name != std::string("scalar"));
  } else {
    CHECK_THROWS_AS(kern::force_backend(kern::Backend::kSimd), robustnmt::ConfigError);
  }
  kern::reset_backend();
}
