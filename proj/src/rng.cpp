// SPDX-License-Identifier: Apache-2.0

#include "robustnmt/rng.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "robustnmt/error.hpp"

namespace robustnmt {
namespace {

// splitmix64 finalizer (Steele, Lea & Flood). Used both as the generator's
// output mix and as the hash that folds split labels into a stream identity.
std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

RngStream::RngStream(std::uint64_t seed) : identity_(mix64(seed)), state_(0) {}

RngStream::RngStream(const std::string& seed_label, std::uint64_t seed)
    : identity_(mix64(fnv1a(seed_label) ^ mix64(seed))), state_(0) {}

RngStream::RngStream(std::uint64_t identity, int) : identity_(identity), state_(0) {}

RngStream RngStream::split(const std::string& label, std::uint64_t index) const {
  std::uint64_t child = mix64(identity_ ^ mix64(fnv1a(label) + index * 0x9e3779b97f4a7c15ULL));
  return RngStream(child, 0);
}

std::uint64_t RngStream::next_u64() {
  state_ += 1;
  return mix64(identity_ ^ mix64(state_));
}

std::uint64_t RngStream::next_below(std::uint64_t bound) {
  if (bound == 0) throw NumericalError("next_below: bound must be >= 1");
  if (bound == 1) return 0;
  // Reject draws in the biased remainder zone at the top of the 64-bit range.
  std::uint64_t threshold = -bound % bound;
  for (;;) {
    std::uint64_t r = next_u64();
    if (r >= threshold) return r % bound;
  }
}

double RngStream::next_double() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double RngStream::next_gaussian() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  // Box-Muller; u1 is nudged away from zero so log stays finite.
  double u1 = next_double();
  double u2 = next_double();
  if (u1 <= 0.0) u1 = 0x1.0p-53;
  double r = std::sqrt(-2.0 * std::log(u1));
  double theta = 2.0 * std::numbers::pi * u2;
  spare_ = r * std::sin(theta);
  has_spare_ = true;
  return r * std::cos(theta);
}

std::vector<std::size_t> RngStream::sample_distinct(std::size_t n, std::size_t k) {
  if (k > n) throw NumericalError("sample_distinct: k exceeds population size");
  // Partial Fisher-Yates over an index array, then sort the prefix so callers
  // see a canonical order.
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  for (std::size_t i = 0; i < k; ++i) {
    std::size_t j = i + static_cast<std::size_t>(next_below(n - i));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(k);
  for (std::size_t i = 1; i < k; ++i) {  // insertion sort; k is tiny
    std::size_t v = idx[i];
    std::size_t j = i;
    while (j > 0 && idx[j - 1] > v) {
      idx[j] = idx[j - 1];
      --j;
    }
    idx[j] = v;
  }
  return idx;
}

std::size_t RngStream::sample_pmf(const std::vector<double>& weights) {
  double total = 0.0;
  for (double w : weights) {
    if (w < 0.0 || !std::isfinite(w))
      throw NumericalError("sample_pmf: weights must be finite and nonnegative");
    total += w;
  }
  if (total <= 0.0) throw NumericalError("sample_pmf: all weights are zero");
  double u = next_double() * total;
  double acc = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    acc += weights[i];
    if (u < acc) return i;
  }
  // Floating-point slack: u can land at or past the final accumulated value.
  for (std::size_t i = weights.size(); i-- > 0;)
    if (weights[i] > 0.0) return i;
  return weights.size() - 1;
}

}  // namespace robustnmt
