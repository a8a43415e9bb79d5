// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace robustnmt {

// Deterministic, splittable random stream built on splitmix64.
//
// A stream carries two pieces of state: an identity (fixed at construction,
// derived from the seed and the split path) and a draw position. split() mixes
// a label and index into the identity without touching the parent's draw
// position, so the set of child streams a step uses is a pure function of
// (seed, path) and never depends on how many numbers anyone else drew. That is
// what makes training steps replayable in isolation: the trainer derives
// root("seed").split("step", t) and every consumer under step t splits further
// from there.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed);
  RngStream(const std::string& seed_label, std::uint64_t seed);

  // Child stream for (label, index). Does not advance this stream.
  RngStream split(const std::string& label, std::uint64_t index = 0) const;

  // Next raw 64-bit draw.
  std::uint64_t next_u64();

  // Uniform integer in [0, bound), bound >= 1. Rejection-sampled, so every
  // value is exactly equally likely.
  std::uint64_t next_below(std::uint64_t bound);

  // Uniform double in [0, 1) with 53 random bits.
  double next_double();

  // Standard normal via Box-Muller. Draws two uniforms per pair of outputs and
  // caches the spare.
  double next_gaussian();

  // k distinct values from [0, n), returned in ascending order. k <= n.
  std::vector<std::size_t> sample_distinct(std::size_t n, std::size_t k);

  // Index sampled from an (unnormalized, nonnegative) weight vector by inverse
  // CDF walk. At least one weight must be positive.
  std::size_t sample_pmf(const std::vector<double>& weights);

  std::uint64_t identity() const { return identity_; }

 private:
  RngStream(std::uint64_t identity, int);  // internal: identity precomputed

  std::uint64_t identity_;  // fixed stream id
  std::uint64_t state_;     // draw position, advances on every draw
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace robustnmt
