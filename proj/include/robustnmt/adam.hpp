// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "robustnmt/tensor.hpp"

namespace robustnmt {

// A parameter tensor with the stable name the optimizer and checkpoints key on.
struct NamedTensor {
  std::string name;
  Tensor tensor;
};

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamSlot {
  std::vector<double> m;  // first moment
  std::vector<double> v;  // second moment
};

// Adam with bias correction. Moment slots are created on first sight of a
// parameter name and must keep matching its size afterwards. The learning
// rate is supplied per step by the caller's schedule.
class AdamState {
 public:
  explicit AdamState(AdamConfig cfg = {}) : cfg_(cfg) {}

  // One optimizer step over all params. A parameter whose gradient buffer is
  // absent is left untouched and reported in the returned warning list.
  std::vector<std::string> step(std::vector<NamedTensor>& params, double lr);

  std::uint64_t steps() const { return t_; }
  const AdamConfig& config() const { return cfg_; }
  const std::map<std::string, AdamSlot>& slots() const { return slots_; }

  // Replaces the full state; used when resuming from a checkpoint.
  void restore(std::uint64_t t, std::map<std::string, AdamSlot> slots);

 private:
  AdamConfig cfg_;
  std::uint64_t t_ = 0;
  std::map<std::string, AdamSlot> slots_;
};

}  // namespace robustnmt
