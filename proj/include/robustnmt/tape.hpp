// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <vector>

#include "robustnmt/tensor.hpp"

namespace robustnmt {

// Ordered record of primitive applications. Ops append themselves in
// execution order, which makes the record topologically sorted by
// construction; backward() then visits it once, in reverse.
class Tape {
 public:
  using BackwardFn = std::function<void()>;

  void record(const char* op, std::vector<Tensor> inputs, Tensor output, BackwardFn fn);

  // Reverse-mode sweep from a scalar loss. Zeroes the gradient buffers of
  // every participating tensor first, so running backward twice on the same
  // tape produces identical gradients. Rejects non-scalar losses and losses
  // that were not produced on this tape.
  void backward(const Tensor& loss);

  std::size_t size() const { return records_.size(); }
  void clear() { records_.clear(); }

 private:
  struct Record {
    const char* op;
    std::vector<Tensor> inputs;
    Tensor output;
    BackwardFn fn;
  };
  std::vector<Record> records_;
};

}  // namespace robustnmt
