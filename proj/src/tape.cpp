// SPDX-License-Identifier: Apache-2.0

#include "robustnmt/tape.hpp"

#include "robustnmt/error.hpp"

namespace robustnmt {

void Tape::record(const char* op, std::vector<Tensor> inputs, Tensor output,
                  BackwardFn fn) {
  records_.push_back(Record{op, std::move(inputs), std::move(output), std::move(fn)});
}

void Tape::backward(const Tensor& loss) {
  if (!loss.defined() || loss.numel() != 1)
    throw NumericalError("backward: loss must be a scalar, got shape " +
                         (loss.defined() ? loss.shape_str() : std::string("<undefined>")));
  bool on_tape = false;
  for (const Record& r : records_) {
    if (r.output.node() == loss.node()) {
      on_tape = true;
      break;
    }
  }
  if (!on_tape) throw NumericalError("backward: loss was not produced on this tape");

  // Zero every participating gradient buffer up front. This both defines
  // "participates in backward" (closures skip tensors with empty grads) and
  // makes repeated backward calls on one tape reproducible.
  for (Record& r : records_) {
    for (Tensor& in : r.inputs)
      if (in.requires_grad()) in.zero_grad();
    if (r.output.requires_grad()) r.output.zero_grad();
  }
  Tensor seed = loss;
  seed.zero_grad();
  seed.grad()[0] = 1.0;

  for (auto it = records_.rbegin(); it != records_.rend(); ++it)
    if (it->fn) it->fn();
}

}  // namespace robustnmt
