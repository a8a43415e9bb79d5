// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <memory>
#include <string>
#include <vector>

namespace robustnmt {

// Storage behind a Tensor handle. Gradient storage is allocated lazily by the
// tape's backward pass; an empty grad vector means "not participating".
struct TensorNode {
  std::vector<std::size_t> shape;
  std::vector<double> values;
  bool requires_grad = false;
  std::vector<double> grad;
};

// Dense row-major float64 array with shared ownership. Copying a Tensor
// copies the handle, not the data; ops and the tape rely on that identity.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(std::vector<std::size_t> shape, bool requires_grad = false);
  static Tensor from(std::vector<std::size_t> shape, std::vector<double> values,
                     bool requires_grad = false);
  static Tensor scalar(double v, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const std::vector<std::size_t>& shape() const { return node_->shape; }
  std::size_t numel() const { return node_->values.size(); }

  std::vector<double>& values() { return node_->values; }
  const std::vector<double>& values() const { return node_->values; }

  bool requires_grad() const { return node_->requires_grad; }

  bool has_grad() const { return !node_->grad.empty(); }
  std::vector<double>& grad() { return node_->grad; }
  const std::vector<double>& grad() const { return node_->grad; }

  // Allocate (if needed) and zero the gradient buffer.
  void zero_grad();

  TensorNode* node() const { return node_.get(); }

  // "[m, n]" rendering for error messages.
  std::string shape_str() const;

 private:
  std::shared_ptr<TensorNode> node_;
};

std::size_t shape_numel(const std::vector<std::size_t>& shape);
std::string shape_to_string(const std::vector<std::size_t>& shape);

}  // namespace robustnmt
