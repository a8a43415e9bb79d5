// SPDX-License-Identifier: Apache-2.0

#include "robustnmt/tensor.hpp"

#include <sstream>

#include "robustnmt/error.hpp"

namespace robustnmt {

std::size_t shape_numel(const std::vector<std::size_t>& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

std::string shape_to_string(const std::vector<std::size_t>& shape) {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ", ";
    os << shape[i];
  }
  os << "]";
  return os.str();
}

namespace {

void check_shape(const std::vector<std::size_t>& shape) {
  if (shape.empty()) throw ShapeError("tensor: empty shape");
  for (std::size_t d : shape)
    if (d == 0) throw ShapeError("tensor: zero dimension in shape " + shape_to_string(shape));
}

}  // namespace

Tensor Tensor::zeros(std::vector<std::size_t> shape, bool requires_grad) {
  check_shape(shape);
  Tensor t;
  t.node_ = std::make_shared<TensorNode>();
  std::size_t n = shape_numel(shape);
  t.node_->shape = std::move(shape);
  t.node_->values.assign(n, 0.0);
  t.node_->requires_grad = requires_grad;
  return t;
}

Tensor Tensor::from(std::vector<std::size_t> shape, std::vector<double> values,
                    bool requires_grad) {
  check_shape(shape);
  if (values.size() != shape_numel(shape))
    throw ShapeError("tensor: " + std::to_string(values.size()) +
                     " values do not fill shape " + shape_to_string(shape));
  Tensor t;
  t.node_ = std::make_shared<TensorNode>();
  t.node_->shape = std::move(shape);
  t.node_->values = std::move(values);
  t.node_->requires_grad = requires_grad;
  return t;
}

Tensor Tensor::scalar(double v, bool requires_grad) {
  return from({1}, {v}, requires_grad);
}

void Tensor::zero_grad() { node_->grad.assign(node_->values.size(), 0.0); }

std::string Tensor::shape_str() const { return shape_to_string(node_->shape); }

}  // namespace robustnmt
