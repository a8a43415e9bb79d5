// SPDX-License-Identifier: Apache-2.0

#include "robustnmt/discriminator.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "robustnmt/error.hpp"
#include "robustnmt/ops.hpp"

namespace robustnmt {
namespace {

constexpr std::size_t kWidths[3] = {3, 4, 5};

Tensor conv_filter(RngStream& rng, const std::string& name, std::size_t channels,
                   std::size_t width, std::size_t hidden) {
  RngStream s = rng.split(name);
  std::vector<double> v(channels * width * hidden);
  for (double& x : v) x = 0.1 * (2.0 * s.next_double() - 1.0);
  return Tensor::from({channels, width, hidden}, std::move(v), true);
}

// Pooling extent for one filter width: the fully-real windows, or the single
// zero-padded leading window when the sequence is shorter than the filter.
std::vector<std::size_t> pool_extents(const std::vector<double>& lengths, std::size_t width) {
  std::vector<std::size_t> valid(lengths.size());
  for (std::size_t b = 0; b < lengths.size(); ++b) {
    const auto len = static_cast<std::size_t>(lengths[b]);
    valid[b] = len >= width ? len - width + 1 : 1;
  }
  return valid;
}

}  // namespace

DiscriminatorParams DiscriminatorParams::init(std::size_t hidden_dim, std::size_t channels,
                                              RngStream& rng) {
  if (hidden_dim == 0 || channels == 0)
    throw ConfigError("discriminator: hidden dim and channel count must be >= 1");
  DiscriminatorParams p;
  p.channels = channels;
  p.conv3_k = conv_filter(rng, "dis.conv3.k", channels, 3, hidden_dim);
  p.conv3_b = Tensor::zeros({channels}, true);
  p.conv4_k = conv_filter(rng, "dis.conv4.k", channels, 4, hidden_dim);
  p.conv4_b = Tensor::zeros({channels}, true);
  p.conv5_k = conv_filter(rng, "dis.conv5.k", channels, 5, hidden_dim);
  p.conv5_b = Tensor::zeros({channels}, true);
  p.out_w = Tensor::zeros({1, 3 * channels}, true);
  p.out_b = Tensor::zeros({1}, true);
  return p;
}

DiscriminatorParams DiscriminatorParams::clone() const {
  auto copy = [](const Tensor& t) {
    return Tensor::from(t.shape(), t.values(), t.requires_grad());
  };
  DiscriminatorParams p;
  p.channels = channels;
  p.conv3_k = copy(conv3_k);
  p.conv3_b = copy(conv3_b);
  p.conv4_k = copy(conv4_k);
  p.conv4_b = copy(conv4_b);
  p.conv5_k = copy(conv5_k);
  p.conv5_b = copy(conv5_b);
  p.out_w = copy(out_w);
  p.out_b = copy(out_b);
  return p;
}

std::vector<NamedTensor> DiscriminatorParams::group() const {
  return {{"dis.conv3.k", conv3_k}, {"dis.conv3.b", conv3_b},
          {"dis.conv4.k", conv4_k}, {"dis.conv4.b", conv4_b},
          {"dis.conv5.k", conv5_k}, {"dis.conv5.b", conv5_b},
          {"dis.out.w", out_w},     {"dis.out.b", out_b}};
}

Tensor discriminate(Tape& tape, const DiscriminatorParams& params,
                    const std::vector<Tensor>& states,
                    const std::vector<double>& lengths) {
  if (states.empty()) throw ShapeError("discriminate: empty state sequence");
  const std::size_t b = states[0].shape()[0];
  if (lengths.size() != b)
    throw ShapeError("discriminate: got " + std::to_string(lengths.size()) +
                     " lengths for a batch of " + std::to_string(b));
  for (double len : lengths)
    if (len < 1.0) throw NumericalError("discriminate: sequence length must be >= 1");

  // Zero-pad the time axis up to the widest filter.
  std::vector<Tensor> padded = states;
  const std::size_t h = states[0].shape()[1];
  while (padded.size() < kWidths[2]) padded.push_back(Tensor::zeros({b, h}));
  Tensor x = ops::stack_time(tape, padded);

  const Tensor* kernels[3] = {&params.conv3_k, &params.conv4_k, &params.conv5_k};
  const Tensor* biases[3] = {&params.conv3_b, &params.conv4_b, &params.conv5_b};
  std::vector<Tensor> pooled;
  pooled.reserve(3);
  for (int w = 0; w < 3; ++w) {
    Tensor c = ops::relu(tape, ops::conv1d(tape, x, *kernels[w], *biases[w]));
    pooled.push_back(ops::max_over_time(tape, c, pool_extents(lengths, kWidths[w])));
  }
  Tensor logit = ops::add(tape, ops::matmul_nt(tape, ops::concat(tape, pooled), params.out_w),
                          params.out_b);
  return ops::sigmoid(tape, logit);
}

Tensor discriminate(Tape& tape, const DiscriminatorParams& params, const EncoderStates& enc) {
  return discriminate(tape, params, enc.states, enc.lengths);
}

AdversarialLoss adversarial_loss(Tape& tape, const DiscriminatorParams& params,
                                 const std::vector<Tensor>& clean_states,
                                 const std::vector<Tensor>& perturbed_states,
                                 const std::vector<double>& lengths) {
  if (clean_states.size() != perturbed_states.size())
    throw ShapeError("adversarial_loss: clean and perturbed sequence lengths differ");
  std::vector<Tensor> clean_rev, pert_rev;
  clean_rev.reserve(clean_states.size());
  pert_rev.reserve(perturbed_states.size());
  for (const Tensor& t : clean_states) clean_rev.push_back(ops::grad_reverse(tape, t));
  for (const Tensor& t : perturbed_states) pert_rev.push_back(ops::grad_reverse(tape, t));

  AdversarialLoss out;
  out.clean_probs = discriminate(tape, params, clean_rev, lengths);
  out.perturbed_probs = discriminate(tape, params, pert_rev, lengths);
  const std::size_t b = out.clean_probs.numel();
  out.clean_term =
      ops::binary_cross_entropy(tape, out.clean_probs, std::vector<double>(b, 1.0));
  out.perturbed_term =
      ops::binary_cross_entropy(tape, out.perturbed_probs, std::vector<double>(b, 0.0));
  out.total = ops::add(tape, out.clean_term, out.perturbed_term);
  return out;
}

AdversarialLoss adversarial_loss(Tape& tape, const DiscriminatorParams& params,
                                 const EncoderStates& clean, const EncoderStates& perturbed) {
  return adversarial_loss(tape, params, clean.states, perturbed.states, clean.lengths);
}

double discriminator_accuracy(const Tensor& clean_probs, const Tensor& perturbed_probs) {
  double credit = 0.0;
  for (double p : clean_probs.values()) credit += p > 0.5 ? 1.0 : (p == 0.5 ? 0.5 : 0.0);
  for (double p : perturbed_probs.values()) credit += p < 0.5 ? 1.0 : (p == 0.5 ? 0.5 : 0.0);
  const double n = static_cast<double>(clean_probs.numel() + perturbed_probs.numel());
  return credit / n;
}

}  // namespace robustnmt
