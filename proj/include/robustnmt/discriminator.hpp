// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <vector>

#include "robustnmt/adam.hpp"
#include "robustnmt/model.hpp"
#include "robustnmt/rng.hpp"
#include "robustnmt/tape.hpp"
#include "robustnmt/tensor.hpp"

// CNN classifier over encoder state sequences: one conv per filter width
// {3,4,5}, ReLU, masked max-over-time pooling, then an affine layer and a
// sigmoid producing the probability that the sequence came from clean input.
namespace robustnmt {

struct DiscriminatorParams {
  std::size_t channels = 8;
  Tensor conv3_k, conv3_b;  // [C,3,hidden], [C]
  Tensor conv4_k, conv4_b;
  Tensor conv5_k, conv5_b;
  Tensor out_w;             // [1, 3C]
  Tensor out_b;             // [1]

  // Small uniform conv filters, zero output layer: the initial classifier
  // says exactly 0.5 everywhere, so the adversarial loss starts at 2*ln 2.
  static DiscriminatorParams init(std::size_t hidden_dim, std::size_t channels,
                                  RngStream& rng);

  DiscriminatorParams clone() const;  // deep copy; plain copies share storage

  std::vector<NamedTensor> group() const;
};

// Scores one batch of state sequences -> [B,1] probabilities, strictly inside
// (0,1). `states` holds one [B,hidden] tensor per position with padding rows
// already zeroed; `lengths[b]` counts the real positions of row b. Sequences
// shorter than the widest filter are zero-padded up to it; pooling for width
// w runs over the fully-real windows when length >= w and over the single
// padded leading window otherwise.
Tensor discriminate(Tape& tape, const DiscriminatorParams& params,
                    const std::vector<Tensor>& states,
                    const std::vector<double>& lengths);

// Convenience wrapper over the undropped encoder states.
Tensor discriminate(Tape& tape, const DiscriminatorParams& params,
                    const EncoderStates& enc);

struct AdversarialLoss {
  Tensor total;            // clean_term + perturbed_term, scalar
  Tensor clean_term;       // mean over batch of -log D(H_x)
  Tensor perturbed_term;   // mean over batch of -log(1 - D(H_x'))
  Tensor clean_probs;      // [B,1]
  Tensor perturbed_probs;  // [B,1]
};

// The two-sided loss the discriminator descends. Both state sequences pass
// through a gradient-reversal node before scoring, so one backward pass
// trains the discriminator while the encoder upstream receives the
// sign-flipped (fooling) gradient. D outputs are clamped to
// [1e-7, 1 - 1e-7] before the logs. Clean and perturbed sequences share
// `lengths` (perturbations used here preserve length).
AdversarialLoss adversarial_loss(Tape& tape, const DiscriminatorParams& params,
                                 const std::vector<Tensor>& clean_states,
                                 const std::vector<Tensor>& perturbed_states,
                                 const std::vector<double>& lengths);

AdversarialLoss adversarial_loss(Tape& tape, const DiscriminatorParams& params,
                                 const EncoderStates& clean, const EncoderStates& perturbed);

// Fraction of correct calls: clean rows should score above 0.5, perturbed
// rows below. Exact 0.5 outputs earn half credit, so an indifferent
// classifier reads 0.5 instead of 0.
double discriminator_accuracy(const Tensor& clean_probs, const Tensor& perturbed_probs);

}  // namespace robustnmt
