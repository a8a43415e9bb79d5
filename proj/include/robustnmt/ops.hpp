// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <vector>

#include "robustnmt/rng.hpp"
#include "robustnmt/tape.hpp"
#include "robustnmt/tensor.hpp"

// Differentiable primitive catalog. Every op validates operand shapes
// (ShapeError naming the op and shapes on mismatch), computes the forward
// value, and records a backward closure on the tape. Gradients accumulate:
// closures add into input grads, never overwrite.
namespace robustnmt::ops {

// C = A * B, [m,k] x [k,n] -> [m,n].
Tensor matmul(Tape& tape, const Tensor& a, const Tensor& b);

// C = A * B^T, [m,k] x [n,k] -> [m,n]. Used where a weight matrix is stored
// output-major, e.g. producing logits against a tied embedding table.
Tensor matmul_nt(Tape& tape, const Tensor& a, const Tensor& b);

// Elementwise sum. Accepts equal shapes (any rank), [m,n] + [n] (row
// broadcast), and [m,n] + [m,1] (column broadcast).
Tensor add(Tape& tape, const Tensor& a, const Tensor& b);

// Elementwise difference; equal shapes only.
Tensor sub(Tape& tape, const Tensor& a, const Tensor& b);

// Elementwise product. Accepts equal shapes (any rank) and [m,n] * [m,1].
Tensor mul(Tape& tape, const Tensor& a, const Tensor& b);

Tensor scale(Tape& tape, const Tensor& x, double c);  // c * x
Tensor shift(Tape& tape, const Tensor& x, double c);  // x + c

Tensor sigmoid(Tape& tape, const Tensor& x);
Tensor tanh(Tape& tape, const Tensor& x);
Tensor relu(Tape& tape, const Tensor& x);

// Row-wise over the last axis; input is [n] or [m,n].
Tensor softmax(Tape& tape, const Tensor& x);
Tensor log_softmax(Tape& tape, const Tensor& x);

// Rows of `table` ([V,D]) selected by id -> [ids.size(), D].
Tensor embedding_gather(Tape& tape, const Tensor& table,
                        const std::vector<std::int32_t>& ids);

// Column-wise concatenation of 2-D tensors with equal row counts.
Tensor concat(Tape& tape, const std::vector<Tensor>& parts);
Tensor concat(Tape& tape, const Tensor& a, const Tensor& b);

// Columns [c0, c1) of a 2-D tensor.
Tensor slice_cols(Tape& tape, const Tensor& x, std::size_t c0, std::size_t c1);

// M tensors of shape [B,H] stacked along a new middle axis -> [B,M,H].
Tensor stack_time(Tape& tape, const std::vector<Tensor>& steps);

// Same element count, new shape; values pass through untouched.
Tensor reshape(Tape& tape, const Tensor& x, std::vector<std::size_t> shape);

Tensor sum(Tape& tape, const Tensor& x);   // scalar
Tensor mean(Tape& tape, const Tensor& x);  // scalar

// Row-wise normalization of [m,n] with affine parameters gamma, beta ([n]).
// The row variance is floored at 1e-6 before the reciprocal square root; on
// the floored branch the variance contributes no gradient.
Tensor layer_norm(Tape& tape, const Tensor& x, const Tensor& gamma, const Tensor& beta);

// Inverted dropout: at train time each element is kept with probability 1-p
// and scaled by 1/(1-p); kept/dropped decisions come from `rng`. When train
// is false or p == 0 the input tensor is returned unchanged.
Tensor dropout(Tape& tape, const Tensor& x, double p, RngStream& rng, bool train);

// 1-D convolution over the time axis: x [B,M,D], kernel [C,W,D], bias [C]
// -> [B, M-W+1, C]. Requires M >= W; callers pad shorter sequences.
Tensor conv1d(Tape& tape, const Tensor& x, const Tensor& kernel, const Tensor& bias);

// Per-channel max over the leading `valid[b]` time positions of x [B,P,C]
// -> [B,C]. Each valid[b] must be in [1, P]. Ties resolve to the earliest
// position, which is where the gradient goes.
Tensor max_over_time(Tape& tape, const Tensor& x, const std::vector<std::size_t>& valid);

// Mean over elements of -(t*log p + (1-t)*log(1-p)) with p clamped to
// [1e-7, 1-1e-7]; clamped elements get zero gradient. `targets` holds one
// 0/1 value per element of `probs`.
Tensor binary_cross_entropy(Tape& tape, const Tensor& probs,
                            const std::vector<double>& targets);

// Per-row negative log-likelihood of `targets[b]` under softmax(logits[b,:]),
// computed log-sum-exp stably; logits [B,V] -> [B,1].
Tensor categorical_cross_entropy(Tape& tape, const Tensor& logits,
                                 const std::vector<std::int32_t>& targets);

// y = x + sigma * eps with eps ~ N(0, I) drawn from `rng`; gradient passes
// through unchanged.
Tensor gaussian_noise_add(Tape& tape, const Tensor& x, double sigma, RngStream& rng);

// Identity forward; backward multiplies the incoming gradient by -1.
Tensor grad_reverse(Tape& tape, const Tensor& x);

}  // namespace robustnmt::ops
