// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <vector>

#include "robustnmt/rng.hpp"
#include "robustnmt/tensor.hpp"
#include "robustnmt/vocab.hpp"

namespace robustnmt {

enum class PerturbKind { kLexical, kFeature, kSwap, kReplaceUniform, kDelete };

// Which generator to apply and its knobs. Exactly one kind is active; the
// fields the kind does not use are ignored.
struct PerturbationSpec {
  PerturbKind kind = PerturbKind::kLexical;
  double ratio = 0.2;    // lexical: fraction of positions to replace
  double sigma = 0.01;   // feature: noise scale
  std::size_t n_ops = 0; // swap / replace-uniform / delete: operation count

  void validate() const;  // ratio in (0,1], sigma >= 0
};

PerturbKind perturb_kind_from_name(const std::string& name);
const char* perturb_kind_name(PerturbKind kind);

// floor(ratio * length), clamped below by 1.
std::size_t num_replacements(std::size_t length, double ratio);

// Replacement distribution for one content word: mass proportional to
// exp(cosine(E[word_id], E[x])) over content ids, zero on word_id itself and
// on all reserved ids. A zero-norm embedding row contributes cosine 0.
// Returned vector has one entry per vocabulary id and sums to 1.
std::vector<double> lexical_distribution(const Tensor& embeddings, std::int32_t word_id);

// Replaces num_replacements(|x|, ratio) uniformly chosen content positions
// (ids >= 4; the count is clamped to the number of such positions) with draws
// from lexical_distribution. Length is preserved.
Sentence perturb_lexical(const Sentence& x, const Tensor& embeddings,
                         const PerturbationSpec& spec, RngStream& rng);

// Adds an independent N(0, sigma^2 I) draw to every position vector.
std::vector<std::vector<double>> perturb_feature(const std::vector<std::vector<double>>& embedded,
                                                 double sigma, RngStream& rng);

// Evaluation-time synthetic noise. swap: n_ops distinct positions i < |x|-1,
// each swapped with its right neighbour, applied in ascending position order.
// replace-uniform: n_ops distinct content positions replaced with uniform
// draws from the content vocabulary minus the current word. delete: n_ops
// distinct positions removed, clamped so at least one token remains.
Sentence synth_perturb(const Sentence& x, const PerturbationSpec& spec,
                       std::size_t vocab_size, RngStream& rng);

}  // namespace robustnmt
