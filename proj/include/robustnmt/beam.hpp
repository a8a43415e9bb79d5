// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <vector>

#include "robustnmt/model.hpp"

// Beam-search decoding over a trained translation model. Scores are
// length-normalized: the summed token log-probabilities divided by the token
// count, where a finished hypothesis counts its terminating EOS. Without the
// normalization wider beams collapse to very short outputs on small models.
namespace robustnmt {

struct Hypothesis {
  Sentence ids;          // emitted tokens, EOS excluded
  double logprob = 0.0;  // length-normalized log-probability
  bool finished = false; // ended on EOS rather than the length cap
};

// Standard beam search from BOS. Each step expands every live hypothesis
// over the full target vocabulary, keeps the `beam` best extensions by
// summed log-probability, and retires the ones that picked EOS. The best
// retired or length-capped hypothesis under the normalized score wins.
// beam=1 is greedy argmax decoding. Errors follow the encoder's: an empty
// source is rejected there.
Hypothesis beam_search(const ModelParams& params, const Sentence& x,
                       std::size_t beam = 10, std::size_t max_len = 50);

// Same search from source states already encoded on `tape`; lets callers
// decode from perturbed embeddings.
Hypothesis beam_search_from(Tape& tape, const ModelParams& params,
                            const EncoderStates& enc, std::size_t beam,
                            std::size_t max_len);

// Decodes every source sentence with max_len from the model configuration.
std::vector<Sentence> translate_corpus(const ModelParams& params,
                                       const std::vector<Sentence>& sources,
                                       std::size_t beam);

}  // namespace robustnmt
