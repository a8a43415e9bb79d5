// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstddef>
#include <vector>

#include "robustnmt/vocab.hpp"

// Corpus-level 4-gram BLEU with modified (clipped) precisions, in [0, 1].
// Single reference per hypothesis. The brevity penalty is
// min(1, exp(1 - ref_len/hyp_len)) over corpus totals.
//
// Unsmoothed, any order with candidate n-grams but zero matches drives the
// score to 0; orders with no candidate n-grams anywhere in the corpus (all
// hypotheses shorter than n) are dropped from the geometric mean, so a
// corpus that equals its references scores exactly 1 at any length. The
// add-one flag replaces every precision with (matches+1)/(total+1) and keeps
// all four orders in the mean; short-sentence corpora want it because p_4
// zeroes out so easily.
namespace robustnmt {

struct BleuReport {
  std::array<double, 4> precisions{};      // p_1..p_4 as scored
  std::array<std::size_t, 4> matches{};    // clipped n-gram matches
  std::array<std::size_t, 4> totals{};     // candidate n-gram counts
  double brevity_penalty = 0.0;
  double score = 0.0;
  std::size_t hyp_length = 0;
  std::size_t ref_length = 0;
  bool smoothed = false;
};

// DataError on an empty hypothesis set or diverging list lengths.
BleuReport corpus_bleu(const std::vector<Sentence>& hypotheses,
                       const std::vector<Sentence>& references,
                       bool add_one_smoothing = false);

}  // namespace robustnmt
