// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "robustnmt/rng.hpp"
#include "robustnmt/vocab.hpp"

namespace robustnmt {

// Aligned sentence pairs, already numericalized.
struct ParallelCorpus {
  std::vector<Sentence> source;
  std::vector<Sentence> target;
  std::size_t size() const { return source.size(); }
};

// One padded training batch. Id matrices and masks are row-major [batch, max
// length]; target rows carry the shifted forms the decoder consumes (inputs
// BOS-prefixed, labels EOS-suffixed, both therefore |y|+1 long).
struct Batch {
  std::size_t size = 0;
  std::size_t src_max = 0;
  std::size_t tgt_max = 0;

  std::vector<std::int32_t> src;      // [size, src_max], PAD-filled
  std::vector<double> src_mask;       // 1.0 on real source tokens
  std::vector<std::size_t> src_len;

  std::vector<std::int32_t> tgt_in;   // [size, tgt_max], BOS + y
  std::vector<std::int32_t> tgt_out;  // [size, tgt_max], y + EOS
  std::vector<double> tgt_mask;       // 1.0 on real label positions
  std::vector<std::size_t> tgt_len;   // counts y + EOS

  std::vector<std::int32_t> src_col(std::size_t t) const;
  std::vector<std::int32_t> tgt_in_col(std::size_t t) const;
  std::vector<std::int32_t> tgt_out_col(std::size_t t) const;
};

std::vector<std::string> read_lines(const std::string& path);

// Encodes two line-aligned files, dropping pairs where either side is empty
// or longer than max_len tokens. Fails on missing files, diverging line
// counts, or when nothing survives the filter.
ParallelCorpus load_parallel_corpus(const std::string& src_path, const std::string& tgt_path,
                                    const Vocabulary& src_vocab, const Vocabulary& tgt_vocab,
                                    std::size_t max_len);

// Source-only batch of one sentence, for decoding: the target side stays
// empty because decoders supply their own previous-token ids.
Batch make_source_batch(const Sentence& x);

// Assembles one batch from explicit pairs, in the given order.
Batch make_batch(const std::vector<Sentence>& src, const std::vector<Sentence>& tgt);

// Shuffles the corpus with `rng` and cuts it into consecutive batches; the
// final batch may be smaller. Every pair appears in exactly one batch.
std::vector<Batch> make_batches(const ParallelCorpus& corpus, std::size_t batch_size,
                                RngStream rng);

}  // namespace robustnmt
