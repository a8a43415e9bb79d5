// SPDX-License-Identifier: Apache-2.0

#include "robustnmt/data.hpp"

#include <algorithm>
#include <fstream>

#include "robustnmt/error.hpp"

namespace robustnmt {

std::vector<std::int32_t> Batch::src_col(std::size_t t) const {
  std::vector<std::int32_t> col(size);
  for (std::size_t i = 0; i < size; ++i) col[i] = src[i * src_max + t];
  return col;
}

std::vector<std::int32_t> Batch::tgt_in_col(std::size_t t) const {
  std::vector<std::int32_t> col(size);
  for (std::size_t i = 0; i < size; ++i) col[i] = tgt_in[i * tgt_max + t];
  return col;
}

std::vector<std::int32_t> Batch::tgt_out_col(std::size_t t) const {
  std::vector<std::int32_t> col(size);
  for (std::size_t i = 0; i < size; ++i) col[i] = tgt_out[i * tgt_max + t];
  return col;
}

std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read " + path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) lines.push_back(std::move(line));
  return lines;
}

ParallelCorpus load_parallel_corpus(const std::string& src_path, const std::string& tgt_path,
                                    const Vocabulary& src_vocab, const Vocabulary& tgt_vocab,
                                    std::size_t max_len) {
  const std::vector<std::string> src_lines = read_lines(src_path);
  const std::vector<std::string> tgt_lines = read_lines(tgt_path);
  if (src_lines.size() != tgt_lines.size())
    throw DataError("parallel corpus: " + src_path + " has " +
                    std::to_string(src_lines.size()) + " lines but " + tgt_path + " has " +
                    std::to_string(tgt_lines.size()));
  ParallelCorpus corpus;
  for (std::size_t i = 0; i < src_lines.size(); ++i) {
    Sentence s = src_vocab.encode(split_tokens(src_lines[i]));
    Sentence t = tgt_vocab.encode(split_tokens(tgt_lines[i]));
    if (s.empty() || t.empty()) continue;
    if (s.size() > max_len || t.size() > max_len) continue;
    corpus.source.push_back(std::move(s));
    corpus.target.push_back(std::move(t));
  }
  if (corpus.size() == 0)
    throw DataError("parallel corpus: no sentence pairs survived filtering (" + src_path +
                    ", " + tgt_path + ")");
  return corpus;
}

Batch make_source_batch(const Sentence& x) {
  if (x.empty()) throw DataError("make_source_batch: empty sentence");
  Batch b;
  b.size = 1;
  b.src_max = x.size();
  b.src = x;
  b.src_mask.assign(x.size(), 1.0);
  b.src_len = {x.size()};
  return b;
}

Batch make_batch(const std::vector<Sentence>& src, const std::vector<Sentence>& tgt) {
  if (src.empty() || src.size() != tgt.size())
    throw DataError("make_batch: " + std::to_string(src.size()) + " source vs " +
                    std::to_string(tgt.size()) + " target sentences");
  Batch b;
  b.size = src.size();
  for (const Sentence& s : src) b.src_max = std::max(b.src_max, s.size());
  for (const Sentence& t : tgt) b.tgt_max = std::max(b.tgt_max, t.size() + 1);  // +BOS / +EOS

  b.src.assign(b.size * b.src_max, Vocabulary::kPad);
  b.src_mask.assign(b.size * b.src_max, 0.0);
  b.tgt_in.assign(b.size * b.tgt_max, Vocabulary::kPad);
  b.tgt_out.assign(b.size * b.tgt_max, Vocabulary::kPad);
  b.tgt_mask.assign(b.size * b.tgt_max, 0.0);

  for (std::size_t i = 0; i < b.size; ++i) {
    const Sentence& s = src[i];
    b.src_len.push_back(s.size());
    for (std::size_t j = 0; j < s.size(); ++j) {
      b.src[i * b.src_max + j] = s[j];
      b.src_mask[i * b.src_max + j] = 1.0;
    }
    const Sentence& t = tgt[i];
    b.tgt_len.push_back(t.size() + 1);
    b.tgt_in[i * b.tgt_max + 0] = Vocabulary::kBos;
    for (std::size_t j = 0; j < t.size(); ++j) {
      b.tgt_in[i * b.tgt_max + j + 1] = t[j];
      b.tgt_out[i * b.tgt_max + j] = t[j];
    }
    b.tgt_out[i * b.tgt_max + t.size()] = Vocabulary::kEos;
    for (std::size_t j = 0; j <= t.size(); ++j) b.tgt_mask[i * b.tgt_max + j] = 1.0;
  }
  return b;
}

std::vector<Batch> make_batches(const ParallelCorpus& corpus, std::size_t batch_size,
                                RngStream rng) {
  if (batch_size < 1) throw ConfigError("make_batches: batch_size must be >= 1");
  std::vector<std::size_t> order(corpus.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  for (std::size_t i = order.size(); i > 1; --i)
    std::swap(order[i - 1], order[rng.next_below(i)]);

  std::vector<Batch> batches;
  for (std::size_t at = 0; at < order.size(); at += batch_size) {
    const std::size_t end = std::min(at + batch_size, order.size());
    std::vector<Sentence> src, tgt;
    for (std::size_t i = at; i < end; ++i) {
      src.push_back(corpus.source[order[i]]);
      tgt.push_back(corpus.target[order[i]]);
    }
    batches.push_back(make_batch(src, tgt));
  }
  return batches;
}

}  // namespace robustnmt
