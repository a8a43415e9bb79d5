// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <set>
#include <string>
#include <vector>

#include "doctest.h"
#include "robustnmt/data.hpp"
#include "robustnmt/error.hpp"
#include "robustnmt/rng.hpp"
#include "robustnmt/vocab.hpp"
#include "support/tmpdir.hpp"

using robustnmt::Batch;
using robustnmt::DataError;
using robustnmt::ParallelCorpus;
using robustnmt::RngStream;
using robustnmt::Sentence;
using robustnmt::Vocabulary;
using testsupport::TmpDir;

TEST_CASE("vocabulary orders tokens by frequency then first occurrence") {
  Vocabulary v = Vocabulary::build({"a b a", "b c"}, 10, 1);
  CHECK(v.size() == 7);  // 4 reserved + a, b, c
  CHECK(v.id_of("a") == 4);
  CHECK(v.id_of("b") == 5);
  CHECK(v.id_of("c") == 6);
  CHECK(v.count_of(4) == 2);
  CHECK(v.count_of(5) == 2);
  CHECK(v.count_of(6) == 1);
}

TEST_CASE("vocabulary honors min_freq and max_size") {
  Vocabulary freq2 = Vocabulary::build({"a b a", "b c"}, 10, 2);
  CHECK(freq2.size() == 6);
  CHECK(freq2.id_of("a") == 4);
  CHECK(freq2.id_of("b") == 5);
  CHECK(freq2.id_of("c") == Vocabulary::kUnk);

  Vocabulary cap1 = Vocabulary::build({"a b a", "b c"}, 1, 1);
  CHECK(cap1.size() == 5);
  CHECK(cap1.id_of("a") == 4);
  CHECK(cap1.id_of("b") == Vocabulary::kUnk);
}

TEST_CASE("vocabulary rejects an empty corpus") {
  CHECK_THROWS_AS(Vocabulary::build({}, 10, 1), DataError);
}

TEST_CASE("encode and decode round trip; unknown tokens map to UNK") {
  Vocabulary v = Vocabulary::build({"a b a", "b c"}, 10, 1);
  const std::vector<std::string> text = {"a", "b", "c"};
  Sentence ids = v.encode(text);
  CHECK(v.decode(ids) == text);
  CHECK(v.encode({"zebra"}) == Sentence{Vocabulary::kUnk});
  CHECK(v.decode({4, 5}) == std::vector<std::string>{"a", "b"});
  CHECK(v.token_of(Vocabulary::kUnk) == "<unk>");
  CHECK_THROWS_AS(v.token_of(99), DataError);
}

TEST_CASE("vocabulary file round trip keeps ids, tokens, and counts") {
  TmpDir tmp;
  Vocabulary v = Vocabulary::build({"a b a", "b c"}, 10, 1);
  const std::string path = tmp.file("vocab.tsv");
  v.save(path);
  Vocabulary r = Vocabulary::load(path);
  CHECK(r.size() == v.size());
  for (std::int32_t id = 0; id < static_cast<std::int32_t>(v.size()); ++id) {
    CHECK(r.token_of(id) == v.token_of(id));
    CHECK(r.count_of(id) == v.count_of(id));
  }
  CHECK_THROWS_AS(Vocabulary::load(tmp.file("missing.tsv")), DataError);
  CHECK_THROWS_AS(Vocabulary::load(tmp.write("bad.tsv", "no tab here\n")), DataError);
  CHECK_THROWS_AS(
      Vocabulary::load(tmp.write("badres.tsv", "<pad>\t0\n<unk>\t0\nwrong\t0\n<eos>\t0\n")),
      DataError);
}

TEST_CASE("batches pad with PAD, mask real tokens, and shift targets") {
  Sentence s1 = {4, 5, 6}, s2 = {7};
  Sentence t1 = {4, 5}, t2 = {6, 7, 8};
  Batch b = robustnmt::make_batch({s1, s2}, {t1, t2});
  CHECK(b.size == 2);
  CHECK(b.src_max == 3);
  CHECK(b.tgt_max == 4);  // longest target + BOS/EOS shift

  CHECK(b.src == std::vector<std::int32_t>{4, 5, 6, 7, 0, 0});
  CHECK(b.src_mask == std::vector<double>{1, 1, 1, 1, 0, 0});
  CHECK(b.src_len == std::vector<std::size_t>{3, 1});

  // row 0: in = BOS a b PAD, out = a b EOS PAD
  CHECK(b.tgt_in == std::vector<std::int32_t>{2, 4, 5, 0, 2, 6, 7, 8});
  CHECK(b.tgt_out == std::vector<std::int32_t>{4, 5, 3, 0, 6, 7, 8, 3});
  CHECK(b.tgt_mask == std::vector<double>{1, 1, 1, 0, 1, 1, 1, 1});
  CHECK(b.tgt_len == std::vector<std::size_t>{3, 4});

  // mask row sums equal stored lengths
  for (std::size_t i = 0; i < b.size; ++i) {
    double src_sum = 0.0, tgt_sum = 0.0;
    for (std::size_t j = 0; j < b.src_max; ++j) src_sum += b.src_mask[i * b.src_max + j];
    for (std::size_t j = 0; j < b.tgt_max; ++j) tgt_sum += b.tgt_mask[i * b.tgt_max + j];
    CHECK(src_sum == static_cast<double>(b.src_len[i]));
    CHECK(tgt_sum == static_cast<double>(b.tgt_len[i]));
  }

  CHECK(b.src_col(0) == std::vector<std::int32_t>{4, 7});
  CHECK(b.tgt_in_col(1) == std::vector<std::int32_t>{4, 6});
  CHECK(b.tgt_out_col(2) == std::vector<std::int32_t>{3, 8});
}

TEST_CASE("epoch batching covers every pair once and is seed-deterministic") {
  ParallelCorpus corpus;
  for (std::int32_t i = 0; i < 7; ++i) {
    corpus.source.push_back({static_cast<std::int32_t>(4 + i)});
    corpus.target.push_back({static_cast<std::int32_t>(4 + i)});
  }
  RngStream rng(33);
  auto batches = robustnmt::make_batches(corpus, 3, rng.split("epoch", 0));
  REQUIRE(batches.size() == 3);  // 3 + 3 + 1
  std::multiset<std::int32_t> seen;
  for (const Batch& b : batches)
    for (std::size_t i = 0; i < b.size; ++i) seen.insert(b.src[i * b.src_max]);
  CHECK(seen.size() == 7);
  for (std::int32_t i = 0; i < 7; ++i) CHECK(seen.count(4 + i) == 1);

  auto again = robustnmt::make_batches(corpus, 3, rng.split("epoch", 0));
  for (std::size_t k = 0; k < batches.size(); ++k) CHECK(batches[k].src == again[k].src);
  auto other = robustnmt::make_batches(corpus, 3, rng.split("epoch", 1));
  bool any_difference = false;
  for (std::size_t k = 0; k < batches.size(); ++k)
    if (batches[k].src != other[k].src) any_difference = true;
  CHECK(any_difference);

  auto singles = robustnmt::make_batches(corpus, 1, rng.split("epoch", 2));
  CHECK(singles.size() == 7);
  for (const Batch& b : singles) {
    CHECK(b.size == 1);
    CHECK(b.src_max == 1);  // no padding needed
  }
  CHECK_THROWS_AS(robustnmt::make_batches(corpus, 0, rng), robustnmt::ConfigError);
}

TEST_CASE("parallel corpus loading aligns, filters, and validates") {
  TmpDir tmp;
  Vocabulary v = Vocabulary::build({"a b c d e f g h"}, 50, 1);
  const std::string src =
      tmp.write("train.src", "a b c\n\nd e\na a a a a\nf\n");
  const std::string tgt =
      tmp.write("train.tgt", "c b a\nq\ne d\nb b b b b\ng\n");

  ParallelCorpus corpus = robustnmt::load_parallel_corpus(src, tgt, v, v, 4);
  // line 2 empty source, line 4 exceeds max_len 4 -> both dropped
  REQUIRE(corpus.size() == 3);
  CHECK(corpus.source[0] == Sentence{4, 5, 6});
  CHECK(corpus.target[0] == Sentence{6, 5, 4});
  CHECK(corpus.source[2] == Sentence{9});

  const std::string short_tgt = tmp.write("short.tgt", "x\n");
  CHECK_THROWS_AS(robustnmt::load_parallel_corpus(src, short_tgt, v, v, 10), DataError);
  CHECK_THROWS_AS(robustnmt::load_parallel_corpus(tmp.file("nope.src"), tgt, v, v, 10),
                  DataError);
  const std::string empty_src = tmp.write("empty.src", "\n\n");
  const std::string empty_tgt = tmp.write("empty.tgt", "\n\n");
  CHECK_THROWS_AS(robustnmt::load_parallel_corpus(empty_src, empty_tgt, v, v, 10), DataError);
}
