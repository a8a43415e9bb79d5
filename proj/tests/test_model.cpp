// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <cstdlib>
#include <set>
#include <string>
#include <vector>

#include "doctest.h"
#include "robustnmt/data.hpp"
#include "robustnmt/error.hpp"
#include "robustnmt/model.hpp"
#include "robustnmt/ops.hpp"

using namespace robustnmt;

namespace {

ModelConfig tiny_config() {
  ModelConfig cfg;
  cfg.src_vocab = 9;
  cfg.tgt_vocab = 8;
  cfg.embed_dim = 3;
  cfg.hidden_dim = 4;
  cfg.dropout = 0.1;
  cfg.max_decode_len = 12;
  return cfg;
}

ModelParams tiny_params(std::uint64_t seed = 11) {
  RngStream rng("init", seed);
  return ModelParams::init(tiny_config(), rng);
}

void zero_all(ModelParams& params) {
  for (NamedTensor np : params.all())
    for (double& v : np.tensor.values()) v = 0.0;
}

// Two sentences with unequal lengths so source padding is exercised.
Batch tiny_batch() { return make_batch({{4, 5, 6}, {5, 6}}, {{4, 5}, {5}}); }

// One sentence, one real decoding step (label + nothing else).
Batch single_step_batch(std::int32_t label) {
  Batch b;
  b.size = 1;
  b.src_max = 2;
  b.tgt_max = 1;
  b.src = {4, 5};
  b.src_mask = {1.0, 1.0};
  b.src_len = {2};
  b.tgt_in = {Vocabulary::kBos};
  b.tgt_out = {label};
  b.tgt_mask = {1.0};
  b.tgt_len = {1};
  return b;
}

double eval_nll(const ModelParams& params, const Batch& batch) {
  Tape tape;
  RngStream rng("eval", 0);
  return sentence_nll(tape, params, batch, /*train=*/false, rng).values()[0];
}

}  // namespace

TEST_CASE("config validation rejects out-of-range fields") {
  ModelConfig cfg = tiny_config();
  CHECK_NOTHROW(cfg.validate());
  ModelConfig bad = cfg;
  bad.layers = 1;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = cfg;
  bad.dropout = 1.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = cfg;
  bad.src_vocab = Vocabulary::kReserved;  // reserved rows only, no content
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = cfg;
  bad.hidden_dim = 0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("parameter registry names every tensor exactly once") {
  ModelParams params = tiny_params();
  std::vector<NamedTensor> all = params.all();
  CHECK(all.size() == params.encoder_group().size() + params.decoder_group().size());
  std::set<std::string> names;
  for (const NamedTensor& np : all) {
    CHECK(np.tensor.defined());
    CHECK(np.tensor.requires_grad());
    names.insert(np.name);
  }
  CHECK(names.size() == all.size());
  // Same seed, same draws, independent of construction interleaving.
  ModelParams again = tiny_params();
  for (std::size_t i = 0; i < all.size(); ++i)
    CHECK(all[i].tensor.values() == again.all()[i].tensor.values());
}

TEST_CASE("encode produces one state per source position, zero on padding") {
  ModelParams params = tiny_params();
  Batch batch = tiny_batch();
  Tape tape;
  RngStream rng("enc", 3);
  EncoderStates enc = encode(tape, params, batch, /*train=*/false, rng);

  CHECK(enc.steps == batch.src_max);
  CHECK(enc.states.size() == batch.src_max);
  for (const Tensor& h : enc.states)
    CHECK(h.shape() == std::vector<std::size_t>{2, 4});
  // Sentence 1 has length 2; its position-2 state must be exactly zero.
  for (double v : std::vector<double>(enc.states[2].values().begin() + 4,
                                      enc.states[2].values().end()))
    CHECK(v == 0.0);
  // Real positions are not all zero.
  double mag = 0.0;
  for (double v : enc.states[0].values()) mag += std::fabs(v);
  CHECK(mag > 0.0);
}

TEST_CASE("encode rejects empty and mismatched input") {
  ModelParams params = tiny_params();
  Batch batch = tiny_batch();
  Tape tape;
  RngStream rng("enc", 3);
  CHECK_THROWS_AS(encode(tape, params, std::vector<Tensor>{}, batch, false, rng), ShapeError);
  std::vector<Tensor> two = {Tensor::zeros({2, 3}), Tensor::zeros({2, 3})};
  CHECK_THROWS_AS(encode(tape, params, two, batch, false, rng), ShapeError);  // batch has M=3
}

TEST_CASE("id path equals the pre-embedded path on the same input") {
  ModelParams params = tiny_params();
  Batch batch = tiny_batch();
  Tape tape;
  RngStream r1("enc", 3), r2("enc", 3);
  EncoderStates a = encode(tape, params, batch, false, r1);
  EncoderStates b = encode(tape, params, embed_source(tape, params, batch), batch, false, r2);
  for (std::size_t t = 0; t < a.steps; ++t)
    CHECK(a.states[t].values() == b.states[t].values());
  CHECK(a.mean_state.values() == b.mean_state.values());
}

TEST_CASE("padding invariance: extra padded positions leave states and loss unchanged") {
  ModelParams params = tiny_params();

  Batch plain = make_batch({{4, 5}}, {{6}});
  Batch padded;
  padded.size = 1;
  padded.src_max = 4;
  padded.tgt_max = 3;
  padded.src = {4, 5, Vocabulary::kPad, Vocabulary::kPad};
  padded.src_mask = {1, 1, 0, 0};
  padded.src_len = {2};
  padded.tgt_in = {Vocabulary::kBos, 6, Vocabulary::kPad};
  padded.tgt_out = {6, Vocabulary::kEos, Vocabulary::kPad};
  padded.tgt_mask = {1, 1, 0};
  padded.tgt_len = {2};

  Tape tape;
  RngStream r1("pad", 5), r2("pad", 5);
  EncoderStates ea = encode(tape, params, plain, false, r1);
  EncoderStates eb = encode(tape, params, padded, false, r2);
  for (std::size_t t = 0; t < ea.steps; ++t)
    for (std::size_t i = 0; i < ea.states[t].numel(); ++i)
      CHECK(std::fabs(ea.states[t].values()[i] - eb.states[t].values()[i]) <= 1e-12);
  for (std::size_t i = 0; i < ea.mean_state.numel(); ++i)
    CHECK(std::fabs(ea.mean_state.values()[i] - eb.mean_state.values()[i]) <= 1e-12);

  // Attention puts exactly zero weight on the padded tail.
  DecoderState sa = decoder_init_state(tape, params, ea);
  DecoderState sb = decoder_init_state(tape, params, eb);
  AttentionResult aa = attention(tape, params, sa, ea);
  AttentionResult ab = attention(tape, params, sb, eb);
  CHECK(ab.weights.values()[2] == 0.0);
  CHECK(ab.weights.values()[3] == 0.0);
  for (std::size_t i = 0; i < 2; ++i)
    CHECK(std::fabs(aa.weights.values()[i] - ab.weights.values()[i]) <= 1e-12);

  CHECK(std::fabs(eval_nll(params, plain) - eval_nll(params, padded)) <= 1e-12);
}

TEST_CASE("eval-mode forward is deterministic; train mode uses the stream") {
  ModelParams params = tiny_params();
  Batch batch = tiny_batch();
  CHECK(eval_nll(params, batch) == eval_nll(params, batch));

  auto train_nll = [&](std::uint64_t seed) {
    Tape tape;
    RngStream rng("drop", seed);
    return sentence_nll(tape, params, batch, /*train=*/true, rng).values()[0];
  };
  CHECK(train_nll(7) == train_nll(7));
  CHECK(train_nll(7) != train_nll(8));
}

TEST_CASE("attention weights sum to 1 and are uniform when scores are equal") {
  ModelParams params = tiny_params();
  Batch batch = tiny_batch();
  Tape tape;
  RngStream rng("attn", 9);
  EncoderStates enc = encode(tape, params, batch, false, rng);
  DecoderState st = decoder_init_state(tape, params, enc);

  AttentionResult att = attention(tape, params, st, enc);
  CHECK(att.weights.shape() == std::vector<std::size_t>{2, 3});
  for (std::size_t b = 0; b < 2; ++b) {
    double total = 0.0;
    for (std::size_t t = 0; t < 3; ++t) total += att.weights.values()[b * 3 + t];
    CHECK(total == doctest::Approx(1.0).epsilon(1e-9));
  }
  CHECK(att.weights.values()[1 * 3 + 2] == 0.0);  // masked position, exact zero

  // Zero scoring vector -> all scores equal -> uniform over real positions.
  for (double& v : params.attn_v.values()) v = 0.0;
  AttentionResult uni = attention(tape, params, st, enc);
  for (std::size_t t = 0; t < 3; ++t)
    CHECK(uni.weights.values()[t] == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
  CHECK(uni.weights.values()[1 * 3 + 0] == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(uni.weights.values()[1 * 3 + 1] == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(uni.weights.values()[1 * 3 + 2] == 0.0);
}

TEST_CASE("decode_step logits softmax to a distribution; zero params give uniform") {
  ModelParams params = tiny_params();
  Batch batch = tiny_batch();
  Tape tape;
  RngStream rng("dec", 2);
  EncoderStates enc = encode(tape, params, batch, false, rng);
  DecoderState st = decoder_init_state(tape, params, enc);
  DecodeResult out = decode_step(tape, params, batch.tgt_in_col(0), st, enc, false, rng);

  CHECK(out.logits.shape() == std::vector<std::size_t>{2, 8});
  CHECK(out.state.step == 1);
  Tensor probs = ops::softmax(tape, out.logits);
  for (std::size_t b = 0; b < 2; ++b) {
    double total = 0.0;
    for (std::size_t v = 0; v < 8; ++v) total += probs.values()[b * 8 + v];
    CHECK(total == doctest::Approx(1.0).epsilon(1e-9));
  }

  ModelParams zeroed = tiny_params();
  zero_all(zeroed);
  Tape t2;
  RngStream r2("dec", 2);
  EncoderStates enc0 = encode(t2, zeroed, batch, false, r2);
  DecodeResult flat = decode_step(t2, zeroed, batch.tgt_in_col(0), decoder_init_state(t2, zeroed, enc0),
                                  enc0, false, r2);
  for (double v : flat.logits.values()) CHECK(v == 0.0);
}

TEST_CASE("tied embeddings: a target embedding row moves exactly its own logit") {
  ModelParams params = tiny_params();
  Batch batch = tiny_batch();
  auto run = [&](const ModelParams& p) {
    Tape tape;
    RngStream rng("tie", 4);
    EncoderStates enc = encode(tape, p, batch, false, rng);
    DecoderState st = decoder_init_state(tape, p, enc);
    // Previous token 2 (BOS) so the probed row 5 is not the input embedding.
    return decode_step(tape, p, {Vocabulary::kBos, Vocabulary::kBos}, st, enc, false, rng)
        .logits.values();
  };
  std::vector<double> base = run(params);
  const std::size_t k = 5;
  params.tgt_embed.values()[k * 3 + 1] += 0.25;
  std::vector<double> bumped = run(params);
  for (std::size_t b = 0; b < 2; ++b)
    for (std::size_t v = 0; v < 8; ++v) {
      if (v == k)
        CHECK(bumped[b * 8 + v] != base[b * 8 + v]);
      else
        CHECK(bumped[b * 8 + v] == base[b * 8 + v]);
    }
}

TEST_CASE("uniform single-step NLL equals log V") {
  ModelParams params = tiny_params();
  zero_all(params);
  Batch batch = single_step_batch(/*label=*/6);
  CHECK(eval_nll(params, batch) == doctest::Approx(std::log(8.0)).epsilon(1e-12));
}

TEST_CASE("lowering the correct label's logit increases the NLL") {
  ModelParams params = tiny_params();
  Batch batch = single_step_batch(/*label=*/6);
  double before = eval_nll(params, batch);
  params.out_bias.values()[6] -= 0.5;
  CHECK(eval_nll(params, batch) > before);
}

TEST_CASE("sentence NLL factors into independent per-step cross-entropies") {
  ModelParams params = tiny_params();
  Batch batch = make_batch({{4, 5, 6}}, {{6, 7, 5}});
  const double nll = eval_nll(params, batch);

  Tape tape;
  RngStream rng("fact", 0);
  EncoderStates enc = encode(tape, params, batch, false, rng);
  DecoderState st = decoder_init_state(tape, params, enc);
  double total = 0.0;
  double product = 1.0;
  for (std::size_t t = 0; t < batch.tgt_max; ++t) {
    DecodeResult out = decode_step(tape, params, batch.tgt_in_col(t), st, enc, false, rng);
    st = out.state;
    Tape scratch;
    total += ops::categorical_cross_entropy(scratch, out.logits, batch.tgt_out_col(t)).values()[0];
    Tensor probs = ops::softmax(scratch, out.logits);
    product *= probs.values()[static_cast<std::size_t>(batch.tgt_out_col(t)[0])];
  }
  CHECK(std::fabs(nll - total) <= 1e-12);
  // Chain rule of the sequence probability: exp(-NLL) is the product of the
  // per-step reference-token probabilities.
  CHECK(std::exp(-nll) == doctest::Approx(product).epsilon(1e-9));
}

TEST_CASE("sentence_nll gradient matches finite differences for every parameter") {
  ModelConfig cfg = tiny_config();
  cfg.dropout = 0.0;
  RngStream init("init", 17);
  ModelParams params = ModelParams::init(cfg, init);
  Batch batch = tiny_batch();

  Tape tape;
  RngStream rng("fd", 0);
  Tensor loss = sentence_nll(tape, params, batch, /*train=*/false, rng);
  tape.backward(loss);

  const double h = 1e-5;
  for (NamedTensor np : params.all()) {
    REQUIRE_MESSAGE(np.tensor.has_grad(), np.name);
    const std::vector<double> analytic = np.tensor.grad();
    std::vector<double>& vals = np.tensor.values();
    double worst = 0.0;
    for (std::size_t i = 0; i < vals.size(); ++i) {
      const double keep = vals[i];
      vals[i] = keep + h;
      const double hi = eval_nll(params, batch);
      vals[i] = keep - h;
      const double lo = eval_nll(params, batch);
      vals[i] = keep;
      const double fd = (hi - lo) / (2.0 * h);
      const double denom = std::max({1.0, std::fabs(analytic[i]), std::fabs(fd)});
      worst = std::max(worst, std::fabs(analytic[i] - fd) / denom);
    }
    CHECK_MESSAGE(worst <= 1e-4, np.name, " worst rel err ", worst);
  }
}
