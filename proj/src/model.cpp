// SPDX-License-Identifier: Apache-2.0

#include "robustnmt/model.hpp"

#include <cmath>
#include <utility>

#include "robustnmt/error.hpp"
#include "robustnmt/vocab.hpp"

namespace robustnmt {
namespace {

Tensor uniform_tensor(RngStream& root, const std::string& name,
                      std::vector<std::size_t> shape, double limit) {
  RngStream s = root.split(name);
  std::vector<double> v(shape_numel(shape));
  for (double& x : v) x = limit * (2.0 * s.next_double() - 1.0);
  return Tensor::from(std::move(shape), std::move(v), /*requires_grad=*/true);
}

Tensor glorot_tensor(RngStream& root, const std::string& name, std::size_t rows,
                     std::size_t cols) {
  const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
  return uniform_tensor(root, name, {rows, cols}, limit);
}

Tensor ones_tensor(std::size_t n) {
  return Tensor::from({n}, std::vector<double>(n, 1.0), true);
}

Tensor zeros_param(std::vector<std::size_t> shape) {
  return Tensor::zeros(std::move(shape), /*requires_grad=*/true);
}

Tensor affine(Tape& tape, const Tensor& x, const Tensor& w, const Tensor& b) {
  return ops::add(tape, ops::matmul(tape, x, w), b);
}

// Column t of the source mask as a [B,1] constant.
Tensor source_mask_col(const Batch& batch, std::size_t t) {
  std::vector<double> v(batch.size);
  for (std::size_t b = 0; b < batch.size; ++b) v[b] = batch.src_mask[b * batch.src_max + t];
  return Tensor::from({batch.size, 1}, std::move(v), false);
}

Tensor target_mask_col(const Batch& batch, std::size_t t) {
  std::vector<double> v(batch.size);
  for (std::size_t b = 0; b < batch.size; ++b) v[b] = batch.tgt_mask[b * batch.tgt_max + t];
  return Tensor::from({batch.size, 1}, std::move(v), false);
}

}  // namespace

void ModelConfig::validate() const {
  if (src_vocab <= Vocabulary::kReserved || tgt_vocab <= Vocabulary::kReserved)
    throw ConfigError("model: vocab sizes must exceed the reserved id range");
  if (embed_dim == 0 || hidden_dim == 0)
    throw ConfigError("model: embedding and hidden dims must be >= 1");
  if (layers != 2) throw ConfigError("model: layer count is fixed at 2");
  if (!(dropout >= 0.0 && dropout < 1.0))
    throw ConfigError("model: dropout must lie in [0, 1)");
  if (max_decode_len == 0) throw ConfigError("model: max decode length must be >= 1");
}

GruCell GruCell::make(std::size_t in_dim, std::size_t hidden, RngStream& rng) {
  GruCell cell;
  cell.wr = glorot_tensor(rng, "wr", in_dim, hidden);
  cell.wz = glorot_tensor(rng, "wz", in_dim, hidden);
  cell.wc = glorot_tensor(rng, "wc", in_dim, hidden);
  cell.ur = glorot_tensor(rng, "ur", hidden, hidden);
  cell.uz = glorot_tensor(rng, "uz", hidden, hidden);
  cell.uc = glorot_tensor(rng, "uc", hidden, hidden);
  cell.ln_rg = ones_tensor(hidden);
  cell.ln_rb = zeros_param({hidden});
  cell.ln_zg = ones_tensor(hidden);
  cell.ln_zb = zeros_param({hidden});
  cell.ln_cg = ones_tensor(hidden);
  cell.ln_cb = zeros_param({hidden});
  return cell;
}

namespace {

Tensor copy_tensor(const Tensor& t) {
  return Tensor::from(t.shape(), t.values(), t.requires_grad());
}

}  // namespace

GruCell GruCell::clone() const {
  GruCell c;
  c.wr = copy_tensor(wr);
  c.wz = copy_tensor(wz);
  c.wc = copy_tensor(wc);
  c.ur = copy_tensor(ur);
  c.uz = copy_tensor(uz);
  c.uc = copy_tensor(uc);
  c.ln_rg = copy_tensor(ln_rg);
  c.ln_rb = copy_tensor(ln_rb);
  c.ln_zg = copy_tensor(ln_zg);
  c.ln_zb = copy_tensor(ln_zb);
  c.ln_cg = copy_tensor(ln_cg);
  c.ln_cb = copy_tensor(ln_cb);
  return c;
}

Tensor GruCell::step(Tape& tape, const Tensor& x, const Tensor& h) const {
  using namespace ops;
  Tensor r = sigmoid(tape, layer_norm(tape, add(tape, matmul(tape, x, wr), matmul(tape, h, ur)),
                                      ln_rg, ln_rb));
  Tensor z = sigmoid(tape, layer_norm(tape, add(tape, matmul(tape, x, wz), matmul(tape, h, uz)),
                                      ln_zg, ln_zb));
  Tensor c = ops::tanh(
      tape, layer_norm(tape, add(tape, matmul(tape, x, wc), mul(tape, r, matmul(tape, h, uc))),
                       ln_cg, ln_cb));
  // (1 - z) * h + z * c, written as h + z * (c - h) to avoid a ones constant.
  return add(tape, h, mul(tape, z, sub(tape, c, h)));
}

Tensor GruCell::masked_step(Tape& tape, const Tensor& x, const Tensor& h,
                            const Tensor& mask_col) const {
  Tensor next = step(tape, x, h);
  // m * h' + (1 - m) * h = h + m * (h' - h).
  return ops::add(tape, h, ops::mul(tape, ops::sub(tape, next, h), mask_col));
}

void GruCell::collect(const std::string& prefix, std::vector<NamedTensor>& out) const {
  out.push_back({prefix + ".wr", wr});
  out.push_back({prefix + ".wz", wz});
  out.push_back({prefix + ".wc", wc});
  out.push_back({prefix + ".ur", ur});
  out.push_back({prefix + ".uz", uz});
  out.push_back({prefix + ".uc", uc});
  out.push_back({prefix + ".ln_rg", ln_rg});
  out.push_back({prefix + ".ln_rb", ln_rb});
  out.push_back({prefix + ".ln_zg", ln_zg});
  out.push_back({prefix + ".ln_zb", ln_zb});
  out.push_back({prefix + ".ln_cg", ln_cg});
  out.push_back({prefix + ".ln_cb", ln_cb});
}

ModelParams ModelParams::init(const ModelConfig& config, RngStream& rng) {
  config.validate();
  const std::size_t e = config.embed_dim;
  const std::size_t h = config.hidden_dim;

  ModelParams p;
  p.config = config;

  p.src_embed = uniform_tensor(rng, "src_embed", {config.src_vocab, e}, 0.1);
  RngStream s1f = rng.split("enc.l1f");
  p.enc_l1_fwd = GruCell::make(e, h, s1f);
  RngStream s1b = rng.split("enc.l1b");
  p.enc_l1_bwd = GruCell::make(e, h, s1b);
  p.enc_comb_w = glorot_tensor(rng, "enc.comb.w", 2 * h, h);
  p.enc_comb_b = zeros_param({h});
  RngStream s2 = rng.split("enc.l2");
  p.enc_l2 = GruCell::make(h, h, s2);

  p.tgt_embed = uniform_tensor(rng, "tgt_embed", {config.tgt_vocab, e}, 0.1);
  p.attn_wq = glorot_tensor(rng, "attn.wq", h, h);
  p.attn_wk = glorot_tensor(rng, "attn.wk", h, h);
  p.attn_v = uniform_tensor(rng, "attn.v", {1, h}, std::sqrt(3.0 / static_cast<double>(h)));
  p.init_w1 = glorot_tensor(rng, "dec.init1.w", h, h);
  p.init_b1 = zeros_param({h});
  p.init_w2 = glorot_tensor(rng, "dec.init2.w", h, h);
  p.init_b2 = zeros_param({h});
  RngStream d1 = rng.split("dec.l1");
  p.dec_l1 = GruCell::make(e + h, h, d1);
  RngStream d2 = rng.split("dec.l2");
  p.dec_l2 = GruCell::make(h, h, d2);
  p.feat_w = glorot_tensor(rng, "dec.feat.w", 2 * h, e);
  p.feat_b = zeros_param({e});
  p.out_bias = zeros_param({config.tgt_vocab});
  return p;
}

ModelParams ModelParams::clone() const {
  ModelParams p;
  p.config = config;
  p.src_embed = copy_tensor(src_embed);
  p.enc_l1_fwd = enc_l1_fwd.clone();
  p.enc_l1_bwd = enc_l1_bwd.clone();
  p.enc_comb_w = copy_tensor(enc_comb_w);
  p.enc_comb_b = copy_tensor(enc_comb_b);
  p.enc_l2 = enc_l2.clone();
  p.tgt_embed = copy_tensor(tgt_embed);
  p.attn_wq = copy_tensor(attn_wq);
  p.attn_wk = copy_tensor(attn_wk);
  p.attn_v = copy_tensor(attn_v);
  p.init_w1 = copy_tensor(init_w1);
  p.init_b1 = copy_tensor(init_b1);
  p.init_w2 = copy_tensor(init_w2);
  p.init_b2 = copy_tensor(init_b2);
  p.dec_l1 = dec_l1.clone();
  p.dec_l2 = dec_l2.clone();
  p.feat_w = copy_tensor(feat_w);
  p.feat_b = copy_tensor(feat_b);
  p.out_bias = copy_tensor(out_bias);
  return p;
}

std::vector<NamedTensor> ModelParams::encoder_group() const {
  std::vector<NamedTensor> out;
  out.push_back({"src_embed", src_embed});
  enc_l1_fwd.collect("enc.l1f", out);
  enc_l1_bwd.collect("enc.l1b", out);
  out.push_back({"enc.comb.w", enc_comb_w});
  out.push_back({"enc.comb.b", enc_comb_b});
  enc_l2.collect("enc.l2", out);
  return out;
}

std::vector<NamedTensor> ModelParams::decoder_group() const {
  std::vector<NamedTensor> out;
  out.push_back({"tgt_embed", tgt_embed});
  out.push_back({"attn.wq", attn_wq});
  out.push_back({"attn.wk", attn_wk});
  out.push_back({"attn.v", attn_v});
  out.push_back({"dec.init1.w", init_w1});
  out.push_back({"dec.init1.b", init_b1});
  out.push_back({"dec.init2.w", init_w2});
  out.push_back({"dec.init2.b", init_b2});
  dec_l1.collect("dec.l1", out);
  dec_l2.collect("dec.l2", out);
  out.push_back({"dec.feat.w", feat_w});
  out.push_back({"dec.feat.b", feat_b});
  out.push_back({"out_bias", out_bias});
  return out;
}

std::vector<NamedTensor> ModelParams::all() const {
  std::vector<NamedTensor> out = encoder_group();
  std::vector<NamedTensor> dec = decoder_group();
  out.insert(out.end(), dec.begin(), dec.end());
  return out;
}

std::vector<Tensor> embed_source(Tape& tape, const ModelParams& params, const Batch& batch) {
  if (batch.size == 0 || batch.src_max == 0) throw ShapeError("embed_source: empty batch");
  std::vector<Tensor> out;
  out.reserve(batch.src_max);
  for (std::size_t t = 0; t < batch.src_max; ++t)
    out.push_back(ops::embedding_gather(tape, params.src_embed, batch.src_col(t)));
  return out;
}

EncoderStates encode(Tape& tape, const ModelParams& params,
                     const std::vector<Tensor>& embedded, const Batch& batch,
                     bool train, RngStream& rng) {
  if (embedded.empty()) throw ShapeError("encode: empty source");
  const std::size_t b = batch.size;
  const std::size_t m = embedded.size();
  const std::size_t h = params.config.hidden_dim;
  const std::size_t e = params.config.embed_dim;
  if (m != batch.src_max)
    throw ShapeError("encode: embedded step count does not match the batch");
  for (const Tensor& x : embedded)
    if (x.shape() != std::vector<std::size_t>{b, e})
      throw ShapeError("encode: embedded step has shape " + x.shape_str() +
                       ", want [" + std::to_string(b) + ", " + std::to_string(e) + "]");
  const double p = params.config.dropout;

  EncoderStates enc;
  enc.batch = b;
  enc.steps = m;
  enc.mask = Tensor::from({b, m}, batch.src_mask, false);
  enc.mask_cols.reserve(m);
  for (std::size_t t = 0; t < m; ++t) enc.mask_cols.push_back(source_mask_col(batch, t));
  enc.lengths.reserve(b);
  for (std::size_t row = 0; row < b; ++row)
    enc.lengths.push_back(static_cast<double>(batch.src_len[row]));

  std::vector<Tensor> x(m);
  for (std::size_t t = 0; t < m; ++t) x[t] = ops::dropout(tape, embedded[t], p, rng, train);

  std::vector<Tensor> fwd(m), bwd(m);
  Tensor hf = Tensor::zeros({b, h});
  for (std::size_t t = 0; t < m; ++t)
    fwd[t] = hf = params.enc_l1_fwd.masked_step(tape, x[t], hf, enc.mask_cols[t]);
  Tensor hb = Tensor::zeros({b, h});
  for (std::size_t t = m; t-- > 0;)
    bwd[t] = hb = params.enc_l1_bwd.masked_step(tape, x[t], hb, enc.mask_cols[t]);

  std::vector<Tensor> l1(m);
  for (std::size_t t = 0; t < m; ++t)
    l1[t] = affine(tape, ops::concat(tape, fwd[t], bwd[t]), params.enc_comb_w, params.enc_comb_b);

  enc.states.resize(m);
  enc.attention_view.resize(m);
  enc.keys.resize(m);
  Tensor h2 = Tensor::zeros({b, h});
  for (std::size_t t = 0; t < m; ++t) {
    Tensor l1d = ops::dropout(tape, l1[t], p, rng, train);
    h2 = params.enc_l2.masked_step(tape, l1d, h2, enc.mask_cols[t]);
    // Residual from the first layer's (undropped) output, then hard-zero the
    // padding rows so downstream consumers see exact zeros there.
    Tensor raw = ops::add(tape, h2, l1[t]);
    enc.states[t] = ops::mul(tape, raw, enc.mask_cols[t]);
    enc.attention_view[t] = ops::dropout(tape, enc.states[t], p, rng, train);
    enc.keys[t] = ops::matmul(tape, enc.attention_view[t], params.attn_wk);
  }

  Tensor acc = enc.attention_view[0];
  for (std::size_t t = 1; t < m; ++t) acc = ops::add(tape, acc, enc.attention_view[t]);
  std::vector<double> inv(b);
  for (std::size_t row = 0; row < b; ++row) inv[row] = 1.0 / enc.lengths[row];
  enc.mean_state = ops::mul(tape, acc, Tensor::from({b, 1}, std::move(inv), false));
  return enc;
}

EncoderStates encode(Tape& tape, const ModelParams& params, const Batch& batch,
                     bool train, RngStream& rng) {
  return encode(tape, params, embed_source(tape, params, batch), batch, train, rng);
}

DecoderState decoder_init_state(Tape& tape, const ModelParams& params,
                                const EncoderStates& enc) {
  DecoderState st;
  st.layer1 = ops::tanh(tape, affine(tape, enc.mean_state, params.init_w1, params.init_b1));
  st.layer2 = ops::tanh(tape, affine(tape, enc.mean_state, params.init_w2, params.init_b2));
  st.step = 0;
  return st;
}

AttentionResult attention(Tape& tape, const ModelParams& params,
                          const DecoderState& state, const EncoderStates& enc) {
  using namespace ops;
  Tensor q = matmul(tape, state.layer2, params.attn_wq);
  std::vector<Tensor> scores;
  scores.reserve(enc.steps);
  for (std::size_t t = 0; t < enc.steps; ++t)
    scores.push_back(matmul_nt(tape, ops::tanh(tape, add(tape, q, enc.keys[t])), params.attn_v));
  Tensor logits = reshape(tape, stack_time(tape, scores), {enc.batch, enc.steps});
  // Padding positions get a -1e9 offset; after the row-max subtraction inside
  // softmax their exponent underflows to exactly zero.
  Tensor masked = add(tape, logits, scale(tape, shift(tape, enc.mask, -1.0), 1e9));
  AttentionResult out;
  out.weights = softmax(tape, masked);
  Tensor ctx = mul(tape, enc.attention_view[0], slice_cols(tape, out.weights, 0, 1));
  for (std::size_t t = 1; t < enc.steps; ++t)
    ctx = add(tape, ctx,
              mul(tape, enc.attention_view[t], slice_cols(tape, out.weights, t, t + 1)));
  out.context = ctx;
  return out;
}

DecodeResult decode_step(Tape& tape, const ModelParams& params,
                         const std::vector<std::int32_t>& prev_ids,
                         const DecoderState& state, const EncoderStates& enc,
                         bool train, RngStream& rng) {
  using namespace ops;
  if (prev_ids.size() != enc.batch)
    throw ShapeError("decode_step: got " + std::to_string(prev_ids.size()) +
                     " previous ids for a batch of " + std::to_string(enc.batch));
  const double p = params.config.dropout;

  Tensor emb = dropout(tape, embedding_gather(tape, params.tgt_embed, prev_ids), p, rng, train);
  AttentionResult att = attention(tape, params, state, enc);

  Tensor s1 = params.dec_l1.step(tape, concat(tape, emb, att.context), state.layer1);
  Tensor s1d = dropout(tape, s1, p, rng, train);
  Tensor s2 = params.dec_l2.step(tape, s1d, state.layer2);
  Tensor top = add(tape, s2, s1);

  Tensor feat = ops::tanh(
      tape, affine(tape, concat(tape, top, att.context), params.feat_w, params.feat_b));
  DecodeResult out;
  out.logits = add(tape, matmul_nt(tape, feat, params.tgt_embed), params.out_bias);
  out.state = DecoderState{s1, s2, state.step + 1};
  out.attention_weights = att.weights;
  return out;
}

Tensor sentence_nll(Tape& tape, const ModelParams& params, const EncoderStates& enc,
                    const Batch& batch, bool train, RngStream& rng) {
  if (batch.tgt_max == 0) throw ShapeError("sentence_nll: batch has no target side");
  DecoderState st = decoder_init_state(tape, params, enc);
  Tensor per_row;  // [B,1], masked NLL summed over time
  for (std::size_t t = 0; t < batch.tgt_max; ++t) {
    DecodeResult dec = decode_step(tape, params, batch.tgt_in_col(t), st, enc, train, rng);
    st = dec.state;
    Tensor nll = ops::categorical_cross_entropy(tape, dec.logits, batch.tgt_out_col(t));
    Tensor masked = ops::mul(tape, nll, target_mask_col(batch, t));
    per_row = (t == 0) ? masked : ops::add(tape, per_row, masked);
  }
  // Mean over sentences; [B,1] means the element mean is exactly that.
  return ops::mean(tape, per_row);
}

Tensor sentence_nll(Tape& tape, const ModelParams& params, const Batch& batch,
                    bool train, RngStream& rng) {
  EncoderStates enc = encode(tape, params, batch, train, rng);
  return sentence_nll(tape, params, enc, batch, train, rng);
}

}  // namespace robustnmt
