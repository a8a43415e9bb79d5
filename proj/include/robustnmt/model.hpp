// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "robustnmt/adam.hpp"
#include "robustnmt/data.hpp"
#include "robustnmt/ops.hpp"
#include "robustnmt/rng.hpp"
#include "robustnmt/tape.hpp"
#include "robustnmt/tensor.hpp"

// Attention-based GRU encoder-decoder. Two layers on each side with a
// residual connection from the first layer's output onto the second layer's
// output, layer normalization on every GRU gate pre-activation, and target
// embeddings tied to the pre-softmax projection.
namespace robustnmt {

struct ModelConfig {
  std::size_t src_vocab = 0;       // includes the 4 reserved ids
  std::size_t tgt_vocab = 0;
  std::size_t embed_dim = 32;
  std::size_t hidden_dim = 32;
  std::size_t layers = 2;          // fixed; validate() rejects anything else
  double dropout = 0.1;
  std::size_t max_decode_len = 50;

  void validate() const;  // ConfigError on out-of-range fields
};

// One GRU cell with layer-normalized gate pre-activations:
//   r  = sigmoid(LN(x W_r + h U_r))
//   z  = sigmoid(LN(x W_z + h U_z))
//   c  = tanh(LN(x W_c + r * (h U_c)))
//   h' = (1 - z) * h + z * c
// The LN betas double as gate biases, so the cell carries no separate ones.
struct GruCell {
  Tensor wr, wz, wc;  // [in, hidden]
  Tensor ur, uz, uc;  // [hidden, hidden]
  Tensor ln_rg, ln_rb;  // [hidden] gain/bias for the reset gate
  Tensor ln_zg, ln_zb;
  Tensor ln_cg, ln_cb;

  static GruCell make(std::size_t in_dim, std::size_t hidden, RngStream& rng);

  // Fresh storage with the same values. Plain struct copies share tensor
  // nodes; training through a copy would mutate the original.
  GruCell clone() const;

  Tensor step(Tape& tape, const Tensor& x, const Tensor& h) const;

  // h stays frozen on rows whose mask entry is 0 (padding):
  // h_next = m * h' + (1 - m) * h, with mask_col shaped [B,1].
  Tensor masked_step(Tape& tape, const Tensor& x, const Tensor& h,
                     const Tensor& mask_col) const;

  void collect(const std::string& prefix, std::vector<NamedTensor>& out) const;
};

// All trainable tensors, grouped into the encoder side (source embeddings
// plus encoder cells) and the decoder side (target embeddings, attention,
// decoder cells, output head). The target embedding matrix and the
// pre-softmax projection are the same storage.
struct ModelParams {
  ModelConfig config;

  // Encoder group.
  Tensor src_embed;      // [src_vocab, embed]
  GruCell enc_l1_fwd;    // embed -> hidden
  GruCell enc_l1_bwd;    // embed -> hidden
  Tensor enc_comb_w;     // [2*hidden, hidden], merges the two directions
  Tensor enc_comb_b;     // [hidden]
  GruCell enc_l2;        // hidden -> hidden

  // Decoder group.
  Tensor tgt_embed;      // [tgt_vocab, embed], tied to the output projection
  Tensor attn_wq;        // [hidden, hidden]
  Tensor attn_wk;        // [hidden, hidden]
  Tensor attn_v;         // [1, hidden]
  Tensor init_w1, init_b1;  // mean-pooled states -> layer-1 start
  Tensor init_w2, init_b2;  // mean-pooled states -> layer-2 start
  GruCell dec_l1;        // embed + hidden (context) -> hidden
  GruCell dec_l2;        // hidden -> hidden
  Tensor feat_w;         // [2*hidden, embed], [top state ; context] -> feature
  Tensor feat_b;         // [embed]
  Tensor out_bias;       // [tgt_vocab]

  static ModelParams init(const ModelConfig& config, RngStream& rng);

  ModelParams clone() const;  // deep copy; see GruCell::clone

  std::vector<NamedTensor> encoder_group() const;
  std::vector<NamedTensor> decoder_group() const;
  std::vector<NamedTensor> all() const;
};

// Per-position encoder output for one batch. `states` is the representation
// the discriminator reads; `attention_view` is the same sequence after
// (train-time) dropout and is what the decoder attends over. Padding rows are
// exactly zero in both.
struct EncoderStates {
  std::size_t batch = 0;
  std::size_t steps = 0;
  std::vector<Tensor> states;          // M tensors [B, hidden]
  std::vector<Tensor> attention_view;  // M tensors [B, hidden]
  std::vector<Tensor> keys;            // M tensors [B, hidden], precomputed
  std::vector<Tensor> mask_cols;       // M tensors [B, 1], constants
  Tensor mask;                         // [B, M], constant
  std::vector<double> lengths;         // real token count per row
  Tensor mean_state;                   // [B, hidden], masked mean over time
};

struct DecoderState {
  Tensor layer1;  // [B, hidden]
  Tensor layer2;  // [B, hidden]
  int step = 0;
};

struct AttentionResult {
  Tensor context;  // [B, hidden]
  Tensor weights;  // [B, M], exact zeros on masked positions
};

struct DecodeResult {
  Tensor logits;  // [B, tgt_vocab]
  DecoderState state;
  Tensor attention_weights;  // [B, M]
};

// Source token ids -> per-position embeddings, one [B, embed] tensor per
// time step, without dropout. The feature-perturbation path adds noise to
// these before handing them to encode().
std::vector<Tensor> embed_source(Tape& tape, const ModelParams& params, const Batch& batch);

// Clean/lexical path: embeds `batch.src` itself.
EncoderStates encode(Tape& tape, const ModelParams& params, const Batch& batch,
                     bool train, RngStream& rng);

// Pre-embedded path: `embedded` holds one [B, embed] tensor per source
// position (batch supplies masks and lengths only).
EncoderStates encode(Tape& tape, const ModelParams& params,
                     const std::vector<Tensor>& embedded, const Batch& batch,
                     bool train, RngStream& rng);

// Both decoder layers start from tanh(affine(mean of unmasked states)).
DecoderState decoder_init_state(Tape& tape, const ModelParams& params,
                                const EncoderStates& enc);

// Additive scoring against the precomputed keys, masked softmax, weighted
// average of the attention view.
AttentionResult attention(Tape& tape, const ModelParams& params,
                          const DecoderState& state, const EncoderStates& enc);

// One target step: embeds prev_ids, attends with the layer-2 state, runs both
// decoder cells (residual onto the second), and maps [top ; context] through
// the feature affine onto the tied embedding to produce logits.
DecodeResult decode_step(Tape& tape, const ModelParams& params,
                         const std::vector<std::int32_t>& prev_ids,
                         const DecoderState& state, const EncoderStates& enc,
                         bool train, RngStream& rng);

// Teacher-forced negative log-likelihood of the batch's target side given
// already-encoded source states: per-step cross-entropies are masked and
// summed over time, then averaged over sentences.
Tensor sentence_nll(Tape& tape, const ModelParams& params, const EncoderStates& enc,
                    const Batch& batch, bool train, RngStream& rng);

// Convenience wrapper: encode then score, both on the clean id path.
Tensor sentence_nll(Tape& tape, const ModelParams& params, const Batch& batch,
                    bool train, RngStream& rng);

}  // namespace robustnmt
