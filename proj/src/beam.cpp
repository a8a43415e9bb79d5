// SPDX-License-Identifier: Apache-2.0

#include "robustnmt/beam.hpp"

#include <algorithm>
#include <cstdint>

#include "robustnmt/error.hpp"
#include "robustnmt/ops.hpp"

namespace robustnmt {
namespace {

struct LiveHyp {
  Sentence ids;
  double sum_lp = 0.0;
  DecoderState state;
};

}  // namespace

Hypothesis beam_search_from(Tape& tape, const ModelParams& params,
                            const EncoderStates& enc, std::size_t beam,
                            std::size_t max_len) {
  if (beam < 1) throw ConfigError("beam_search: beam must be >= 1");
  if (max_len < 1) throw ConfigError("beam_search: max_len must be >= 1");
  RngStream rng("decode", 0);  // eval-mode forwards draw nothing
  const std::size_t vocab = params.config.tgt_vocab;

  std::vector<LiveHyp> live(1);
  live[0].state = decoder_init_state(tape, params, enc);

  Hypothesis best;
  bool have_best = false;
  auto offer = [&](Hypothesis h) {
    if (!have_best || h.logprob > best.logprob) {
      best = std::move(h);
      have_best = true;
    }
  };

  struct Cand {
    double sum_lp;
    std::size_t parent;
    std::int32_t token;
  };

  for (std::size_t step = 0; step < max_len && !live.empty(); ++step) {
    std::vector<Cand> cands;
    cands.reserve(live.size() * vocab);
    std::vector<DecoderState> stepped(live.size());
    for (std::size_t p = 0; p < live.size(); ++p) {
      const std::int32_t prev =
          live[p].ids.empty() ? Vocabulary::kBos : live[p].ids.back();
      DecodeResult out = decode_step(tape, params, {prev}, live[p].state, enc,
                                     /*train=*/false, rng);
      stepped[p] = out.state;
      const std::vector<double>& row =
          ops::log_softmax(tape, out.logits).values();
      for (std::size_t v = 0; v < vocab; ++v)
        cands.push_back({live[p].sum_lp + row[v], p, static_cast<std::int32_t>(v)});
    }
    // Deterministic order: score, then parent slot, then token id.
    std::sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) {
      if (a.sum_lp != b.sum_lp) return a.sum_lp > b.sum_lp;
      if (a.parent != b.parent) return a.parent < b.parent;
      return a.token < b.token;
    });

    std::vector<LiveHyp> next;
    const std::size_t take = std::min(beam, cands.size());
    for (std::size_t c = 0; c < take; ++c) {
      const Cand& cand = cands[c];
      if (cand.token == Vocabulary::kEos) {
        Hypothesis done;
        done.ids = live[cand.parent].ids;
        done.finished = true;
        // The terminating EOS counts toward the normalization length.
        done.logprob = cand.sum_lp / static_cast<double>(done.ids.size() + 1);
        offer(std::move(done));
      } else {
        LiveHyp ext;
        ext.ids = live[cand.parent].ids;
        ext.ids.push_back(cand.token);
        ext.sum_lp = cand.sum_lp;
        ext.state = stepped[cand.parent];
        next.push_back(std::move(ext));
      }
    }
    live = std::move(next);
  }

  // Survivors hit the length cap without EOS.
  for (LiveHyp& h : live) {
    Hypothesis capped;
    capped.ids = std::move(h.ids);
    capped.finished = false;
    capped.logprob = h.sum_lp / static_cast<double>(capped.ids.size());
    offer(std::move(capped));
  }
  return best;
}

Hypothesis beam_search(const ModelParams& params, const Sentence& x,
                       std::size_t beam, std::size_t max_len) {
  Tape tape;
  RngStream rng("decode", 0);
  const Batch batch = make_source_batch(x);
  const EncoderStates enc = encode(tape, params, batch, /*train=*/false, rng);
  return beam_search_from(tape, params, enc, beam, max_len);
}

std::vector<Sentence> translate_corpus(const ModelParams& params,
                                       const std::vector<Sentence>& sources,
                                       std::size_t beam) {
  std::vector<Sentence> out;
  out.reserve(sources.size());
  for (const Sentence& x : sources)
    out.push_back(beam_search(params, x, beam, params.config.max_decode_len).ids);
  return out;
}

}  // namespace robustnmt
