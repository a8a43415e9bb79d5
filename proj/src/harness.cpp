// SPDX-License-Identifier: Apache-2.0

#include "robustnmt/harness.hpp"

#include <algorithm>
#include <cstdarg>
#include <cstdio>
#include <filesystem>

#include "robustnmt/error.hpp"
#include "robustnmt/ops.hpp"

namespace robustnmt {
namespace {

void appendf(std::string& out, const char* fmt, ...) {
  char buf[256];
  va_list args;
  va_start(args, fmt);
  const int n = vsnprintf(buf, sizeof(buf), fmt, args);
  va_end(args);
  out.append(buf, static_cast<std::size_t>(std::max(n, 0)));
}

bool synthetic_kind(PerturbKind kind) {
  return kind == PerturbKind::kSwap || kind == PerturbKind::kReplaceUniform ||
         kind == PerturbKind::kDelete;
}

Hypothesis decode_with_feature_noise(const ModelParams& params, const Sentence& x,
                                     double sigma, std::size_t beam, RngStream& rng) {
  Tape tape;
  RngStream enc_rng("decode", 0);
  const Batch batch = make_source_batch(x);
  std::vector<Tensor> embedded = embed_source(tape, params, batch);
  for (Tensor& e : embedded) e = ops::gaussian_noise_add(tape, e, sigma, rng);
  const EncoderStates enc = encode(tape, params, embedded, batch, /*train=*/false, enc_rng);
  return beam_search_from(tape, params, enc, beam, params.config.max_decode_len);
}

// One perturbed translation; `ref_embeddings` feeds lexical replacement so
// callers can pin the replacement distribution across compared models.
Sentence translate_perturbed_one(const ModelParams& params, const Sentence& x,
                                 const PerturbationSpec& spec,
                                 const Tensor& ref_embeddings, std::size_t beam,
                                 RngStream rng) {
  const std::size_t max_len = params.config.max_decode_len;
  switch (spec.kind) {
    case PerturbKind::kLexical:
      return beam_search(params, perturb_lexical(x, ref_embeddings, spec, rng), beam,
                         max_len)
          .ids;
    case PerturbKind::kFeature:
      return decode_with_feature_noise(params, x, spec.sigma, beam, rng).ids;
    default:
      return beam_search(
                 params, synth_perturb(x, spec, params.config.src_vocab, rng), beam,
                 max_len)
          .ids;
  }
}

// Suffixes "path/stem.ext" into "path/stem.<label>.ext" so per-variant
// artifacts do not clobber each other.
std::string label_path(const std::string& path, const std::string& label) {
  if (path.empty()) return path;
  const std::filesystem::path p(path);
  std::filesystem::path out = p.parent_path();
  out /= p.stem().string() + "." + label + p.extension().string();
  return out.string();
}

}  // namespace

RobustnessReport robustness_metrics(const ModelParams& params, const ParallelCorpus& corpus,
                                    const PerturbationSpec& spec, std::size_t beam,
                                    std::uint64_t seed, bool smooth_bleu) {
  spec.validate();
  if (corpus.size() == 0) throw DataError("robustness: empty corpus");

  const std::vector<Sentence> clean = translate_corpus(params, corpus.source, beam);
  RngStream root("robustness", seed);
  std::vector<Sentence> perturbed;
  perturbed.reserve(corpus.size());
  std::size_t changed = 0;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    perturbed.push_back(translate_perturbed_one(params, corpus.source[i], spec,
                                                params.src_embed, beam,
                                                root.split("sent", i)));
    if (perturbed.back() != clean[i]) ++changed;
  }

  RobustnessReport report;
  report.changed_ratio = static_cast<double>(changed) / static_cast<double>(corpus.size());
  report.cross_bleu = corpus_bleu(perturbed, clean, smooth_bleu);
  return report;
}

std::vector<Sentence> sweep_corruptions(const std::vector<Sentence>& sources,
                                        PerturbKind kind, std::size_t n_ops,
                                        std::size_t vocab_size, std::uint64_t seed) {
  if (!synthetic_kind(kind))
    throw ConfigError("sweep: corruption kind must be swap, replace-uniform, or delete");
  PerturbationSpec spec;
  spec.kind = kind;
  spec.n_ops = n_ops;
  RngStream root = RngStream("sweep", seed).split(perturb_kind_name(kind)).split("ops", n_ops);
  std::vector<Sentence> out;
  out.reserve(sources.size());
  for (std::size_t i = 0; i < sources.size(); ++i) {
    RngStream r = root.split("sent", i);
    out.push_back(synth_perturb(sources[i], spec, vocab_size, r));
  }
  return out;
}

std::vector<SweepRow> synthetic_sweep(const std::vector<NamedModel>& models,
                                      const ParallelCorpus& corpus,
                                      const std::vector<PerturbKind>& kinds,
                                      std::size_t max_ops, std::size_t beam,
                                      std::uint64_t seed, bool smooth_bleu) {
  if (models.empty()) throw ConfigError("sweep: needs at least one model");
  if (kinds.empty()) throw ConfigError("sweep: needs at least one corruption kind");
  if (corpus.size() == 0) throw DataError("sweep: empty corpus");
  const std::size_t vocab = models.front().params->config.src_vocab;
  for (const NamedModel& m : models) {
    if (m.params == nullptr) throw ConfigError("sweep: null model entry");
    if (m.params->config.src_vocab != vocab)
      throw ConfigError("sweep: models must share one source vocabulary");
  }

  std::vector<SweepRow> rows(models.size() * kinds.size());
  for (std::size_t mi = 0; mi < models.size(); ++mi) {
    for (std::size_t ki = 0; ki < kinds.size(); ++ki) {
      SweepRow& row = rows[mi * kinds.size() + ki];
      row.model = models[mi].name;
      row.kind = perturb_kind_name(kinds[ki]);
      row.bleu.assign(max_ops + 1, 0.0);
    }
  }

  for (std::size_t ki = 0; ki < kinds.size(); ++ki) {
    for (std::size_t n = 0; n <= max_ops; ++n) {
      // One corrupted copy per (kind, ops); every model translates it.
      const std::vector<Sentence> inputs =
          sweep_corruptions(corpus.source, kinds[ki], n, vocab, seed);
      for (std::size_t mi = 0; mi < models.size(); ++mi) {
        const std::vector<Sentence> hyps =
            translate_corpus(*models[mi].params, inputs, beam);
        rows[mi * kinds.size() + ki].bleu[n] =
            corpus_bleu(hyps, corpus.target, smooth_bleu).score;
      }
    }
  }
  return rows;
}

std::string sweep_to_csv(const std::vector<SweepRow>& rows) {
  std::string out = "model,kind";
  if (!rows.empty())
    for (std::size_t n = 0; n < rows.front().bleu.size(); ++n) appendf(out, ",ops_%zu", n);
  out += "\n";
  for (const SweepRow& row : rows) {
    out += row.model + "," + row.kind;
    for (double b : row.bleu) appendf(out, ",%.17g", b);
    out += "\n";
  }
  return out;
}

std::string sweep_to_text(const std::vector<SweepRow>& rows) {
  std::size_t model_w = 5, kind_w = 4;
  for (const SweepRow& row : rows) {
    model_w = std::max(model_w, row.model.size());
    kind_w = std::max(kind_w, row.kind.size());
  }
  std::string out;
  appendf(out, "%-*s  %-*s", static_cast<int>(model_w), "model",
          static_cast<int>(kind_w), "kind");
  if (!rows.empty())
    for (std::size_t n = 0; n < rows.front().bleu.size(); ++n)
      appendf(out, "  %6zu", n);
  out += "\n";
  for (const SweepRow& row : rows) {
    appendf(out, "%-*s  %-*s", static_cast<int>(model_w), row.model.c_str(),
            static_cast<int>(kind_w), row.kind.c_str());
    for (double b : row.bleu) appendf(out, "  %6.2f", 100.0 * b);
    out += "\n";
  }
  return out;
}

std::vector<AblationRow> ablation_run(const ModelParams& pretrained,
                                      const ParallelCorpus& train_corpus,
                                      const ParallelCorpus& dev_corpus,
                                      const TrainConfig& base,
                                      const PerturbationSpec& dev_noise,
                                      std::size_t beam, std::uint64_t eval_seed,
                                      bool smooth_bleu, const EvalObserver* obs) {
  dev_noise.validate();
  if (dev_corpus.size() == 0) throw DataError("ablation: empty dev corpus");

  struct Variant {
    const char* label;
    LossFlags flags;
  };
  const Variant variants[] = {
      {"true", {true, false, false}},
      {"true+inv", {true, true, false}},
      {"noisy", {false, false, true}},
      {"true+noisy", {true, false, true}},
      {"true+noisy+inv", {true, true, true}},
  };

  // One corrupted dev set for every row; lexical replacement draws from the
  // pretrained embeddings so later rows cannot shift the inputs.
  const bool feature_eval = dev_noise.kind == PerturbKind::kFeature;
  std::vector<Sentence> pert_src;
  if (!feature_eval) {
    RngStream root("ablation-eval", eval_seed);
    for (std::size_t i = 0; i < dev_corpus.size(); ++i) {
      RngStream r = root.split("sent", i);
      if (dev_noise.kind == PerturbKind::kLexical)
        pert_src.push_back(perturb_lexical(dev_corpus.source[i], pretrained.src_embed,
                                           dev_noise, r));
      else
        pert_src.push_back(synth_perturb(dev_corpus.source[i], dev_noise,
                                         pretrained.config.src_vocab, r));
    }
  }

  auto evaluate = [&](const ModelParams& model, AblationRow& row) {
    row.clean_bleu =
        corpus_bleu(translate_corpus(model, dev_corpus.source, beam), dev_corpus.target,
                    smooth_bleu)
            .score;
    std::vector<Sentence> hyps;
    if (feature_eval) {
      RngStream root("ablation-eval", eval_seed);
      for (std::size_t i = 0; i < dev_corpus.size(); ++i)
        hyps.push_back(translate_perturbed_one(model, dev_corpus.source[i], dev_noise,
                                               model.src_embed, beam,
                                               root.split("sent", i)));
    } else {
      hyps = translate_corpus(model, pert_src, beam);
    }
    row.perturbed_bleu = corpus_bleu(hyps, dev_corpus.target, smooth_bleu).score;
  };

  std::vector<AblationRow> rows;
  for (const Variant& v : variants) {
    AblationRow row;
    row.label = v.label;
    row.flags = v.flags;
    const bool likelihood_only = v.flags.use_true && !v.flags.use_inv && !v.flags.use_noisy;
    if (likelihood_only) {
      // Identical schedule, no extra terms: this is the pretrained model.
      evaluate(pretrained, row);
    } else {
      TrainConfig cfg = base;
      cfg.flags = v.flags;
      cfg.checkpoint_path = label_path(base.checkpoint_path, v.label);
      cfg.metrics_path = label_path(base.metrics_path, v.label);
      TrainState state = ast_init(pretrained, cfg);
      train_loop(state, train_corpus, cfg, obs);
      evaluate(state.model, row);
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string ablation_to_csv(const std::vector<AblationRow>& rows) {
  std::string out = "variant,use_true,use_inv,use_noisy,clean_bleu,perturbed_bleu\n";
  for (const AblationRow& row : rows) {
    appendf(out, "%s,%d,%d,%d,%.17g,%.17g\n", row.label.c_str(), row.flags.use_true ? 1 : 0,
            row.flags.use_inv ? 1 : 0, row.flags.use_noisy ? 1 : 0, row.clean_bleu,
            row.perturbed_bleu);
  }
  return out;
}

std::string ablation_to_text(const std::vector<AblationRow>& rows) {
  std::size_t label_w = 7;
  for (const AblationRow& row : rows) label_w = std::max(label_w, row.label.size());
  std::string out;
  appendf(out, "%-*s  %5s  %5s  %5s  %8s  %9s\n", static_cast<int>(label_w), "variant",
          "true", "inv", "noisy", "clean", "perturbed");
  for (const AblationRow& row : rows) {
    appendf(out, "%-*s  %5s  %5s  %5s  %8.2f  %9.2f\n", static_cast<int>(label_w),
            row.label.c_str(), row.flags.use_true ? "yes" : "no",
            row.flags.use_inv ? "yes" : "no", row.flags.use_noisy ? "yes" : "no",
            100.0 * row.clean_bleu, 100.0 * row.perturbed_bleu);
  }
  return out;
}

}  // namespace robustnmt
