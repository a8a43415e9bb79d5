// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "robustnmt/beam.hpp"
#include "robustnmt/bleu.hpp"
#include "robustnmt/data.hpp"
#include "robustnmt/perturb.hpp"
#include "robustnmt/trainer.hpp"

// Robustness diagnostics built on beam search and corpus BLEU: how much a
// model's output moves under input noise, a grid of BLEU under synthetic
// corruption, and the loss-term ablation study. All corruption is seeded,
// so every run and every compared model sees identical inputs.
namespace robustnmt {

struct RobustnessReport {
  double changed_ratio = 0.0;  // fraction of sentences translated differently
  BleuReport cross_bleu;       // perturbed translations vs clean ones
};

// Translates every source sentence clean and perturbed. Changed means the
// token sequences differ anywhere; the cross BLEU scores the perturbed
// translations against the clean translations as references. Lexical
// replacements draw from the model's own embedding table.
RobustnessReport robustness_metrics(const ModelParams& params, const ParallelCorpus& corpus,
                                    const PerturbationSpec& spec, std::size_t beam,
                                    std::uint64_t seed = 1, bool smooth_bleu = true);

struct NamedModel {
  std::string name;
  const ModelParams* params = nullptr;
};

// One model's BLEU across operation counts for one corruption kind.
struct SweepRow {
  std::string model;
  std::string kind;
  std::vector<double> bleu;  // index = operation count, 0..max_ops
};

// Corrupted copy of the source side for (kind, n_ops). Seeded independently
// of any model, so sweep columns stay comparable across models.
std::vector<Sentence> sweep_corruptions(const std::vector<Sentence>& sources,
                                        PerturbKind kind, std::size_t n_ops,
                                        std::size_t vocab_size, std::uint64_t seed);

// Translates every model over every kind and operation count and scores
// against the clean references. Column 0 is each model's clean dev BLEU,
// identical across kinds. Kinds must be synthetic (swap, replace-uniform,
// delete); models must share one vocabulary.
std::vector<SweepRow> synthetic_sweep(const std::vector<NamedModel>& models,
                                      const ParallelCorpus& corpus,
                                      const std::vector<PerturbKind>& kinds,
                                      std::size_t max_ops, std::size_t beam,
                                      std::uint64_t seed = 1, bool smooth_bleu = true);

std::string sweep_to_csv(const std::vector<SweepRow>& rows);
std::string sweep_to_text(const std::vector<SweepRow>& rows);  // scores x100

struct AblationRow {
  std::string label;
  LossFlags flags;
  double clean_bleu = 0.0;
  double perturbed_bleu = 0.0;
};

// Loss-term ablation: retrains the adversarial stage from one pretrained
// model under each inclusion pattern of the true, adversarial, and noisy
// terms, then reports clean and perturbed dev BLEU per variant. The
// {true}-only row is the pretrained model unchanged. Dev corruption is
// precomputed once (lexical replacements use the pretrained embeddings), so
// every row is scored on identical perturbed sentences; any checkpoint or
// metrics path in `base` is suffixed with the row label. Feature-kind dev
// noise is applied at decode time with per-sentence seeds shared by rows.
std::vector<AblationRow> ablation_run(const ModelParams& pretrained,
                                      const ParallelCorpus& train_corpus,
                                      const ParallelCorpus& dev_corpus,
                                      const TrainConfig& base,
                                      const PerturbationSpec& dev_noise,
                                      std::size_t beam, std::uint64_t eval_seed = 1,
                                      bool smooth_bleu = true,
                                      const EvalObserver* obs = nullptr);

std::string ablation_to_csv(const std::vector<AblationRow>& rows);
std::string ablation_to_text(const std::vector<AblationRow>& rows);  // scores x100

}  // namespace robustnmt
