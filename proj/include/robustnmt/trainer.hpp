// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <string>

#include "robustnmt/adam.hpp"
#include "robustnmt/checkpoint.hpp"
#include "robustnmt/data.hpp"
#include "robustnmt/discriminator.hpp"
#include "robustnmt/model.hpp"
#include "robustnmt/perturb.hpp"
#include "robustnmt/rng.hpp"

// Training loop: likelihood pretraining and the adversarial stage share one
// step function evaluating
//   J = L_true + alpha * L_inv + beta * L_noisy
// on a clean batch and its perturbed counterpart, with one backward pass and
// one simultaneous Adam update over every active parameter group. Gradient
// reversal at the discriminator input makes the encoder climb L_inv while
// the discriminator descends it.
namespace robustnmt {

struct LrSchedule {
  enum class Kind { kConstant, kInverseSqrt };
  Kind kind = Kind::kConstant;
  double base = 1e-3;     // constant value, or the peak for inverse-sqrt
  std::size_t warmup = 0; // inverse-sqrt only

  // 1-based step. Inverse-sqrt ramps linearly to `base` over `warmup` steps,
  // then decays as sqrt(warmup/step).
  double at(std::size_t step) const;
  void validate() const;
};

// Ablation switches for the three objective terms.
struct LossFlags {
  bool use_true = true;
  bool use_inv = true;
  bool use_noisy = true;
};

struct TrainConfig {
  double alpha = 1.0;
  double beta = 1.0;
  PerturbationSpec perturbation;  // lexical by default
  std::size_t batch_size = 16;
  std::size_t steps = 1000;
  LrSchedule lr;
  std::uint64_t seed = 1;
  LossFlags flags;
  std::size_t dis_channels = 8;
  std::string checkpoint_path;    // empty: never saved
  std::string metrics_path;       // empty: no CSV/SVG
  std::size_t eval_interval = 0;  // 0: evaluate at the final step only

  void validate() const;
};

struct TrainStepReport {
  std::size_t step = 0;
  double l_true = 0.0;
  double l_inv = 0.0;        // clean + perturbed terms
  double l_inv_clean = 0.0;  // mean -log D(H_x)
  double l_inv_noisy = 0.0;  // mean -log(1 - D(H_x'))
  double l_noisy = 0.0;
  double total = 0.0;        // the J actually differentiated
  double disc_accuracy = 0.0;  // 0 when the adversarial term is inactive
  double grad_norm_enc = 0.0;
  double grad_norm_dec = 0.0;
  double grad_norm_dis = 0.0;
  bool skipped = false;  // non-finite loss or gradients; parameters untouched
};

// Everything that evolves across steps. Checkpoints snapshot exactly this
// plus the step counter.
struct TrainState {
  ModelParams model;
  bool has_dis = false;
  DiscriminatorParams dis;
  AdamState opt;
  std::size_t step = 0;  // completed steps
};

// Caller-provided hooks. dev_bleu runs at eval steps and its value lands in
// the metrics CSV; on_step sees every report; on_incident receives skipped
// steps and optimizer warnings (default: stderr).
struct EvalObserver {
  std::function<double(const ModelParams&, std::size_t)> dev_bleu;
  std::function<void(const TrainStepReport&)> on_step;
  std::function<void(std::size_t, const std::string&)> on_incident;
};

// Fresh model seeded from config.seed, no discriminator.
TrainState mle_init(const ModelConfig& mcfg, const TrainConfig& tcfg);

// Adversarial stage start: deep-copies the pretrained model, fresh-initializes
// the discriminator (zero output layer, so L_inv opens at 2*ln 2) and a fresh
// optimizer.
TrainState ast_init(const ModelParams& pretrained, const TrainConfig& tcfg);

// One optimization step on one batch. `step_stream` must be the "step", t
// split of the run's root stream; the report's step field is t. With the
// perturbed-path terms inactive (alpha=beta=0 or flags off) this takes the
// exact likelihood-only path, bit for bit.
TrainStepReport ast_training_step(const Batch& batch, TrainState& state,
                                  const TrainConfig& cfg, std::size_t t,
                                  RngStream& step_stream);

// Likelihood-only step regardless of cfg's adversarial settings.
TrainStepReport mle_training_step(const Batch& batch, TrainState& state,
                                  const TrainConfig& cfg, std::size_t t,
                                  RngStream& step_stream);

// Runs steps state.step+1 .. cfg.steps: epoch shuffling, step streams,
// metrics, periodic eval and checkpointing. Resuming a loaded state replays
// the identical stream schedule. A non-finite step is logged and skipped in
// the adversarial stage; in pure likelihood training it aborts with
// NumericalError (the last checkpoint on disk stays valid).
void train_loop(TrainState& state, const ParallelCorpus& corpus, const TrainConfig& cfg,
                const EvalObserver* obs = nullptr);

// TrainState <-> checkpoint container.
CheckpointData to_checkpoint(const TrainState& state);
TrainState from_checkpoint(const CheckpointData& data);

}  // namespace robustnmt
