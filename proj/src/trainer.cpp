// SPDX-License-Identifier: Apache-2.0

#include "robustnmt/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "robustnmt/error.hpp"
#include "robustnmt/kernels.hpp"
#include "robustnmt/metrics.hpp"
#include "robustnmt/ops.hpp"

namespace robustnmt {
namespace {

double group_grad_norm(const std::vector<NamedTensor>& group) {
  const kern::Kernels& k = kern::active();
  double total = 0.0;
  for (const NamedTensor& np : group) {
    if (!np.tensor.has_grad()) continue;
    const std::vector<double>& g = np.tensor.grad();
    total += k.dot(g.data(), g.data(), g.size());
  }
  return std::sqrt(total);
}

// Clean batch -> same batch with each source row lexically perturbed.
// Row lengths are preserved, so masks and targets carry over.
Batch lexical_perturbed(const Batch& batch, const Tensor& src_embed,
                        const PerturbationSpec& spec, RngStream& rng) {
  Batch out = batch;
  for (std::size_t row = 0; row < batch.size; ++row) {
    const std::size_t len = batch.src_len[row];
    const auto begin = batch.src.begin() + static_cast<std::ptrdiff_t>(row * batch.src_max);
    Sentence x(begin, begin + static_cast<std::ptrdiff_t>(len));
    Sentence px = perturb_lexical(x, src_embed, spec, rng);
    std::copy(px.begin(), px.end(),
              out.src.begin() + static_cast<std::ptrdiff_t>(row * batch.src_max));
  }
  return out;
}

bool report_finite(const TrainStepReport& r) {
  for (double v : {r.l_true, r.l_inv, r.l_inv_clean, r.l_inv_noisy, r.l_noisy, r.total,
                   r.grad_norm_enc, r.grad_norm_dec, r.grad_norm_dis})
    if (!std::isfinite(v)) return false;
  return true;
}

void optimize(TrainState& state, std::vector<NamedTensor> params, double lr) {
  const std::vector<std::string> missing = state.opt.step(params, lr);
  if (!missing.empty()) throw NumericalError(missing.front());
}

}  // namespace

double LrSchedule::at(std::size_t step) const {
  const double t = static_cast<double>(std::max<std::size_t>(step, 1));
  if (kind == Kind::kConstant) return base;
  const double w = static_cast<double>(warmup);
  return base * std::min(t / w, std::sqrt(w / t));
}

void LrSchedule::validate() const {
  if (!(base > 0.0)) throw ConfigError("lr schedule: base rate must be positive");
  if (kind == Kind::kInverseSqrt && warmup == 0)
    throw ConfigError("lr schedule: inverse-sqrt needs warmup >= 1");
}

void TrainConfig::validate() const {
  if (!(alpha >= 0.0) || !(beta >= 0.0))
    throw ConfigError("train: alpha and beta must be >= 0");
  if (batch_size == 0) throw ConfigError("train: batch size must be >= 1");
  if (dis_channels == 0) throw ConfigError("train: discriminator channels must be >= 1");
  lr.validate();
  perturbation.validate();
  const bool any = flags.use_true || (flags.use_inv && alpha > 0.0) ||
                   (flags.use_noisy && beta > 0.0);
  if (!any) throw ConfigError("train: every objective term is switched off");
}

TrainState mle_init(const ModelConfig& mcfg, const TrainConfig& tcfg) {
  mcfg.validate();
  tcfg.validate();
  TrainState state;
  RngStream rng("model", tcfg.seed);
  state.model = ModelParams::init(mcfg, rng);
  return state;
}

TrainState ast_init(const ModelParams& pretrained, const TrainConfig& tcfg) {
  tcfg.validate();
  TrainState state;
  state.model = pretrained.clone();
  RngStream rng("dis", tcfg.seed);
  state.dis = DiscriminatorParams::init(pretrained.config.hidden_dim, tcfg.dis_channels, rng);
  state.has_dis = true;
  return state;
}

TrainStepReport mle_training_step(const Batch& batch, TrainState& state,
                                  const TrainConfig& cfg, std::size_t t,
                                  RngStream& step_stream) {
  Tape tape;
  RngStream clean_rng = step_stream.split("clean");
  EncoderStates enc = encode(tape, state.model, batch, /*train=*/true, clean_rng);
  Tensor l_true = sentence_nll(tape, state.model, enc, batch, true, clean_rng);
  tape.backward(l_true);

  TrainStepReport r;
  r.step = t;
  r.l_true = l_true.values()[0];
  r.total = r.l_true;
  std::vector<NamedTensor> params = state.model.encoder_group();
  std::vector<NamedTensor> dec = state.model.decoder_group();
  r.grad_norm_enc = group_grad_norm(params);
  r.grad_norm_dec = group_grad_norm(dec);
  if (!report_finite(r)) {
    r.skipped = true;
    return r;
  }
  params.insert(params.end(), dec.begin(), dec.end());
  optimize(state, std::move(params), cfg.lr.at(t));
  return r;
}

TrainStepReport ast_training_step(const Batch& batch, TrainState& state,
                                  const TrainConfig& cfg, std::size_t t,
                                  RngStream& step_stream) {
  const bool need_inv = cfg.flags.use_inv && cfg.alpha > 0.0;
  const bool need_noisy = cfg.flags.use_noisy && cfg.beta > 0.0;
  // Both perturbed-path terms off: the objective is plain likelihood, and the
  // step must match an MLE step exactly, so take that code path outright.
  if (!need_inv && !need_noisy) return mle_training_step(batch, state, cfg, t, step_stream);
  if (need_inv && !state.has_dis)
    throw ConfigError("train: adversarial term enabled but state has no discriminator");

  Tape tape;
  RngStream clean_rng = step_stream.split("clean");
  RngStream perturb_rng = step_stream.split("perturb");
  RngStream noisy_rng = step_stream.split("noisy");

  const bool need_clean = cfg.flags.use_true || need_inv;
  std::optional<EncoderStates> enc_clean;
  Tensor l_true;
  if (need_clean) {
    enc_clean = encode(tape, state.model, batch, /*train=*/true, clean_rng);
    if (cfg.flags.use_true)
      l_true = sentence_nll(tape, state.model, *enc_clean, batch, true, clean_rng);
  }

  EncoderStates enc_pert;
  if (cfg.perturbation.kind == PerturbKind::kLexical) {
    Batch perturbed =
        lexical_perturbed(batch, state.model.src_embed, cfg.perturbation, perturb_rng);
    enc_pert = encode(tape, state.model, perturbed, true, noisy_rng);
  } else if (cfg.perturbation.kind == PerturbKind::kFeature) {
    std::vector<Tensor> embedded = embed_source(tape, state.model, batch);
    for (Tensor& e : embedded)
      e = ops::gaussian_noise_add(tape, e, cfg.perturbation.sigma, perturb_rng);
    enc_pert = encode(tape, state.model, embedded, batch, true, noisy_rng);
  } else {
    throw ConfigError("train: perturbation kind must be lexical or feature");
  }

  AdversarialLoss adv;
  if (need_inv) adv = adversarial_loss(tape, state.dis, *enc_clean, enc_pert);
  Tensor l_noisy;
  if (need_noisy) l_noisy = sentence_nll(tape, state.model, enc_pert, batch, true, noisy_rng);

  Tensor j;
  if (cfg.flags.use_true) j = l_true;
  if (need_inv) {
    Tensor term = ops::scale(tape, adv.total, cfg.alpha);
    j = j.defined() ? ops::add(tape, j, term) : term;
  }
  if (need_noisy) {
    Tensor term = ops::scale(tape, l_noisy, cfg.beta);
    j = j.defined() ? ops::add(tape, j, term) : term;
  }
  tape.backward(j);

  TrainStepReport r;
  r.step = t;
  if (cfg.flags.use_true) r.l_true = l_true.values()[0];
  if (need_inv) {
    r.l_inv = adv.total.values()[0];
    r.l_inv_clean = adv.clean_term.values()[0];
    r.l_inv_noisy = adv.perturbed_term.values()[0];
    r.disc_accuracy = discriminator_accuracy(adv.clean_probs, adv.perturbed_probs);
  }
  if (need_noisy) r.l_noisy = l_noisy.values()[0];
  r.total = j.values()[0];

  std::vector<NamedTensor> params = state.model.encoder_group();
  std::vector<NamedTensor> dec = state.model.decoder_group();
  r.grad_norm_enc = group_grad_norm(params);
  r.grad_norm_dec = group_grad_norm(dec);
  std::vector<NamedTensor> dis;
  if (need_inv) {
    dis = state.dis.group();
    r.grad_norm_dis = group_grad_norm(dis);
  }
  if (!report_finite(r)) {
    r.skipped = true;
    return r;
  }
  // The decoder feeds only the likelihood terms; with both switched off it
  // sits outside the objective and receives no gradient, so leave it alone.
  if (cfg.flags.use_true || need_noisy) params.insert(params.end(), dec.begin(), dec.end());
  params.insert(params.end(), dis.begin(), dis.end());
  optimize(state, std::move(params), cfg.lr.at(t));
  return r;
}

void train_loop(TrainState& state, const ParallelCorpus& corpus, const TrainConfig& cfg,
                const EvalObserver* obs) {
  cfg.validate();
  state.model.config.validate();
  if (corpus.size() == 0) throw DataError("train: empty corpus");

  auto incident = [&](std::size_t step, const std::string& msg) {
    if (obs && obs->on_incident) obs->on_incident(step, msg);
    else std::fprintf(stderr, "[train] step %zu: %s\n", step, msg.c_str());
  };

  RngStream root("trainer", cfg.seed);
  std::optional<MetricsWriter> metrics;
  if (!cfg.metrics_path.empty()) metrics.emplace(cfg.metrics_path);
  const std::size_t per_epoch = (corpus.size() + cfg.batch_size - 1) / cfg.batch_size;

  std::vector<Batch> epoch_batches;
  std::size_t loaded_epoch = static_cast<std::size_t>(-1);
  for (std::size_t t = state.step + 1; t <= cfg.steps; ++t) {
    const std::size_t epoch = (t - 1) / per_epoch;
    if (epoch != loaded_epoch) {
      epoch_batches = make_batches(corpus, cfg.batch_size, root.split("epoch", epoch));
      loaded_epoch = epoch;
    }
    RngStream step_stream = root.split("step", t);
    TrainStepReport report =
        ast_training_step(epoch_batches[(t - 1) % per_epoch], state, cfg, t, step_stream);
    state.step = t;
    if (report.skipped) {
      incident(t, "non-finite loss; step skipped, parameters untouched");
      if (!state.has_dis)
        throw NumericalError("train: diverged at step " + std::to_string(t));
    }

    const bool eval_now =
        (cfg.eval_interval != 0 && t % cfg.eval_interval == 0) || t == cfg.steps;
    MetricsRow row;
    row.step = t;
    row.l_true = report.l_true;
    row.l_inv = report.l_inv;
    row.l_inv_clean = report.l_inv_clean;
    row.l_inv_noisy = report.l_inv_noisy;
    row.l_noisy = report.l_noisy;
    row.total = report.total;
    row.disc_acc = report.disc_accuracy;
    if (eval_now && obs && obs->dev_bleu) {
      row.has_dev_bleu = true;
      row.dev_bleu = obs->dev_bleu(state.model, t);
    }
    if (metrics) {
      metrics->append(row);
      if (eval_now) {
        std::filesystem::path svg(cfg.metrics_path);
        svg.replace_extension(".svg");
        write_learning_curves_svg(svg.string(), metrics->history());
      }
    }
    if (eval_now && !cfg.checkpoint_path.empty())
      save_checkpoint(to_checkpoint(state), cfg.checkpoint_path);
    if (obs && obs->on_step) obs->on_step(report);
  }
}

CheckpointData to_checkpoint(const TrainState& state) {
  CheckpointData data;
  data.step = state.step;
  data.config = state.model.config;
  data.model = state.model;
  data.has_discriminator = state.has_dis;
  data.dis = state.dis;
  data.adam_t = state.opt.steps();
  data.adam_slots = state.opt.slots();
  return data;
}

TrainState from_checkpoint(const CheckpointData& data) {
  TrainState state;
  state.model = data.model;
  state.has_dis = data.has_discriminator;
  state.dis = data.dis;
  state.opt.restore(data.adam_t, data.adam_slots);
  state.step = data.step;
  return state;
}

}  // namespace robustnmt
