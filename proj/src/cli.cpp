// SPDX-License-Identifier: Apache-2.0

#include "robustnmt/cli.hpp"

#include <cstdio>
#include <ctime>
#include <deque>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "robustnmt/beam.hpp"
#include "robustnmt/bleu.hpp"
#include "robustnmt/checkpoint.hpp"
#include "robustnmt/data.hpp"
#include "robustnmt/error.hpp"
#include "robustnmt/harness.hpp"
#include "robustnmt/perturb.hpp"
#include "robustnmt/runconfig.hpp"
#include "robustnmt/trainer.hpp"
#include "robustnmt/vocab.hpp"

namespace robustnmt {

namespace {

namespace fs = std::filesystem;

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

std::string utc_stamp() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y%m%d-%H%M%S", &tm);
  return buf;
}

std::vector<std::string> split_list(const std::string& text, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(text);
  while (std::getline(in, item, sep))
    if (!item.empty()) out.push_back(item);
  return out;
}

std::string join_tokens(const std::vector<std::string>& tokens) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out.push_back(' ');
    out += tokens[i];
  }
  return out;
}

// A prepared run directory: resolved config echoed, log open. Artifact
// names are forced to stay inside the directory.
struct RunContext {
  RunConfig cfg;
  fs::path dir;
  std::ofstream log_file;
  std::ostream* out = nullptr;

  // To the run log and the console.
  void say(const std::string& line) {
    log_file << line << '\n';
    log_file.flush();
    (*out) << line << '\n';
  }
  // To the run log only.
  void note(const std::string& line) {
    log_file << line << '\n';
    log_file.flush();
  }

  std::string artifact(const std::string& name) const {
    const fs::path p(name);
    if (name.empty() || p.is_absolute() || name.find("..") != std::string::npos)
      throw ConfigError("artifact name must stay inside the run directory: " + name);
    return (dir / p).string();
  }

  void write_artifact(const std::string& name, const std::string& content) {
    const std::string path = artifact(name);
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw DataError("cannot write " + path);
    f << content;
    if (!f.good()) throw DataError("short write on " + path);
    note("wrote " + path);
  }
};

RunContext open_run(RunConfig cfg, std::ostream& out) {
  RunContext ctx;
  ctx.cfg = std::move(cfg);
  ctx.out = &out;
  std::string dir = ctx.cfg.get("run.dir");
  if (dir.empty()) {
    dir = (fs::path(ctx.cfg.get("run.root")) /
           (utc_stamp() + "-" + ctx.cfg.get("run.name")))
              .string();
  }
  ctx.dir = dir;
  if (fs::exists(ctx.dir) && !ctx.cfg.get_bool("run.force"))
    throw ConfigError("run directory already exists (pass --force to reuse): " + dir);
  fs::create_directories(ctx.dir);
  {
    std::ofstream echo(ctx.dir / "config.resolved", std::ios::trunc);
    if (!echo) throw DataError("cannot write into run directory: " + dir);
    echo << ctx.cfg.resolved();
  }
  ctx.log_file.open(ctx.dir / "run.log", std::ios::trunc);
  if (!ctx.log_file) throw DataError("cannot open run log in " + dir);
  out << "run directory: " << dir << "\n";
  return ctx;
}

const std::string& require(const RunConfig& cfg, const char* key) {
  const std::string& v = cfg.get(key);
  if (v.empty()) throw ConfigError(std::string(key) + " is required for this command");
  return v;
}

ModelConfig model_config(const RunConfig& cfg, std::size_t src_vocab,
                         std::size_t tgt_vocab) {
  ModelConfig m;
  m.src_vocab = src_vocab;
  m.tgt_vocab = tgt_vocab;
  m.embed_dim = cfg.get_size("model.embed_dim");
  m.hidden_dim = cfg.get_size("model.hidden_dim");
  m.dropout = cfg.get_double("model.dropout");
  m.max_decode_len = cfg.get_size("model.max_decode_len");
  m.validate();
  return m;
}

PerturbationSpec perturb_spec(const RunConfig& cfg) {
  PerturbationSpec s;
  s.kind = perturb_kind_from_name(cfg.get("perturb.kind"));
  s.ratio = cfg.get_double("perturb.ratio");
  s.sigma = cfg.get_double("perturb.sigma");
  s.n_ops = cfg.get_size("perturb.n_ops");
  s.validate();
  return s;
}

// Evaluation-side corruption for the ablation grid, independent of the
// training perturbation so synthetic kinds stay available.
PerturbationSpec noise_spec(const RunConfig& cfg) {
  PerturbationSpec s;
  s.kind = perturb_kind_from_name(cfg.get("eval.noise_kind"));
  s.ratio = cfg.get_double("eval.noise_ratio");
  s.sigma = cfg.get_double("eval.noise_sigma");
  s.n_ops = cfg.get_size("eval.noise_ops");
  s.validate();
  return s;
}

LrSchedule lr_schedule(const RunConfig& cfg) {
  LrSchedule lr;
  const std::string& kind = cfg.get("train.lr_schedule");
  if (kind == "constant")
    lr.kind = LrSchedule::Kind::kConstant;
  else if (kind == "inverse-sqrt")
    lr.kind = LrSchedule::Kind::kInverseSqrt;
  else
    throw ConfigError("train.lr_schedule: expected constant or inverse-sqrt, got " + kind);
  lr.base = cfg.get_double("train.lr");
  lr.warmup = cfg.get_size("train.warmup");
  lr.validate();
  return lr;
}

TrainConfig train_config(const RunContext& ctx) {
  const RunConfig& cfg = ctx.cfg;
  TrainConfig t;
  t.alpha = cfg.get_double("train.alpha");
  t.beta = cfg.get_double("train.beta");
  t.perturbation = perturb_spec(cfg);
  t.batch_size = cfg.get_size("train.batch_size");
  t.steps = cfg.get_size("train.steps");
  t.lr = lr_schedule(cfg);
  t.seed = cfg.get_u64("train.seed");
  t.flags.use_true = cfg.get_bool("train.use_true");
  t.flags.use_inv = cfg.get_bool("train.use_inv");
  t.flags.use_noisy = cfg.get_bool("train.use_noisy");
  t.dis_channels = cfg.get_size("train.dis_channels");
  t.eval_interval = cfg.get_size("train.eval_interval");
  t.checkpoint_path = ctx.artifact(cfg.get("train.checkpoint"));
  t.metrics_path = ctx.artifact("metrics.csv");
  return t;
}

Vocabulary load_vocab(const RunConfig& cfg, const char* key) {
  return Vocabulary::load(require(cfg, key));
}

ParallelCorpus load_pair(const RunConfig& cfg, const char* src_key, const char* tgt_key,
                         const Vocabulary& sv, const Vocabulary& tv) {
  return load_parallel_corpus(require(cfg, src_key), require(cfg, tgt_key), sv, tv,
                              cfg.get_size("data.max_len"));
}

bool has_dev(const RunConfig& cfg) {
  const bool src = !cfg.get("data.src_dev").empty();
  const bool tgt = !cfg.get("data.tgt_dev").empty();
  if (src != tgt)
    throw ConfigError("data.src_dev and data.tgt_dev must be given together");
  return src;
}

// Vocabulary files must agree with the checkpoint they will be used with.
void check_vocab_sizes(const CheckpointData& ck, const Vocabulary& sv,
                       const Vocabulary& tv) {
  if (ck.config.src_vocab != sv.size() || ck.config.tgt_vocab != tv.size()) {
    throw ConfigError(
        "checkpoint was trained with vocabulary sizes " +
        std::to_string(ck.config.src_vocab) + "/" + std::to_string(ck.config.tgt_vocab) +
        " but the loaded vocabularies have " + std::to_string(sv.size()) + "/" +
        std::to_string(tv.size()));
  }
}

std::string step_line(const TrainStepReport& r) {
  std::string line = "step " + std::to_string(r.step) + ": L_true=" + fmt(r.l_true) +
                     " L_inv=" + fmt(r.l_inv) + " L_noisy=" + fmt(r.l_noisy) +
                     " total=" + fmt(r.total) + " disc_acc=" + fmt(r.disc_accuracy);
  if (r.skipped) line += " (skipped: non-finite)";
  return line;
}

EvalObserver make_observer(RunContext& ctx, const ParallelCorpus* dev, std::size_t beam,
                           bool smooth) {
  EvalObserver obs;
  if (dev != nullptr) {
    obs.dev_bleu = [&ctx, dev, beam, smooth](const ModelParams& m, std::size_t step) {
      const std::vector<Sentence> hyps = translate_corpus(m, dev->source, beam);
      const double score = corpus_bleu(hyps, dev->target, smooth).score;
      ctx.say("step " + std::to_string(step) + ": dev BLEU = " + fmt(score));
      return score;
    };
  }
  obs.on_step = [&ctx](const TrainStepReport& r) { ctx.note(step_line(r)); };
  obs.on_incident = [&ctx](std::size_t step, const std::string& msg) {
    ctx.say("step " + std::to_string(step) + ": " + msg);
  };
  return obs;
}

std::string bleu_block(const BleuReport& rep) {
  std::ostringstream out;
  out << "BLEU = " << fmt(rep.score) << (rep.smoothed ? " (add-one smoothing)" : "")
      << "\n";
  for (std::size_t n = 0; n < 4; ++n) {
    out << "  " << (n + 1) << "-gram precision " << fmt(rep.precisions[n]) << " ("
        << rep.matches[n] << "/" << rep.totals[n] << ")\n";
  }
  out << "  brevity penalty " << fmt(rep.brevity_penalty) << " (hyp " << rep.hyp_length
      << ", ref " << rep.ref_length << ")\n";
  return out.str();
}

// ---- commands ----

void cmd_build_vocab(RunContext& ctx) {
  const RunConfig& cfg = ctx.cfg;
  std::vector<std::string> lines;
  for (const std::string& path : split_list(require(cfg, "data.vocab_input"), ',')) {
    const std::vector<std::string> chunk = read_lines(path);
    lines.insert(lines.end(), chunk.begin(), chunk.end());
    ctx.note("read " + std::to_string(chunk.size()) + " lines from " + path);
  }
  const Vocabulary vocab = Vocabulary::build(lines, cfg.get_size("data.vocab_max_size"),
                                             cfg.get_size("data.vocab_min_freq"));
  const std::string path = ctx.artifact(cfg.get("data.vocab_out"));
  vocab.save(path);
  ctx.say("vocabulary: " + std::to_string(vocab.size()) + " ids (" +
          std::to_string(vocab.size() - Vocabulary::kReserved) + " content tokens) -> " +
          path);
}

void cmd_train(RunContext& ctx, bool adversarial) {
  const RunConfig& cfg = ctx.cfg;
  const Vocabulary sv = load_vocab(cfg, "data.src_vocab");
  const Vocabulary tv = load_vocab(cfg, "data.tgt_vocab");
  const ParallelCorpus corpus = load_pair(cfg, "data.src_train", "data.tgt_train", sv, tv);
  ctx.say("training pairs: " + std::to_string(corpus.size()));

  ParallelCorpus dev;
  const bool with_dev = has_dev(cfg);
  if (with_dev) {
    dev = load_pair(cfg, "data.src_dev", "data.tgt_dev", sv, tv);
    ctx.say("development pairs: " + std::to_string(dev.size()));
  }

  TrainConfig tcfg = train_config(ctx);
  if (!adversarial) {
    // Pure likelihood training: both extra terms off, no discriminator.
    tcfg.alpha = 0.0;
    tcfg.beta = 0.0;
    tcfg.flags = {true, false, false};
  }
  tcfg.validate();

  const ModelConfig mcfg = model_config(cfg, sv.size(), tv.size());
  TrainState state;
  const std::string& init_path = cfg.get("train.init_checkpoint");
  if (!init_path.empty()) {
    const CheckpointData ck = load_checkpoint(init_path);
    check_vocab_sizes(ck, sv, tv);
    if (adversarial && !ck.has_discriminator) {
      // Fresh adversarial stage on top of a likelihood-trained model.
      state = ast_init(ck.model, tcfg);
      ctx.say("adversarial stage from " + init_path + " (pretrained " +
              std::to_string(ck.step) + " steps)");
    } else {
      state = from_checkpoint(ck);
      ctx.say("resumed " + init_path + " at step " + std::to_string(state.step));
    }
    if (ck.config.embed_dim != mcfg.embed_dim || ck.config.hidden_dim != mcfg.hidden_dim)
      ctx.say("note: model.* keys differ from the checkpoint; the checkpoint wins");
  } else if (adversarial) {
    RngStream mrng("model", tcfg.seed);
    state = ast_init(ModelParams::init(mcfg, mrng), tcfg);
    ctx.say("fresh adversarial run, seed " + std::to_string(tcfg.seed));
  } else {
    state = mle_init(mcfg, tcfg);
    ctx.say("fresh likelihood run, seed " + std::to_string(tcfg.seed));
  }

  EvalObserver obs = make_observer(ctx, with_dev ? &dev : nullptr,
                                   cfg.get_size("eval.beam"),
                                   cfg.get_bool("eval.smooth_bleu"));
  train_loop(state, corpus, tcfg, &obs);
  ctx.say("finished at step " + std::to_string(state.step) + "; checkpoint " +
          tcfg.checkpoint_path);
}

void cmd_translate(RunContext& ctx) {
  const RunConfig& cfg = ctx.cfg;
  const CheckpointData ck = load_checkpoint(require(cfg, "eval.checkpoint"));
  const Vocabulary sv = load_vocab(cfg, "data.src_vocab");
  const Vocabulary tv = load_vocab(cfg, "data.tgt_vocab");
  check_vocab_sizes(ck, sv, tv);
  const std::size_t beam = cfg.get_size("eval.beam");

  const std::vector<std::string> lines = read_lines(require(cfg, "eval.src"));
  std::ostringstream body;
  for (const std::string& line : lines) {
    const std::vector<std::string> tokens = split_tokens(line);
    if (tokens.empty()) {
      body << "\n";
      continue;
    }
    const Hypothesis hyp =
        beam_search(ck.model, sv.encode(tokens), beam, ck.config.max_decode_len);
    body << join_tokens(tv.decode(hyp.ids)) << "\n";
  }
  ctx.write_artifact(cfg.get("eval.out"), body.str());
  ctx.say("translated " + std::to_string(lines.size()) + " lines -> " +
          ctx.artifact(cfg.get("eval.out")));
}

void cmd_evaluate(RunContext& ctx) {
  const RunConfig& cfg = ctx.cfg;
  const CheckpointData ck = load_checkpoint(require(cfg, "eval.checkpoint"));
  const Vocabulary sv = load_vocab(cfg, "data.src_vocab");
  const Vocabulary tv = load_vocab(cfg, "data.tgt_vocab");
  check_vocab_sizes(ck, sv, tv);
  const ParallelCorpus corpus =
      load_parallel_corpus(require(cfg, "eval.src"), require(cfg, "eval.ref"), sv, tv,
                           cfg.get_size("data.max_len"));
  const std::vector<Sentence> hyps =
      translate_corpus(ck.model, corpus.source, cfg.get_size("eval.beam"));
  const BleuReport rep =
      corpus_bleu(hyps, corpus.target, cfg.get_bool("eval.smooth_bleu"));
  ctx.write_artifact("evaluation.txt", bleu_block(rep));
  ctx.say("scored " + std::to_string(corpus.size()) + " pairs");
  ctx.say("BLEU = " + fmt(rep.score));
}

void cmd_perturb_corpus(RunContext& ctx) {
  const RunConfig& cfg = ctx.cfg;
  const PerturbationSpec spec = perturb_spec(cfg);
  if (spec.kind == PerturbKind::kFeature) {
    throw ConfigError(
        "perturb.kind=feature lives in embedding space and cannot be written as tokens");
  }
  const Vocabulary sv = load_vocab(cfg, "data.src_vocab");

  Tensor embeddings;
  bool lexical = spec.kind == PerturbKind::kLexical;
  if (lexical) {
    const CheckpointData ck = load_checkpoint(require(cfg, "perturb.checkpoint"));
    if (ck.config.src_vocab != sv.size()) {
      throw ConfigError("perturb.checkpoint source vocabulary (" +
                        std::to_string(ck.config.src_vocab) +
                        ") does not match data.src_vocab (" + std::to_string(sv.size()) +
                        ")");
    }
    embeddings = ck.model.src_embed;
  }

  const std::vector<std::string> lines = read_lines(require(cfg, "perturb.input"));
  RngStream root("perturb-corpus", cfg.get_u64("perturb.seed"));
  std::ostringstream body;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::vector<std::string> tokens = split_tokens(lines[i]);
    if (tokens.empty()) {
      body << "\n";
      continue;
    }
    RngStream rng = root.split("sent", i);
    const Sentence ids = sv.encode(tokens);
    const Sentence noisy = lexical ? perturb_lexical(ids, embeddings, spec, rng)
                                   : synth_perturb(ids, spec, sv.size(), rng);
    body << join_tokens(sv.decode(noisy)) << "\n";
  }
  ctx.write_artifact(cfg.get("perturb.out"), body.str());
  ctx.say("perturbed " + std::to_string(lines.size()) + " lines (" +
          perturb_kind_name(spec.kind) + ") -> " + ctx.artifact(cfg.get("perturb.out")));
}

void cmd_robustness(RunContext& ctx) {
  const RunConfig& cfg = ctx.cfg;
  const CheckpointData ck = load_checkpoint(require(cfg, "eval.checkpoint"));
  const Vocabulary sv = load_vocab(cfg, "data.src_vocab");
  if (ck.config.src_vocab != sv.size())
    throw ConfigError("checkpoint and data.src_vocab disagree on vocabulary size");

  ParallelCorpus corpus;
  for (const std::string& line : read_lines(require(cfg, "eval.src"))) {
    const std::vector<std::string> tokens = split_tokens(line);
    if (tokens.empty()) continue;
    corpus.source.push_back(sv.encode(tokens));
    corpus.target.push_back(corpus.source.back());  // references are unused here
  }
  if (corpus.size() == 0) throw DataError("eval.src has no non-empty lines");

  const RobustnessReport rep =
      robustness_metrics(ck.model, corpus, perturb_spec(cfg), cfg.get_size("eval.beam"),
                         cfg.get_u64("eval.seed"), cfg.get_bool("eval.smooth_bleu"));
  std::ostringstream body;
  body << "sentences: " << corpus.size() << "\n"
       << "changed translations: " << fmt(rep.changed_ratio) << "\n"
       << "cross-BLEU (perturbed vs clean):\n"
       << bleu_block(rep.cross_bleu);
  ctx.write_artifact("robustness.txt", body.str());
  ctx.say("changed-translation ratio = " + fmt(rep.changed_ratio));
  ctx.say("cross-BLEU = " + fmt(rep.cross_bleu.score));
}

// "0..5" or "5" -> 5; ranges must start at zero because column 0 is the
// clean score.
std::size_t parse_ops(const std::string& text) {
  const std::size_t dots = text.find("..");
  std::string lo = "0";
  std::string hi = text;
  if (dots != std::string::npos) {
    lo = text.substr(0, dots);
    hi = text.substr(dots + 2);
  }
  try {
    if (std::stoll(lo) != 0) throw ConfigError("eval.ops must start at 0");
    const long long n = std::stoll(hi);
    if (n < 0) throw ConfigError("eval.ops: negative count");
    return static_cast<std::size_t>(n);
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception&) {
    throw ConfigError("eval.ops: expected 0..N or N, got " + text);
  }
}

void cmd_sweep(RunContext& ctx) {
  const RunConfig& cfg = ctx.cfg;
  const Vocabulary sv = load_vocab(cfg, "data.src_vocab");
  const Vocabulary tv = load_vocab(cfg, "data.tgt_vocab");
  const ParallelCorpus corpus = load_pair(cfg, "data.src_dev", "data.tgt_dev", sv, tv);

  std::deque<CheckpointData> loaded;
  std::vector<NamedModel> models;
  for (const std::string& entry : split_list(require(cfg, "eval.models"), ',')) {
    const std::size_t eq = entry.find('=');
    const std::string name =
        eq == std::string::npos ? fs::path(entry).stem().string() : entry.substr(0, eq);
    const std::string path = eq == std::string::npos ? entry : entry.substr(eq + 1);
    loaded.push_back(load_checkpoint(path));
    check_vocab_sizes(loaded.back(), sv, tv);
    models.push_back({name, &loaded.back().model});
    ctx.note("loaded " + name + " from " + path);
  }

  std::vector<PerturbKind> kinds;
  for (const std::string& name : split_list(cfg.get("eval.kinds"), ','))
    kinds.push_back(perturb_kind_from_name(name));

  const std::vector<SweepRow> rows = synthetic_sweep(
      models, corpus, kinds, parse_ops(cfg.get("eval.ops")), cfg.get_size("eval.beam"),
      cfg.get_u64("eval.seed"), cfg.get_bool("eval.smooth_bleu"));
  ctx.write_artifact("sweep.csv", sweep_to_csv(rows));
  const std::string table = sweep_to_text(rows);
  ctx.write_artifact("sweep.txt", table);
  (*ctx.out) << table;
  ctx.note(table);
}

void cmd_ablate(RunContext& ctx) {
  const RunConfig& cfg = ctx.cfg;
  const CheckpointData ck = load_checkpoint(require(cfg, "train.init_checkpoint"));
  const Vocabulary sv = load_vocab(cfg, "data.src_vocab");
  const Vocabulary tv = load_vocab(cfg, "data.tgt_vocab");
  check_vocab_sizes(ck, sv, tv);
  const ParallelCorpus train = load_pair(cfg, "data.src_train", "data.tgt_train", sv, tv);
  const ParallelCorpus dev = load_pair(cfg, "data.src_dev", "data.tgt_dev", sv, tv);
  ctx.say("training pairs: " + std::to_string(train.size()) + ", development pairs: " +
          std::to_string(dev.size()));

  TrainConfig base = train_config(ctx);
  EvalObserver obs = make_observer(ctx, nullptr, cfg.get_size("eval.beam"),
                                   cfg.get_bool("eval.smooth_bleu"));
  const std::vector<AblationRow> rows = ablation_run(
      ck.model, train, dev, base, noise_spec(cfg), cfg.get_size("eval.beam"),
      cfg.get_u64("eval.seed"), cfg.get_bool("eval.smooth_bleu"), &obs);
  ctx.write_artifact("ablation.csv", ablation_to_csv(rows));
  const std::string table = ablation_to_text(rows);
  ctx.write_artifact("ablation.txt", table);
  (*ctx.out) << table;
  ctx.note(table);
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"robustnmt: adversarial stability training for neural machine translation"};
  app.require_subcommand(1);
  app.footer("Configuration keys (defaults < --config file < environment < --set):\n" +
             RunConfig::documentation());

  std::vector<std::string> config_files;
  std::vector<std::string> sets;
  bool force = false;
  std::string run_dir;
  std::string run_name;

  // Ergonomic flags append to `sets` during parsing, so later flags
  // override earlier ones exactly like repeated --set assignments.
  auto common = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_files, "configuration file, key = value lines");
    cmd->add_option("--set", sets, "override one configuration key, key=value");
    cmd->add_flag("--force", force, "write into an existing run directory");
    cmd->add_option("--run-dir", run_dir, "explicit run directory");
    cmd->add_option("--name", run_name, "run name used in the directory stamp");
    return cmd;
  };
  auto alias = [&](CLI::App* cmd, const std::string& flag, const std::string& key,
                   const std::string& doc) {
    cmd->add_option_function<std::string>(
        flag, [&sets, key](const std::string& v) { sets.push_back(key + "=" + v); }, doc);
  };

  CLI::App* vocab = common(app.add_subcommand(
      "build-vocab", "build a vocabulary file from whitespace-tokenized text"));
  alias(vocab, "--input", "data.vocab_input", "input text file(s), comma-separated");
  alias(vocab, "--output", "data.vocab_out", "output file name in the run directory");
  alias(vocab, "--max-size", "data.vocab_max_size", "content-token cap");
  alias(vocab, "--min-freq", "data.vocab_min_freq", "minimum token frequency");

  CLI::App* mle = common(
      app.add_subcommand("train-mle", "likelihood-only training (or resume)"));
  alias(mle, "--init", "train.init_checkpoint", "checkpoint to resume from");

  CLI::App* ast = common(app.add_subcommand(
      "train-ast", "adversarial stability training from a pretrained model"));
  alias(ast, "--init", "train.init_checkpoint", "pretrained checkpoint to start from");

  CLI::App* translate =
      common(app.add_subcommand("translate", "decode a source file, one line per line"));
  alias(translate, "--ckpt", "eval.checkpoint", "model checkpoint");
  alias(translate, "--src", "eval.src", "source text file");
  alias(translate, "--beam", "eval.beam", "beam width");
  alias(translate, "--out", "eval.out", "output file name in the run directory");

  CLI::App* evaluate =
      common(app.add_subcommand("evaluate", "translate and score against references"));
  alias(evaluate, "--ckpt", "eval.checkpoint", "model checkpoint");
  alias(evaluate, "--src", "eval.src", "source text file");
  alias(evaluate, "--ref", "eval.ref", "reference translation file");
  alias(evaluate, "--beam", "eval.beam", "beam width");

  CLI::App* perturb = common(app.add_subcommand(
      "perturb-corpus", "write a perturbed copy of a source file"));
  alias(perturb, "--input", "perturb.input", "input text file");
  alias(perturb, "--kind", "perturb.kind", "lexical, swap, replace-uniform, or delete");
  alias(perturb, "--ckpt", "perturb.checkpoint", "embedding source for the lexical kind");
  alias(perturb, "--out", "perturb.out", "output file name in the run directory");

  CLI::App* robustness = common(app.add_subcommand(
      "robustness-report", "changed-translation ratio and cross-BLEU under noise"));
  alias(robustness, "--ckpt", "eval.checkpoint", "model checkpoint");
  alias(robustness, "--src", "eval.src", "source text file");
  alias(robustness, "--beam", "eval.beam", "beam width");

  CLI::App* sweep = common(app.add_subcommand(
      "sweep", "BLEU grid of models under synthetic corruption"));
  alias(sweep, "--models", "eval.models", "comma-separated name=checkpoint entries");
  alias(sweep, "--ops", "eval.ops", "operation-count range, 0..N");
  alias(sweep, "--kinds", "eval.kinds", "corruption kinds, comma-separated");

  CLI::App* ablate = common(app.add_subcommand(
      "ablate", "loss-term ablation grid from a pretrained checkpoint"));
  alias(ablate, "--init", "train.init_checkpoint", "pretrained checkpoint");

  auto resolve = [&]() {
    RunConfig cfg;
    for (const std::string& f : config_files) cfg.apply_file(f);
    cfg.apply_env();
    for (const std::string& s : sets) cfg.apply_set(s);
    if (force) cfg.set("run.force", "true");
    if (!run_dir.empty()) cfg.set("run.dir", run_dir);
    if (!run_name.empty()) cfg.set("run.name", run_name);
    return cfg;
  };

  vocab->callback([&] {
    RunContext ctx = open_run(resolve(), out);
    cmd_build_vocab(ctx);
  });
  mle->callback([&] {
    RunContext ctx = open_run(resolve(), out);
    cmd_train(ctx, false);
  });
  ast->callback([&] {
    RunContext ctx = open_run(resolve(), out);
    cmd_train(ctx, true);
  });
  translate->callback([&] {
    RunContext ctx = open_run(resolve(), out);
    cmd_translate(ctx);
  });
  evaluate->callback([&] {
    RunContext ctx = open_run(resolve(), out);
    cmd_evaluate(ctx);
  });
  perturb->callback([&] {
    RunContext ctx = open_run(resolve(), out);
    cmd_perturb_corpus(ctx);
  });
  robustness->callback([&] {
    RunContext ctx = open_run(resolve(), out);
    cmd_robustness(ctx);
  });
  sweep->callback([&] {
    RunContext ctx = open_run(resolve(), out);
    cmd_sweep(ctx);
  });
  ablate->callback([&] {
    RunContext ctx = open_run(resolve(), out);
    cmd_ablate(ctx);
  });

  std::vector<std::string> argv = args;
  argv.insert(argv.begin(), "robustnmt");
  std::vector<const char*> ptrs;
  ptrs.reserve(argv.size());
  for (const std::string& a : argv) ptrs.push_back(a.c_str());

  try {
    app.parse(static_cast<int>(ptrs.size()), ptrs.data());
    return 0;
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const DataError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const NumericalError& e) {
    err << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace robustnmt
