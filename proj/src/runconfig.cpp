// SPDX-License-Identifier: Apache-2.0

#include "robustnmt/runconfig.hpp"

#include <cctype>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "robustnmt/error.hpp"

namespace robustnmt {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

}  // namespace

const std::vector<ConfigKey>& RunConfig::registry() {
  static const std::vector<ConfigKey> keys = {
      {"run.root", "runs", "parent directory for composed run directories"},
      {"run.name", "run", "run name, appended to the timestamp in the directory"},
      {"run.dir", "", "explicit run directory; empty composes root/<stamp>-<name>"},
      {"run.force", "false", "write into an existing run directory"},

      {"data.src_train", "", "source-side training text, one sentence per line"},
      {"data.tgt_train", "", "target-side training text, line-aligned to the source"},
      {"data.src_dev", "", "source-side development text"},
      {"data.tgt_dev", "", "target-side development text"},
      {"data.src_vocab", "", "source vocabulary file (token<TAB>count per line)"},
      {"data.tgt_vocab", "", "target vocabulary file"},
      {"data.max_len", "50", "drop sentence pairs with a side longer than this"},
      {"data.vocab_input", "", "build-vocab: comma-separated input text files"},
      {"data.vocab_out", "vocab.tsv", "build-vocab: output file name in the run directory"},
      {"data.vocab_max_size", "50000", "build-vocab: keep at most this many content tokens"},
      {"data.vocab_min_freq", "1", "build-vocab: drop tokens seen fewer times"},

      {"model.embed_dim", "32", "embedding width"},
      {"model.hidden_dim", "32", "recurrent state width"},
      {"model.dropout", "0.1", "dropout rate applied during training"},
      {"model.max_decode_len", "50", "decoding length cap"},

      {"train.alpha", "1", "weight of the adversarial loss term"},
      {"train.beta", "1", "weight of the perturbed-likelihood loss term"},
      {"train.batch_size", "16", "sentence pairs per step"},
      {"train.steps", "1000", "optimization steps"},
      {"train.lr", "0.001", "learning rate (peak value for inverse-sqrt)"},
      {"train.lr_schedule", "constant", "constant or inverse-sqrt"},
      {"train.warmup", "0", "inverse-sqrt warmup steps"},
      {"train.seed", "1", "seed for initialization, shuffling, and perturbation"},
      {"train.dis_channels", "8", "discriminator channels per filter width"},
      {"train.eval_interval", "0", "steps between evaluations; 0 evaluates at the end only"},
      {"train.use_true", "true", "include the clean likelihood term"},
      {"train.use_inv", "true", "include the adversarial term"},
      {"train.use_noisy", "true", "include the perturbed likelihood term"},
      {"train.checkpoint", "model.ckpt", "checkpoint file name in the run directory"},
      {"train.init_checkpoint", "", "checkpoint to start from (required for ablate)"},

      {"perturb.kind", "lexical", "lexical, feature, swap, replace-uniform, or delete"},
      {"perturb.ratio", "0.2", "lexical: fraction of positions replaced"},
      {"perturb.sigma", "0.01", "feature: Gaussian noise scale"},
      {"perturb.n_ops", "1", "synthetic kinds: operations per sentence"},
      {"perturb.seed", "1", "perturb-corpus: corruption seed"},
      {"perturb.input", "", "perturb-corpus: input text file"},
      {"perturb.out", "perturbed.txt", "perturb-corpus: output file name in the run directory"},
      {"perturb.checkpoint", "", "perturb-corpus: embeddings source for the lexical kind"},

      {"eval.checkpoint", "", "model checkpoint for translate/evaluate/robustness-report"},
      {"eval.src", "", "source text to translate or evaluate"},
      {"eval.ref", "", "reference translations"},
      {"eval.beam", "10", "beam width"},
      {"eval.out", "translations.txt", "translate: output file name in the run directory"},
      {"eval.smooth_bleu", "true", "apply add-one BLEU smoothing in reports"},
      {"eval.noise_kind", "swap", "ablate: dev-side corruption kind"},
      {"eval.noise_ratio", "0.2", "ablate: dev-side lexical replacement fraction"},
      {"eval.noise_sigma", "0.01", "ablate: dev-side feature noise scale"},
      {"eval.noise_ops", "1", "ablate: dev-side synthetic operations per sentence"},
      {"eval.models", "", "sweep: comma-separated name=checkpoint entries"},
      {"eval.kinds", "swap,replace-uniform,delete", "sweep: corruption kinds"},
      {"eval.ops", "0..5", "sweep: operation-count range, 0..N or N"},
      {"eval.seed", "1", "evaluation-side corruption seed"},
  };
  return keys;
}

bool RunConfig::known(const std::string& key) {
  for (const ConfigKey& k : registry())
    if (key == k.name) return true;
  return false;
}

std::string RunConfig::env_name(const std::string& key) {
  std::string out = "RNMT_";
  for (char ch : key) {
    if (ch == '.' || ch == '-')
      out.push_back('_');
    else
      out.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(ch))));
  }
  return out;
}

RunConfig::RunConfig() {
  for (const ConfigKey& k : registry()) values_[k.name] = k.preset;
}

void RunConfig::apply_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open config file: " + path);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string stripped = trim(line);
    if (stripped.empty() || stripped[0] == '#') continue;
    const std::size_t eq = stripped.find('=');
    if (eq == std::string::npos)
      throw ConfigError(path + ":" + std::to_string(line_no) +
                        ": expected key = value, got: " + stripped);
    set(trim(stripped.substr(0, eq)), trim(stripped.substr(eq + 1)));
  }
}

void RunConfig::apply_env() {
  for (const ConfigKey& k : registry()) {
    const char* value = std::getenv(env_name(k.name).c_str());
    if (value != nullptr) values_[k.name] = value;
  }
}

void RunConfig::apply_set(const std::string& assignment) {
  const std::size_t eq = assignment.find('=');
  if (eq == std::string::npos)
    throw ConfigError("expected key=value in --set, got: " + assignment);
  set(trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

void RunConfig::set(const std::string& key, const std::string& value) {
  if (!known(key)) throw ConfigError("unknown config key: " + key);
  values_[key] = value;
}

const std::string& RunConfig::get(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("unknown config key: " + key);
  return it->second;
}

std::int64_t RunConfig::get_int(const std::string& key) const {
  const std::string& v = get(key);
  try {
    std::size_t used = 0;
    const std::int64_t out = std::stoll(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return out;
  } catch (const std::exception&) {
    throw ConfigError(key + ": not an integer: " + v);
  }
}

std::size_t RunConfig::get_size(const std::string& key) const {
  const std::int64_t v = get_int(key);
  if (v < 0) throw ConfigError(key + ": must be non-negative, got " + get(key));
  return static_cast<std::size_t>(v);
}

std::uint64_t RunConfig::get_u64(const std::string& key) const {
  return static_cast<std::uint64_t>(get_size(key));
}

double RunConfig::get_double(const std::string& key) const {
  const std::string& v = get(key);
  try {
    std::size_t used = 0;
    const double out = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return out;
  } catch (const std::exception&) {
    throw ConfigError(key + ": not a number: " + v);
  }
}

bool RunConfig::get_bool(const std::string& key) const {
  const std::string& v = get(key);
  if (v == "true" || v == "yes" || v == "1") return true;
  if (v == "false" || v == "no" || v == "0") return false;
  throw ConfigError(key + ": not a boolean: " + v);
}

std::string RunConfig::resolved() const {
  std::ostringstream out;
  for (const auto& [key, value] : values_) out << key << " = " << value << "\n";
  return out.str();
}

std::string RunConfig::documentation() {
  std::ostringstream out;
  for (const ConfigKey& k : registry()) {
    out << "  " << k.name << " (default: " << (k.preset[0] ? k.preset : "empty")
        << ")\n      " << k.doc << "\n";
  }
  return out.str();
}

}  // namespace robustnmt
