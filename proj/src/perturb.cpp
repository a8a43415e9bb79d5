// SPDX-License-Identifier: Apache-2.0

#include "robustnmt/perturb.hpp"

#include <algorithm>
#include <cmath>

#include "robustnmt/error.hpp"
#include "robustnmt/kernels.hpp"

namespace robustnmt {

void PerturbationSpec::validate() const {
  if (!(ratio > 0.0 && ratio <= 1.0))
    throw ConfigError("perturbation: ratio must be in (0, 1], got " + std::to_string(ratio));
  if (sigma < 0.0)
    throw ConfigError("perturbation: sigma must be nonnegative, got " + std::to_string(sigma));
}

PerturbKind perturb_kind_from_name(const std::string& name) {
  if (name == "lexical") return PerturbKind::kLexical;
  if (name == "feature") return PerturbKind::kFeature;
  if (name == "swap") return PerturbKind::kSwap;
  if (name == "replace-uniform") return PerturbKind::kReplaceUniform;
  if (name == "delete") return PerturbKind::kDelete;
  throw ConfigError("perturbation: unknown kind \"" + name +
                    "\" (expected lexical|feature|swap|replace-uniform|delete)");
}

const char* perturb_kind_name(PerturbKind kind) {
  switch (kind) {
    case PerturbKind::kLexical: return "lexical";
    case PerturbKind::kFeature: return "feature";
    case PerturbKind::kSwap: return "swap";
    case PerturbKind::kReplaceUniform: return "replace-uniform";
    case PerturbKind::kDelete: return "delete";
  }
  return "?";
}

std::size_t num_replacements(std::size_t length, double ratio) {
  if (length == 0) throw NumericalError("num_replacements: empty sentence");
  const auto k = static_cast<std::size_t>(std::floor(ratio * static_cast<double>(length)));
  return std::max<std::size_t>(k, 1);
}

std::vector<double> lexical_distribution(const Tensor& embeddings, std::int32_t word_id) {
  const auto& shape = embeddings.shape();
  if (shape.size() != 2)
    throw ShapeError("lexical_distribution: embeddings must be [V, D], got " +
                     embeddings.shape_str());
  const std::size_t v = shape[0], d = shape[1];
  if (word_id < static_cast<std::int32_t>(Vocabulary::kReserved) ||
      static_cast<std::size_t>(word_id) >= v)
    throw DataError("lexical_distribution: id " + std::to_string(word_id) +
                    " is not a content token of a vocabulary of " + std::to_string(v));
  const double* base = embeddings.values().data();
  const double* e_i = base + static_cast<std::size_t>(word_id) * d;
  const double norm_i = std::sqrt(kern::active().dot(e_i, e_i, d));

  std::vector<double> probs(v, 0.0);
  double total = 0.0;
  for (std::size_t x = Vocabulary::kReserved; x < v; ++x) {
    if (x == static_cast<std::size_t>(word_id)) continue;
    const double* e_x = base + x * d;
    const double norm_x = std::sqrt(kern::active().dot(e_x, e_x, d));
    double cosine = 0.0;
    if (norm_i > 0.0 && norm_x > 0.0)
      cosine = kern::active().dot(e_i, e_x, d) / (norm_i * norm_x);
    probs[x] = std::exp(cosine);
    total += probs[x];
  }
  if (total <= 0.0)
    throw NumericalError("lexical_distribution: no replacement candidates for id " +
                         std::to_string(word_id));
  for (double& p : probs) p /= total;
  return probs;
}

Sentence perturb_lexical(const Sentence& x, const Tensor& embeddings,
                         const PerturbationSpec& spec, RngStream& rng) {
  spec.validate();
  if (x.empty()) throw NumericalError("perturb_lexical: empty sentence");
  std::vector<std::size_t> content;  // positions holding replaceable tokens
  for (std::size_t i = 0; i < x.size(); ++i)
    if (x[i] >= static_cast<std::int32_t>(Vocabulary::kReserved)) content.push_back(i);
  Sentence out = x;
  if (content.empty()) return out;
  const std::size_t k =
      std::min(num_replacements(x.size(), spec.ratio), content.size());
  for (std::size_t pick : rng.sample_distinct(content.size(), k)) {
    const std::size_t pos = content[pick];
    const std::vector<double> pmf = lexical_distribution(embeddings, x[pos]);
    out[pos] = static_cast<std::int32_t>(rng.sample_pmf(pmf));
  }
  return out;
}

std::vector<std::vector<double>> perturb_feature(
    const std::vector<std::vector<double>>& embedded, double sigma, RngStream& rng) {
  if (sigma < 0.0)
    throw ConfigError("perturb_feature: sigma must be nonnegative, got " +
                      std::to_string(sigma));
  std::vector<std::vector<double>> out = embedded;
  for (auto& vec : out)
    for (double& coord : vec) coord += sigma * rng.next_gaussian();
  return out;
}

namespace {

Sentence swap_words(const Sentence& x, std::size_t n_ops, RngStream& rng) {
  Sentence out = x;
  if (x.size() < 2 || n_ops == 0) return out;
  const std::size_t slots = x.size() - 1;  // positions with a right neighbour
  const std::size_t k = std::min(n_ops, slots);
  for (std::size_t pos : rng.sample_distinct(slots, k))
    std::swap(out[pos], out[pos + 1]);
  return out;
}

Sentence replace_uniform(const Sentence& x, std::size_t n_ops, std::size_t vocab_size,
                         RngStream& rng) {
  Sentence out = x;
  if (n_ops == 0) return out;
  std::vector<std::size_t> content;
  for (std::size_t i = 0; i < x.size(); ++i)
    if (x[i] >= static_cast<std::int32_t>(Vocabulary::kReserved)) content.push_back(i);
  if (content.empty()) return out;
  const std::size_t candidates = vocab_size - Vocabulary::kReserved;
  if (candidates < 2) return out;  // no alternative word exists
  const std::size_t k = std::min(n_ops, content.size());
  for (std::size_t pick : rng.sample_distinct(content.size(), k)) {
    const std::size_t pos = content[pick];
    // uniform over content ids except the current one
    auto draw = static_cast<std::int32_t>(Vocabulary::kReserved +
                                          rng.next_below(candidates - 1));
    if (draw >= out[pos]) draw += 1;
    out[pos] = draw;
  }
  return out;
}

Sentence delete_words(const Sentence& x, std::size_t n_ops, RngStream& rng) {
  if (n_ops == 0 || x.size() <= 1) return x;
  const std::size_t k = std::min(n_ops, x.size() - 1);
  const std::vector<std::size_t> doomed = rng.sample_distinct(x.size(), k);
  Sentence out;
  std::size_t next = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (next < doomed.size() && doomed[next] == i) {
      ++next;
      continue;
    }
    out.push_back(x[i]);
  }
  return out;
}

}  // namespace

Sentence synth_perturb(const Sentence& x, const PerturbationSpec& spec,
                       std::size_t vocab_size, RngStream& rng) {
  if (x.empty()) throw NumericalError("synth_perturb: empty sentence");
  switch (spec.kind) {
    case PerturbKind::kSwap:
      return swap_words(x, spec.n_ops, rng);
    case PerturbKind::kReplaceUniform:
      return replace_uniform(x, spec.n_ops, vocab_size, rng);
    case PerturbKind::kDelete:
      return delete_words(x, spec.n_ops, rng);
    default:
      throw ConfigError(std::string("synth_perturb: kind must be synthetic, got ") +
                        perturb_kind_name(spec.kind));
  }
}

}  // namespace robustnmt
