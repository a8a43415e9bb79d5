// SPDX-License-Identifier: Apache-2.0

#include "robustnmt/bleu.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "robustnmt/error.hpp"

namespace robustnmt {
namespace {

std::map<Sentence, std::size_t> ngram_counts(const Sentence& s, std::size_t n) {
  std::map<Sentence, std::size_t> counts;
  if (s.size() < n) return counts;
  for (std::size_t i = 0; i + n <= s.size(); ++i)
    ++counts[Sentence(s.begin() + static_cast<std::ptrdiff_t>(i),
                      s.begin() + static_cast<std::ptrdiff_t>(i + n))];
  return counts;
}

}  // namespace

BleuReport corpus_bleu(const std::vector<Sentence>& hypotheses,
                       const std::vector<Sentence>& references,
                       bool add_one_smoothing) {
  if (hypotheses.empty()) throw DataError("bleu: empty hypothesis set");
  if (hypotheses.size() != references.size())
    throw DataError("bleu: hypothesis/reference count mismatch");

  BleuReport report;
  report.smoothed = add_one_smoothing;
  for (std::size_t i = 0; i < hypotheses.size(); ++i) {
    const Sentence& hyp = hypotheses[i];
    const Sentence& ref = references[i];
    report.hyp_length += hyp.size();
    report.ref_length += ref.size();
    for (std::size_t n = 1; n <= 4; ++n) {
      const auto hyp_counts = ngram_counts(hyp, n);
      const auto ref_counts = ngram_counts(ref, n);
      for (const auto& [gram, count] : hyp_counts) {
        report.totals[n - 1] += count;
        const auto it = ref_counts.find(gram);
        if (it != ref_counts.end()) report.matches[n - 1] += std::min(count, it->second);
      }
    }
  }

  double log_sum = 0.0;
  std::size_t orders_used = 0;
  bool zero_precision = false;
  for (std::size_t n = 0; n < 4; ++n) {
    const double m = static_cast<double>(report.matches[n]);
    const double t = static_cast<double>(report.totals[n]);
    if (add_one_smoothing) {
      report.precisions[n] = (m + 1.0) / (t + 1.0);
      log_sum += std::log(report.precisions[n]);
      ++orders_used;
    } else if (report.totals[n] > 0) {
      report.precisions[n] = m / t;
      if (report.matches[n] == 0) zero_precision = true;
      else log_sum += std::log(report.precisions[n]);
      ++orders_used;
    } else {
      report.precisions[n] = 0.0;  // no candidate n-grams at this order
    }
  }

  if (report.hyp_length == 0) {
    report.brevity_penalty = 0.0;
  } else {
    const double ratio =
        static_cast<double>(report.ref_length) / static_cast<double>(report.hyp_length);
    report.brevity_penalty = std::min(1.0, std::exp(1.0 - ratio));
  }

  if (zero_precision || orders_used == 0 || report.hyp_length == 0) {
    report.score = 0.0;
  } else {
    report.score =
        report.brevity_penalty * std::exp(log_sum / static_cast<double>(orders_used));
  }
  return report;
}

}  // namespace robustnmt
