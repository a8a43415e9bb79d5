// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <fstream>
#include <string>
#include <vector>

namespace robustnmt {

// One metrics CSV line. dev_bleu is written only on rows where it was
// actually measured; other rows leave the column empty.
struct MetricsRow {
  std::size_t step = 0;
  double l_true = 0.0;
  double l_inv = 0.0;
  double l_inv_clean = 0.0;
  double l_inv_noisy = 0.0;
  double l_noisy = 0.0;
  double total = 0.0;
  double disc_acc = 0.0;
  bool has_dev_bleu = false;
  double dev_bleu = 0.0;
};

// Appends rows to a CSV with the fixed header
// step,L_true,L_inv,L_inv_clean_term,L_inv_noisy_term,L_noisy,total,disc_acc,dev_bleu
// Numbers are printed with %.17g so identical runs produce identical bytes.
class MetricsWriter {
 public:
  explicit MetricsWriter(const std::string& path);  // truncates; DataError if unwritable

  void append(const MetricsRow& row);

  const std::vector<MetricsRow>& history() const { return history_; }
  const std::string& path() const { return path_; }

 private:
  std::string path_;
  std::ofstream out_;
  std::vector<MetricsRow> history_;
};

// Learning curves (L_true, L_inv, L_noisy over steps) as a standalone SVG.
// Rewritten whole on each call; DataError if unwritable.
void write_learning_curves_svg(const std::string& path,
                               const std::vector<MetricsRow>& history);

}  // namespace robustnmt
