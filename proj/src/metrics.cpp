// SPDX-License-Identifier: Apache-2.0

#include "robustnmt/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>

#include "robustnmt/error.hpp"

namespace robustnmt {
namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

MetricsWriter::MetricsWriter(const std::string& path) : path_(path) {
  const std::filesystem::path p(path);
  std::error_code ec;
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path(), ec);
  out_.open(path, std::ios::trunc);
  if (!out_) throw DataError("metrics: cannot open " + path + " for writing");
  out_ << "step,L_true,L_inv,L_inv_clean_term,L_inv_noisy_term,L_noisy,total,disc_acc,dev_bleu\n";
  out_.flush();
}

void MetricsWriter::append(const MetricsRow& row) {
  out_ << row.step << ',' << fmt(row.l_true) << ',' << fmt(row.l_inv) << ','
       << fmt(row.l_inv_clean) << ',' << fmt(row.l_inv_noisy) << ',' << fmt(row.l_noisy)
       << ',' << fmt(row.total) << ',' << fmt(row.disc_acc) << ',';
  if (row.has_dev_bleu) out_ << fmt(row.dev_bleu);
  out_ << '\n';
  out_.flush();
  if (!out_) throw DataError("metrics: write to " + path_ + " failed");
  history_.push_back(row);
}

void write_learning_curves_svg(const std::string& path,
                               const std::vector<MetricsRow>& history) {
  constexpr double kW = 720, kH = 360;
  constexpr double kL = 56, kR = 16, kT = 20, kB = 40;  // margins
  const double plot_w = kW - kL - kR, plot_h = kH - kT - kB;

  double max_y = 1e-9;
  std::size_t max_step = 1;
  for (const MetricsRow& r : history) {
    for (double v : {r.l_true, r.l_inv, r.l_noisy})
      if (std::isfinite(v)) max_y = std::max(max_y, v);
    max_step = std::max(max_step, r.step);
  }

  auto x_of = [&](std::size_t step) {
    return kL + plot_w * static_cast<double>(step) / static_cast<double>(max_step);
  };
  auto y_of = [&](double v) { return kT + plot_h * (1.0 - v / max_y); };

  auto polyline = [&](const char* color, double MetricsRow::*field) {
    std::string pts;
    for (const MetricsRow& r : history) {
      const double v = r.*field;
      if (!std::isfinite(v)) continue;
      pts += fmt(x_of(r.step)) + "," + fmt(y_of(v)) + " ";
    }
    return "  <polyline fill=\"none\" stroke=\"" + std::string(color) +
           "\" stroke-width=\"1.5\" points=\"" + pts + "\"/>\n";
  };

  std::string svg;
  svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + fmt(kW) + "\" height=\"" +
         fmt(kH) + "\" viewBox=\"0 0 " + fmt(kW) + " " + fmt(kH) + "\">\n";
  svg += "  <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg += "  <line x1=\"" + fmt(kL) + "\" y1=\"" + fmt(kT) + "\" x2=\"" + fmt(kL) +
         "\" y2=\"" + fmt(kH - kB) + "\" stroke=\"black\"/>\n";
  svg += "  <line x1=\"" + fmt(kL) + "\" y1=\"" + fmt(kH - kB) + "\" x2=\"" + fmt(kW - kR) +
         "\" y2=\"" + fmt(kH - kB) + "\" stroke=\"black\"/>\n";
  svg += "  <text x=\"" + fmt(kL - 8) + "\" y=\"" + fmt(kT + 10) +
         "\" text-anchor=\"end\" font-size=\"11\">" + fmt(max_y) + "</text>\n";
  svg += "  <text x=\"" + fmt(kL - 8) + "\" y=\"" + fmt(kH - kB) +
         "\" text-anchor=\"end\" font-size=\"11\">0</text>\n";
  svg += "  <text x=\"" + fmt(kW - kR) + "\" y=\"" + fmt(kH - kB + 16) +
         "\" text-anchor=\"end\" font-size=\"11\">step " + std::to_string(max_step) +
         "</text>\n";
  if (!history.empty()) {
    svg += polyline("#1f77b4", &MetricsRow::l_true);
    svg += polyline("#d62728", &MetricsRow::l_inv);
    svg += polyline("#2ca02c", &MetricsRow::l_noisy);
  }
  svg += "  <text x=\"" + fmt(kL + 8) + "\" y=\"" + fmt(kT + 12) +
         "\" font-size=\"11\" fill=\"#1f77b4\">L_true</text>\n";
  svg += "  <text x=\"" + fmt(kL + 64) + "\" y=\"" + fmt(kT + 12) +
         "\" font-size=\"11\" fill=\"#d62728\">L_inv</text>\n";
  svg += "  <text x=\"" + fmt(kL + 112) + "\" y=\"" + fmt(kT + 12) +
         "\" font-size=\"11\" fill=\"#2ca02c\">L_noisy</text>\n";
  svg += "</svg>\n";

  const std::filesystem::path p(path);
  std::error_code ec;
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path(), ec);
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("metrics: cannot open " + path + " for writing");
  out << svg;
  out.flush();
  if (!out) throw DataError("metrics: write to " + path + " failed");
}

}  // namespace robustnmt
