// src/similarity.cpp

// Copyright 2026  The eigenmerge authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#include "similarity.hpp"

#include <cmath>

namespace eigenmerge {

namespace {

// Quotes only when the value would break the row.
std::string CsvField(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

}  // namespace

double CosineSimilarity(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw UsageError("cosine similarity: dimension mismatch");
  }
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) {
    throw DataError("cosine similarity: zero vector");
  }
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

SimilarityReport MaxSimilarityReport(const std::vector<LabeledVector>& generated,
                                     const std::vector<LabeledVector>& bases) {
  if (generated.empty() || bases.empty()) {
    throw UsageError("similarity report needs at least one generated and one base vector");
  }
  SimilarityReport report;
  for (const auto& base : bases) report.base_labels.push_back(base.label);

  double sum = 0.0;
  for (const auto& gen : generated) {
    SimilarityReport::Row row;
    row.label = gen.label;
    row.sims.reserve(bases.size());
    for (const auto& base : bases) {
      row.sims.push_back(CosineSimilarity(gen.vec.values, base.vec.values));
    }
    row.argmax = 0;
    for (std::size_t i = 1; i < row.sims.size(); ++i) {
      if (row.sims[i] > row.sims[row.argmax]) row.argmax = i;
    }
    row.max_sim = row.sims[row.argmax];
    sum += row.max_sim;
    report.rows.push_back(std::move(row));
  }

  report.min_max = report.rows[0].max_sim;
  report.max_max = report.rows[0].max_sim;
  for (const auto& row : report.rows) {
    report.min_max = std::min(report.min_max, row.max_sim);
    report.max_max = std::max(report.max_max, row.max_sim);
  }
  report.mean_max = sum / static_cast<double>(report.rows.size());

  double width = report.max_max - report.min_max;
  for (const auto& row : report.rows) {
    std::size_t bin = 0;
    if (width > 0.0) {
      bin = static_cast<std::size_t>((row.max_sim - report.min_max) / width * 20.0);
      if (bin >= 20) bin = 19;  // the maximum lands in the last bin
    }
    report.histogram[bin] += 1;
  }
  return report;
}

std::string SimilarityReport::RowsCsv() const {
  std::string csv = "label";
  for (const auto& base : base_labels) csv += ",sim_" + CsvField(base);
  csv += ",max_similarity,argmax_label\n";
  for (const auto& row : rows) {
    csv += CsvField(row.label);
    for (double s : row.sims) csv += "," + FormatDouble(s);
    csv += "," + FormatDouble(row.max_sim);
    csv += "," + CsvField(base_labels[row.argmax]);
    csv += "\n";
  }
  return csv;
}

std::string SimilarityReport::SummaryCsv() const {
  std::string csv = "stat,value\n";
  csv += "count," + std::to_string(rows.size()) + "\n";
  csv += "min," + FormatDouble(min_max) + "\n";
  csv += "max," + FormatDouble(max_max) + "\n";
  csv += "mean," + FormatDouble(mean_max) + "\n";
  csv += "hist_lo," + FormatDouble(min_max) + "\n";
  csv += "hist_hi," + FormatDouble(max_max) + "\n";
  for (std::size_t b = 0; b < histogram.size(); ++b) {
    csv += "hist_" + std::string(b < 10 ? "0" : "") + std::to_string(b) + "," +
           std::to_string(histogram[b]) + "\n";
  }
  return csv;
}

std::string CoeffScatterCsv(const SpeakerBasis& basis, std::uint64_t i,
                            std::uint64_t j) {
  if (i >= basis.rank() || j >= basis.rank()) {
    throw UsageError("scatter components out of range for rank " +
                     std::to_string(basis.rank()));
  }
  std::string csv = "label,w_" + std::to_string(i) + ",w_" + std::to_string(j) +
                    ",sign_w0\n";
  for (std::uint64_t s = 0; s < basis.num_speakers(); ++s) {
    std::vector<double> w = basis.Coeff(s);
    int sign = (w[0] > 0.0) - (w[0] < 0.0);
    csv += CsvField(basis.labels()[s]) + "," + FormatDouble(w[i]) + "," +
           FormatDouble(w[j]) + "," + std::to_string(sign) + "\n";
  }
  return csv;
}

}  // namespace eigenmerge
