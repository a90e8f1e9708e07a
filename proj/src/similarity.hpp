// src/similarity.hpp

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

#ifndef EIGENMERGE_SIMILARITY_HPP_
#define EIGENMERGE_SIMILARITY_HPP_

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "flatten.hpp"
#include "speaker_space.hpp"

namespace eigenmerge {

double CosineSimilarity(std::span<const double> a, std::span<const double> b);

struct LabeledVector {
  std::string label;
  FlatVector vec;
};

// Nearest-base cosine report: one row per generated vector against every
// base, plus summary statistics of the max column with a 20-bin equal-width
// histogram over its observed range.
struct SimilarityReport {
  struct Row {
    std::string label;
    std::vector<double> sims;
    double max_sim = 0.0;
    std::size_t argmax = 0;
  };

  std::vector<std::string> base_labels;
  std::vector<Row> rows;
  double min_max = 0.0;
  double max_max = 0.0;
  double mean_max = 0.0;
  std::array<std::uint64_t, 20> histogram = {};

  std::string RowsCsv() const;
  std::string SummaryCsv() const;
};

SimilarityReport MaxSimilarityReport(const std::vector<LabeledVector>& generated,
                                     const std::vector<LabeledVector>& bases);

// Stored base coefficients projected on components (i, j), with the sign of
// the first component; one CSV row per base speaker.
std::string CoeffScatterCsv(const SpeakerBasis& basis, std::uint64_t i,
                            std::uint64_t j);

}  // namespace eigenmerge

#endif  // EIGENMERGE_SIMILARITY_HPP_
