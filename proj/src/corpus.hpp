// src/corpus.hpp

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

#ifndef EIGENMERGE_CORPUS_HPP_
#define EIGENMERGE_CORPUS_HPP_

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "flatten.hpp"
#include "speaker_space.hpp"

namespace eigenmerge {

// Synthetic checkpoint family with a planted two-group factor:
//   theta_i = theta_pre + s_i*g*u_g + sum_k z_ik*u_k + eps_i
// where u_g and the u_k are fixed random unit directions over the filtered
// parameters, s_i is +1 for group a and -1 for group b, z_ik ~ N(0,1) and
// eps_i ~ N(0, noise_scale^2/M) per component.  Ground truth (group labels
// and the factor direction's seed) goes into the manifest, which is what the
// recovery checks below consume.
struct CorpusSpec {
  std::uint64_t seed = 0;
  std::uint64_t n_speakers = 10;
  std::uint64_t group_a = 5;
  std::uint64_t group_b = 5;
  double factor_strength = 3.0;
  std::uint64_t latent_dims = 4;
  double noise_scale = 0.1;
  // Varying tensors; their element counts add up to M (default 100000).
  std::vector<std::pair<std::string, std::vector<std::uint64_t>>> layout;
  // Constant tensors present in every checkpoint but outside the filter.
  std::vector<std::pair<std::string, std::vector<std::uint64_t>>> frozen_layout;

  std::uint64_t TotalDim() const;
  ParamFilter Filter() const;  // includes exactly the varying tensors
};

CorpusSpec DefaultCorpusSpec();

CorpusSpec CorpusSpecFromJson(const std::string& text);
std::string CorpusSpecToJson(const CorpusSpec& spec);

struct CorpusManifest {
  std::string pre_path;
  std::vector<std::string> speaker_paths;
  std::vector<std::string> speaker_labels;
  std::vector<std::string> speaker_groups;  // "a" or "b"
  std::uint64_t planted_seed = 0;
  CorpusSpec spec;
};

// Writes pre.evc, spk_<ii>.evc and manifest.json under out_dir.  Byte-exact
// for a given spec.
CorpusManifest GenerateCorpus(const CorpusSpec& spec, const std::string& out_dir);

CorpusManifest ReadManifest(const std::string& manifest_path);

struct AxisRecoveryReport {
  std::uint64_t agreement = 0;     // matches after choosing the better global sign
  std::uint64_t n_speakers = 0;
  int global_sign = 1;
  double cosine = 0.0;  // first basis column vs planted direction, both in
                        // raw (de-standardized) coordinates
  std::string ToJson() const;
};

// Checks the fitted basis against the corpus ground truth: do the signs of
// the first coefficient component reproduce the groups, and does the first
// column recover the planted direction.
AxisRecoveryReport VerifyAxisRecovery(const std::string& manifest_path,
                                      const SpeakerBasis& basis);

}  // namespace eigenmerge

#endif  // EIGENMERGE_CORPUS_HPP_
