// src/editor.hpp

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

#ifndef EIGENMERGE_EDITOR_HPP_
#define EIGENMERGE_EDITOR_HPP_

#include <optional>
#include <string>

#include "checkpoint.hpp"
#include "flatten.hpp"
#include "speaker_space.hpp"

namespace eigenmerge {

// Optional provenance fields recorded in the synthesized checkpoint.
struct SynthesisInfo {
  std::optional<std::uint64_t> seed;
  std::string coeff_label;
};

// theta_new = theta_pre + (U diag(sigma) w) * std + mean over the schema
// subset; everything else is copied from pre.  Coefficients far outside the
// sampling distribution are allowed but marked "extrapolated" in provenance.
void SynthesizeCheckpoint(const SpeakerBasis& basis, std::span<const double> w,
                          CheckpointReader& pre, const FlattenSchema& schema,
                          const std::string& out_path,
                          const SynthesisInfo& info = {});
Checkpoint SynthesizeCheckpoint(const SpeakerBasis& basis, std::span<const double> w,
                                const Checkpoint& pre, const FlattenSchema& schema,
                                const SynthesisInfo& info = {});

// (1-alpha) * theta_A + alpha * theta_B over the schema subset; tensors
// outside it come from pre.  alpha 0 and 1 copy the endpoint's bytes
// verbatim, so those outputs carry no arithmetic at all.
void InterpolateModels(CheckpointReader& a, CheckpointReader& b,
                       CheckpointReader& pre, double alpha,
                       const FlattenSchema& schema, const std::string& out_path);
Checkpoint InterpolateModels(const Checkpoint& a, const Checkpoint& b,
                             const Checkpoint& pre, double alpha,
                             const FlattenSchema& schema);

// Copy of w with component k negated.
std::vector<double> FlipAxis(std::span<const double> w, std::uint64_t k);

// File-level flip: coefficient vector files are EVV1 with the owning basis's
// fingerprint.
void FlipAxisFile(const std::string& in_path, std::uint64_t k,
                  const std::string& out_path);

}  // namespace eigenmerge

#endif  // EIGENMERGE_EDITOR_HPP_
