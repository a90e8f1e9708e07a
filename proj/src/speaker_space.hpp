// src/speaker_space.hpp

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

#ifndef EIGENMERGE_SPEAKER_SPACE_HPP_
#define EIGENMERGE_SPEAKER_SPACE_HPP_

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "flatten.hpp"

namespace eigenmerge {

struct FitOptions {
  double rank_tol = 1e-10;
  bool standardize = true;
  std::uint64_t chunk_size = 1ull << 20;  // scalar budget per streaming block
  double eps_std = 1e-12;
  int threads = 1;
};

// Per-dimension mean and population (1/N) standard deviation across the N
// vectors.  Dimensions whose std falls below eps_std keep std 1.0 and are
// reported in `flagged`, so standardization still centers them.
struct DimStats {
  FlatVector mean;
  FlatVector std;
  std::vector<std::uint64_t> flagged;
};

DimStats AccumulateStats(const std::vector<FlatVector>& vectors, double eps_std);

// Streaming variant over vector files; writes mean.evv/std.evv as it goes and
// returns only the flagged set.  chunk_dims is the number of dimensions kept
// resident at once.
std::vector<std::uint64_t> AccumulateStats(const std::vector<std::string>& vector_paths,
                                           const std::string& mean_path,
                                           const std::string& std_path,
                                           std::uint64_t chunk_dims, double eps_std);

FlatVector Standardize(const FlatVector& a, const FlatVector& mean,
                       const FlatVector& std);

// Fits the rank-r factorization A ~= U diag(sigma) W of the (standardized)
// speaker matrix through its N x N Gram matrix and persists it as a basis
// directory:
//   meta.json    counts, sigma, labels, fingerprints, flags, options
//   coeffs.evv   r*N f64, one r-dim coefficient block per speaker
//   mean.evv     M f64 (zeros when standardization is off)
//   std.evv      M f64 (ones when standardization is off)
//   U.evm        M x r column-major f64
// Memory stays at O(N^2 + chunk); the matrix itself is never materialized.
void FitBasis(const std::vector<std::string>& vector_paths,
              const std::vector<std::string>& labels, const FitOptions& options,
              const std::string& out_dir);

class SpeakerBasis {
 public:
  static SpeakerBasis Open(const std::string& dir);

  const std::string& dir() const { return dir_; }
  std::uint64_t dim() const { return dim_; }
  std::uint64_t rank() const { return rank_; }
  std::uint64_t num_speakers() const { return num_speakers_; }
  const std::vector<double>& sigma() const { return sigma_; }
  const std::vector<std::string>& labels() const { return labels_; }
  // Stored coefficient of base speaker i (an r-dim column of the truncated
  // V transpose).
  std::vector<double> Coeff(std::uint64_t i) const;
  std::uint64_t schema_fingerprint() const { return schema_fingerprint_; }
  std::uint64_t basis_fingerprint() const { return basis_fingerprint_; }
  bool standardized() const { return standardized_; }
  const std::vector<std::uint64_t>& flagged_dims() const { return flagged_dims_; }

  std::string mean_path() const { return dir_ + "/mean.evv"; }
  std::string std_path() const { return dir_ + "/std.evv"; }
  std::string u_path() const { return dir_ + "/U.evm"; }

  // a~ = U diag(sigma) w, still in standardized coordinates.  The block form
  // feeds chunks of at most block_dims values to the sink in ascending
  // dimension order.
  void ReconstructBlocks(
      std::span<const double> w, std::uint64_t block_dims,
      const std::function<void(std::uint64_t first_dim, std::span<const double>)>& sink)
      const;
  FlatVector Reconstruct(std::span<const double> w) const;

  // w = diag(sigma)^-1 U^T a~, the least-squares coefficient of a
  // standardized vector.
  std::vector<double> Project(const FlatVector& standardized) const;

  // count i.i.d. draws with each component ~ Normal(0, 1/N); N is the base
  // speaker count, not the rank.  Consumes one substream derived from seed,
  // draw by draw, so results are reproducible for a given (seed, count).
  std::vector<std::vector<double>> SampleCoeffs(std::uint64_t seed,
                                                std::uint64_t count) const;

 private:
  std::string dir_;
  std::uint64_t dim_ = 0;
  std::uint64_t rank_ = 0;
  std::uint64_t num_speakers_ = 0;
  std::vector<double> sigma_;
  std::vector<double> coeffs_;  // speaker-major, rank_ values each
  std::vector<std::string> labels_;
  std::uint64_t schema_fingerprint_ = 0;
  std::uint64_t basis_fingerprint_ = 0;
  bool standardized_ = true;
  std::vector<std::uint64_t> flagged_dims_;
};

}  // namespace eigenmerge

#endif  // EIGENMERGE_SPEAKER_SPACE_HPP_
