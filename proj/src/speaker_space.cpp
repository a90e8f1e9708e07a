// src/speaker_space.cpp

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

#include "speaker_space.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <memory>
#include <thread>

#include <Eigen/Dense>

#include "json.hpp"
#include "rng.hpp"

namespace eigenmerge {

namespace {

void RequireFiniteChunk(std::span<const double> values, const std::string& path,
                        std::uint64_t first_dim) {
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i])) {
      throw DataError("non-finite value in \"" + path + "\" at dimension " +
                      std::to_string(first_dim + i));
    }
  }
}

struct WelfordChunk {
  std::vector<double> mean;
  std::vector<double> m2;

  explicit WelfordChunk(std::size_t dims) : mean(dims, 0.0), m2(dims, 0.0) {}

  void Update(std::span<const double> row, std::uint64_t n_seen) {
    for (std::size_t d = 0; d < row.size(); ++d) {
      double delta = row[d] - mean[d];
      mean[d] += delta / static_cast<double>(n_seen);
      m2[d] += delta * (row[d] - mean[d]);
    }
  }
};

// Population std with the eps floor; appends flagged dims (global indices).
void FinishStats(const WelfordChunk& acc, std::uint64_t n, std::uint64_t first_dim,
                 double eps_std, std::vector<double>* std_out,
                 std::vector<std::uint64_t>* flagged) {
  std_out->resize(acc.mean.size());
  for (std::size_t d = 0; d < acc.mean.size(); ++d) {
    double sd = std::sqrt(acc.m2[d] / static_cast<double>(n));
    if (sd < eps_std) {
      sd = 1.0;
      flagged->push_back(first_dim + d);
    }
    (*std_out)[d] = sd;
  }
}

void ParallelFor(int threads, std::size_t count,
                 const std::function<void(std::size_t)>& body) {
  if (threads <= 1 || count <= 1) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::size_t workers = std::min<std::size_t>(threads, count);
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      for (std::size_t i = w; i < count; i += workers) body(i);
    });
  }
  for (auto& t : pool) t.join();
}

// Gram-matrix partial sums combined as a fixed binary tree over the block
// sequence, so the result does not depend on the thread count.
class TreeReducer {
 public:
  explicit TreeReducer(std::size_t size) : size_(size) {}

  void Push(std::vector<double> block) {
    levels_.push_back({0, std::move(block)});
    while (levels_.size() >= 2 &&
           levels_[levels_.size() - 1].first == levels_[levels_.size() - 2].first) {
      auto top = std::move(levels_.back());
      levels_.pop_back();
      auto& dst = levels_.back();
      for (std::size_t i = 0; i < size_; ++i) dst.second[i] += top.second[i];
      dst.first += 1;
    }
  }

  std::vector<double> Finish() {
    std::vector<double> total(size_, 0.0);
    for (auto it = levels_.rbegin(); it != levels_.rend(); ++it) {
      for (std::size_t i = 0; i < size_; ++i) total[i] += it->second[i];
    }
    levels_.clear();
    return total;
  }

 private:
  std::size_t size_;
  std::vector<std::pair<int, std::vector<double>>> levels_;
};

std::uint64_t BasisFingerprint(std::uint64_t schema_fp, std::uint64_t n,
                               std::uint64_t rank, const std::vector<double>& sigma,
                               const std::vector<std::string>& labels,
                               bool standardized) {
  nlohmann::json j = nlohmann::json::array();
  j.push_back(schema_fp);
  j.push_back(n);
  j.push_back(rank);
  nlohmann::json bits = nlohmann::json::array();
  for (double s : sigma) bits.push_back(std::bit_cast<std::uint64_t>(s));
  j.push_back(bits);
  j.push_back(labels);
  j.push_back(standardized);
  return Fnv1a64(j.dump());
}

}  // namespace

DimStats AccumulateStats(const std::vector<FlatVector>& vectors, double eps_std) {
  if (vectors.size() < 2) throw UsageError("need at least 2 vectors for statistics");
  std::uint64_t dim = vectors[0].dim();
  std::uint64_t fp = vectors[0].fingerprint;
  for (const auto& v : vectors) {
    if (v.dim() != dim) throw DataError("vectors disagree on dimension");
    if (v.fingerprint != fp) throw DataError("vectors disagree on fingerprint");
  }
  WelfordChunk acc(dim);
  for (std::size_t i = 0; i < vectors.size(); ++i) {
    RequireFiniteChunk(vectors[i].values, "vector " + std::to_string(i), 0);
    acc.Update(vectors[i].values, i + 1);
  }
  DimStats stats;
  stats.mean.fingerprint = fp;
  stats.mean.values = acc.mean;
  stats.std.fingerprint = fp;
  FinishStats(acc, vectors.size(), 0, eps_std, &stats.std.values, &stats.flagged);
  return stats;
}

std::vector<std::uint64_t> AccumulateStats(const std::vector<std::string>& vector_paths,
                                           const std::string& mean_path,
                                           const std::string& std_path,
                                           std::uint64_t chunk_dims, double eps_std) {
  if (vector_paths.size() < 2) {
    throw UsageError("need at least 2 vectors for statistics");
  }
  std::vector<std::unique_ptr<EvvReader>> readers;
  for (const auto& path : vector_paths) {
    readers.push_back(std::make_unique<EvvReader>(path));
  }
  std::uint64_t dim = readers[0]->dim();
  std::uint64_t fp = readers[0]->fingerprint();
  for (std::size_t i = 1; i < readers.size(); ++i) {
    if (readers[i]->dim() != dim) {
      throw DataError("\"" + vector_paths[i] + "\" disagrees on dimension");
    }
    if (readers[i]->fingerprint() != fp) {
      throw DataError("\"" + vector_paths[i] + "\" disagrees on fingerprint");
    }
  }
  if (chunk_dims == 0) chunk_dims = 1;

  EvvWriter mean_out(mean_path, dim, fp);
  EvvWriter std_out(std_path, dim, fp);
  std::vector<std::uint64_t> flagged;
  std::vector<double> row(std::min<std::uint64_t>(chunk_dims, dim));
  for (std::uint64_t d0 = 0; d0 < dim; d0 += chunk_dims) {
    std::uint64_t count = std::min<std::uint64_t>(chunk_dims, dim - d0);
    WelfordChunk acc(count);
    for (std::size_t i = 0; i < readers.size(); ++i) {
      std::span<double> slice(row.data(), count);
      readers[i]->Read(d0, slice);
      RequireFiniteChunk(slice, vector_paths[i], d0);
      acc.Update(slice, i + 1);
    }
    std::vector<double> sd;
    FinishStats(acc, readers.size(), d0, eps_std, &sd, &flagged);
    mean_out.Append(acc.mean);
    std_out.Append(sd);
  }
  mean_out.Finish();
  std_out.Finish();
  return flagged;
}

FlatVector Standardize(const FlatVector& a, const FlatVector& mean,
                       const FlatVector& std) {
  if (a.dim() != mean.dim() || a.dim() != std.dim()) {
    throw UsageError("standardize: dimension mismatch");
  }
  FlatVector out;
  out.fingerprint = a.fingerprint;
  out.values.resize(a.dim());
  for (std::uint64_t d = 0; d < a.dim(); ++d) {
    out.values[d] = (a.values[d] - mean.values[d]) / std.values[d];
  }
  return out;
}

void FitBasis(const std::vector<std::string>& vector_paths,
              const std::vector<std::string>& labels, const FitOptions& options,
              const std::string& out_dir) {
  const std::size_t n = vector_paths.size();
  if (n < 2) throw UsageError("need at least 2 speaker vectors to fit a basis");
  if (labels.size() != n) throw UsageError("label count does not match vector count");
  if (!(options.rank_tol > 0.0 && options.rank_tol < 1.0)) {
    throw UsageError("rank_tol must lie in (0, 1)");
  }

  std::filesystem::create_directories(out_dir);
  const std::string mean_path = out_dir + "/mean.evv";
  const std::string std_path = out_dir + "/std.evv";

  std::vector<std::unique_ptr<EvvReader>> readers;
  for (const auto& path : vector_paths) {
    readers.push_back(std::make_unique<EvvReader>(path));
  }
  const std::uint64_t dim = readers[0]->dim();
  const std::uint64_t schema_fp = readers[0]->fingerprint();
  for (std::size_t i = 1; i < n; ++i) {
    if (readers[i]->dim() != dim) {
      throw DataError("\"" + vector_paths[i] + "\" disagrees on dimension");
    }
    if (readers[i]->fingerprint() != schema_fp) {
      throw DataError("\"" + vector_paths[i] + "\" disagrees on fingerprint");
    }
  }

  const std::uint64_t rows_per_block =
      std::max<std::uint64_t>(1, options.chunk_size / n);

  std::vector<std::uint64_t> flagged;
  if (options.standardize) {
    flagged = AccumulateStats(vector_paths, mean_path, std_path, rows_per_block,
                              options.eps_std);
  } else {
    EvvWriter mean_out(mean_path, dim, schema_fp);
    EvvWriter std_out(std_path, dim, schema_fp);
    std::vector<double> zeros(std::min<std::uint64_t>(rows_per_block, dim), 0.0);
    std::vector<double> ones(zeros.size(), 1.0);
    for (std::uint64_t d0 = 0; d0 < dim; d0 += zeros.size()) {
      std::uint64_t count = std::min<std::uint64_t>(zeros.size(), dim - d0);
      mean_out.Append(std::span<const double>(zeros.data(), count));
      std_out.Append(std::span<const double>(ones.data(), count));
    }
    mean_out.Finish();
    std_out.Finish();
  }

  // Pass 1: G = A^T A over standardized columns, blocked over dimensions.
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i; j < n; ++j) pairs.push_back({i, j});
  }
  TreeReducer reducer(n * n);
  {
    EvvReader mean_in(mean_path);
    EvvReader std_in(std_path);
    std::vector<std::vector<double>> block(n);
    std::vector<double> mu, sd;
    for (std::uint64_t d0 = 0; d0 < dim; d0 += rows_per_block) {
      std::uint64_t count = std::min<std::uint64_t>(rows_per_block, dim - d0);
      mu.resize(count);
      sd.resize(count);
      mean_in.Read(d0, mu);
      std_in.Read(d0, sd);
      for (std::size_t i = 0; i < n; ++i) {
        block[i].resize(count);
        readers[i]->Read(d0, block[i]);
        RequireFiniteChunk(block[i], vector_paths[i], d0);
        for (std::uint64_t d = 0; d < count; ++d) {
          block[i][d] = (block[i][d] - mu[d]) / sd[d];
        }
      }
      std::vector<double> g(n * n, 0.0);
      ParallelFor(options.threads, pairs.size(), [&](std::size_t p) {
        auto [i, j] = pairs[p];
        double dot = 0.0;
        const double* a = block[i].data();
        const double* b = block[j].data();
        for (std::uint64_t d = 0; d < count; ++d) dot += a[d] * b[d];
        g[i * n + j] = dot;
        g[j * n + i] = dot;
      });
      reducer.Push(std::move(g));
    }
  }
  std::vector<double> gram = reducer.Finish();

  Eigen::MatrixXd G(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) G(i, j) = gram[i * n + j];
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(G);
  if (solver.info() != Eigen::Success) {
    throw NumericError("eigendecomposition of the Gram matrix failed");
  }

  // Eigen returns ascending eigenvalues; reorder descending and canonicalize
  // each eigenvector's sign (largest-magnitude component positive).
  std::vector<double> sigma_all(n);
  Eigen::MatrixXd v_all(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    std::size_t src = n - 1 - j;
    double lambda = solver.eigenvalues()(static_cast<Eigen::Index>(src));
    sigma_all[j] = std::sqrt(std::max(lambda, 0.0));
    Eigen::VectorXd v = solver.eigenvectors().col(static_cast<Eigen::Index>(src));
    Eigen::Index pivot = 0;
    v.cwiseAbs().maxCoeff(&pivot);
    if (v(pivot) < 0) v = -v;
    v_all.col(static_cast<Eigen::Index>(j)) = v;
  }

  // The Gram route computes true-zero singular values at about
  // sqrt(dim * eps) * sigma_1 instead of 0, so the user tolerance alone
  // cannot drop them; floor it at that noise scale.
  const double eps = std::numeric_limits<double>::epsilon();
  const double effective_tol =
      std::max(options.rank_tol,
               8.0 * std::sqrt(static_cast<double>(dim) * eps));
  std::uint64_t rank = 0;
  while (rank < n && sigma_all[rank] > sigma_all[0] * effective_tol) ++rank;
  if (rank == 0 || sigma_all[0] == 0.0) {
    throw NumericError("speaker matrix is numerically zero: no singular value above tolerance");
  }

  std::vector<double> sigma(sigma_all.begin(), sigma_all.begin() + rank);
  // coeffs[i] = i-th column of the truncated V^T = i-th row of V.
  std::vector<double> coeffs(n * rank);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::uint64_t j = 0; j < rank; ++j) {
      coeffs[i * rank + j] = v_all(static_cast<Eigen::Index>(i),
                                   static_cast<Eigen::Index>(j));
    }
  }

  // Pass 2: U = A V diag(sigma)^-1, blocked; accumulate U^T U and the
  // per-speaker reconstruction residuals as fit-time health checks.
  EvmWriter u_out(out_dir + "/U.evm", dim, rank);
  std::vector<double> utu(rank * rank, 0.0);
  std::vector<double> res2(n, 0.0);
  std::vector<double> norm2(n, 0.0);
  {
    EvvReader mean_in(mean_path);
    EvvReader std_in(std_path);
    std::vector<std::vector<double>> block(n);
    std::vector<std::vector<double>> ucols(rank);
    std::vector<double> mu, sd;
    for (std::uint64_t d0 = 0; d0 < dim; d0 += rows_per_block) {
      std::uint64_t count = std::min<std::uint64_t>(rows_per_block, dim - d0);
      mu.resize(count);
      sd.resize(count);
      mean_in.Read(d0, mu);
      std_in.Read(d0, sd);
      for (std::size_t i = 0; i < n; ++i) {
        block[i].resize(count);
        readers[i]->Read(d0, block[i]);
        for (std::uint64_t d = 0; d < count; ++d) {
          block[i][d] = (block[i][d] - mu[d]) / sd[d];
        }
      }
      ParallelFor(options.threads, rank, [&](std::size_t j) {
        auto& col = ucols[j];
        col.assign(count, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
          double w = v_all(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
          const double* a = block[i].data();
          for (std::uint64_t d = 0; d < count; ++d) col[d] += a[d] * w;
        }
        double inv = 1.0 / sigma[j];
        for (std::uint64_t d = 0; d < count; ++d) col[d] *= inv;
      });
      for (std::uint64_t j = 0; j < rank; ++j) {
        u_out.WriteColumnChunk(j, d0, ucols[j]);
        for (std::uint64_t k = j; k < rank; ++k) {
          double dot = 0.0;
          for (std::uint64_t d = 0; d < count; ++d) dot += ucols[j][d] * ucols[k][d];
          utu[j * rank + k] += dot;
          if (k != j) utu[k * rank + j] += dot;
        }
      }
      for (std::size_t i = 0; i < n; ++i) {
        const double* wi = &coeffs[i * rank];
        for (std::uint64_t d = 0; d < count; ++d) {
          double rec = 0.0;
          for (std::uint64_t j = 0; j < rank; ++j) rec += ucols[j][d] * sigma[j] * wi[j];
          double diff = block[i][d] - rec;
          res2[i] += diff * diff;
          norm2[i] += block[i][d] * block[i][d];
        }
      }
    }
  }
  u_out.Finish();

  for (std::uint64_t j = 0; j < rank; ++j) {
    for (std::uint64_t k = 0; k < rank; ++k) {
      double expect = (j == k) ? 1.0 : 0.0;
      if (std::abs(utu[j * rank + k] - expect) > 1e-8) {
        throw NumericError("basis is not orthonormal: |U^T U - I| exceeds 1e-8");
      }
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (norm2[i] == 0.0) continue;  // zero column reconstructs trivially
    if (std::sqrt(res2[i] / norm2[i]) > 1e-6) {
      throw NumericError("basis reconstruction residual exceeds 1e-6 for speaker " +
                         std::to_string(i));
    }
  }

  std::uint64_t basis_fp =
      BasisFingerprint(schema_fp, n, rank, sigma, labels, options.standardize);
  {
    FlatVector cf;
    cf.fingerprint = basis_fp;
    cf.values = coeffs;
    WriteFlatVector(cf, out_dir + "/coeffs.evv");
  }

  nlohmann::json meta;
  meta["format"] = "eigenmerge-basis-v1";
  meta["dim"] = dim;
  meta["n_speakers"] = n;
  meta["rank"] = rank;
  meta["sigma"] = sigma;
  meta["speaker_labels"] = labels;
  meta["schema_fingerprint"] = schema_fp;
  meta["basis_fingerprint"] = basis_fp;
  meta["standardized"] = options.standardize;
  meta["flagged_dims"] = flagged;
  meta["options"] = {{"rank_tol", options.rank_tol},
                     {"rank_tol_effective", effective_tol},
                     {"chunk_size", options.chunk_size},
                     {"eps_std", options.eps_std}};
  std::ofstream meta_out(out_dir + "/meta.json", std::ios::binary | std::ios::trunc);
  if (!meta_out) throw IoError("cannot create \"" + out_dir + "/meta.json\"");
  meta_out << meta.dump(2) << "\n";
  meta_out.flush();
  if (!meta_out) throw IoError("write failed for \"" + out_dir + "/meta.json\"");
}

SpeakerBasis SpeakerBasis::Open(const std::string& dir) {
  SpeakerBasis basis;
  basis.dir_ = dir;
  std::ifstream in(dir + "/meta.json", std::ios::binary);
  if (!in) throw IoError("cannot open \"" + dir + "/meta.json\"");
  nlohmann::json meta;
  try {
    in >> meta;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("\"" + dir + "/meta.json\": " + e.what());
  }
  try {
    if (meta.at("format").get<std::string>() != "eigenmerge-basis-v1") {
      throw DataError("\"" + dir + "\": unknown basis format");
    }
    basis.dim_ = meta.at("dim").get<std::uint64_t>();
    basis.num_speakers_ = meta.at("n_speakers").get<std::uint64_t>();
    basis.rank_ = meta.at("rank").get<std::uint64_t>();
    basis.sigma_ = meta.at("sigma").get<std::vector<double>>();
    basis.labels_ = meta.at("speaker_labels").get<std::vector<std::string>>();
    basis.schema_fingerprint_ = meta.at("schema_fingerprint").get<std::uint64_t>();
    basis.basis_fingerprint_ = meta.at("basis_fingerprint").get<std::uint64_t>();
    basis.standardized_ = meta.at("standardized").get<bool>();
    basis.flagged_dims_ = meta.at("flagged_dims").get<std::vector<std::uint64_t>>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError("\"" + dir + "/meta.json\": " + e.what());
  }
  if (basis.rank_ == 0 || basis.rank_ > basis.num_speakers_ ||
      basis.sigma_.size() != basis.rank_ ||
      basis.labels_.size() != basis.num_speakers_) {
    throw DataError("\"" + dir + "/meta.json\": inconsistent basis description");
  }
  for (std::size_t j = 1; j < basis.sigma_.size(); ++j) {
    if (!(basis.sigma_[j] <= basis.sigma_[j - 1])) {
      throw DataError("\"" + dir + "/meta.json\": sigma not in descending order");
    }
  }

  FlatVector cf = ReadFlatVector(dir + "/coeffs.evv");
  if (cf.fingerprint != basis.basis_fingerprint_) {
    throw DataError("\"" + dir + "/coeffs.evv\" does not belong to this basis");
  }
  if (cf.dim() != basis.rank_ * basis.num_speakers_) {
    throw DataError("\"" + dir + "/coeffs.evv\" has the wrong dimension");
  }
  basis.coeffs_ = std::move(cf.values);

  EvmReader u(basis.u_path());
  if (u.rows() != basis.dim_ || u.cols() != basis.rank_) {
    throw DataError("\"" + basis.u_path() + "\" does not match the basis shape");
  }
  EvvReader mean(basis.mean_path());
  EvvReader sd(basis.std_path());
  if (mean.dim() != basis.dim_ || sd.dim() != basis.dim_) {
    throw DataError("basis mean/std files do not match the basis dimension");
  }
  return basis;
}

std::vector<double> SpeakerBasis::Coeff(std::uint64_t i) const {
  if (i >= num_speakers_) throw UsageError("speaker index out of range");
  return std::vector<double>(coeffs_.begin() + static_cast<std::ptrdiff_t>(i * rank_),
                             coeffs_.begin() +
                                 static_cast<std::ptrdiff_t>((i + 1) * rank_));
}

void SpeakerBasis::ReconstructBlocks(
    std::span<const double> w, std::uint64_t block_dims,
    const std::function<void(std::uint64_t, std::span<const double>)>& sink) const {
  if (w.size() != rank_) {
    throw UsageError("coefficient dimension " + std::to_string(w.size()) +
                     " does not match basis rank " + std::to_string(rank_));
  }
  if (block_dims == 0) block_dims = 1;
  EvmReader u(u_path());
  std::vector<double> acc(std::min<std::uint64_t>(block_dims, dim_));
  std::vector<double> col(acc.size());
  for (std::uint64_t d0 = 0; d0 < dim_; d0 += block_dims) {
    std::uint64_t count = std::min<std::uint64_t>(block_dims, dim_ - d0);
    std::fill(acc.begin(), acc.begin() + static_cast<std::ptrdiff_t>(count), 0.0);
    for (std::uint64_t j = 0; j < rank_; ++j) {
      std::span<double> slice(col.data(), count);
      u.ReadColumnChunk(j, d0, slice);
      double scale = sigma_[j] * w[j];
      for (std::uint64_t d = 0; d < count; ++d) acc[d] += slice[d] * scale;
    }
    sink(d0, std::span<const double>(acc.data(), count));
  }
}

FlatVector SpeakerBasis::Reconstruct(std::span<const double> w) const {
  FlatVector out;
  out.fingerprint = schema_fingerprint_;
  out.values.resize(dim_);
  ReconstructBlocks(w, 1ull << 20, [&](std::uint64_t d0, std::span<const double> vals) {
    std::copy(vals.begin(), vals.end(), out.values.begin() + static_cast<std::ptrdiff_t>(d0));
  });
  return out;
}

std::vector<double> SpeakerBasis::Project(const FlatVector& standardized) const {
  if (standardized.fingerprint != 0 &&
      standardized.fingerprint != schema_fingerprint_) {
    throw DataError("vector fingerprint does not match the basis schema");
  }
  if (standardized.dim() != dim_) {
    throw UsageError("vector dimension does not match the basis");
  }
  EvmReader u(u_path());
  std::vector<double> w(rank_, 0.0);
  const std::uint64_t block_dims = 1ull << 20;
  std::vector<double> col(std::min<std::uint64_t>(block_dims, dim_));
  for (std::uint64_t d0 = 0; d0 < dim_; d0 += block_dims) {
    std::uint64_t count = std::min<std::uint64_t>(block_dims, dim_ - d0);
    for (std::uint64_t j = 0; j < rank_; ++j) {
      std::span<double> slice(col.data(), count);
      u.ReadColumnChunk(j, d0, slice);
      double dot = 0.0;
      for (std::uint64_t d = 0; d < count; ++d) {
        dot += slice[d] * standardized.values[d0 + d];
      }
      w[j] += dot;
    }
  }
  for (std::uint64_t j = 0; j < rank_; ++j) w[j] /= sigma_[j];
  return w;
}

std::vector<std::vector<double>> SpeakerBasis::SampleCoeffs(std::uint64_t seed,
                                                            std::uint64_t count) const {
  if (count < 1) throw UsageError("sample count must be at least 1");
  GaussianStream stream(DeriveSeed(seed, "coeff"));
  double scale = 1.0 / std::sqrt(static_cast<double>(num_speakers_));
  std::vector<std::vector<double>> draws(count);
  for (auto& w : draws) {
    w.resize(rank_);
    for (std::uint64_t j = 0; j < rank_; ++j) w[j] = stream.Next() * scale;
  }
  return draws;
}

}  // namespace eigenmerge
