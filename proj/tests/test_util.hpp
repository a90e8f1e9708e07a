// tests/test_util.hpp

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

#ifndef EIGENMERGE_TESTS_TEST_UTIL_HPP_
#define EIGENMERGE_TESTS_TEST_UTIL_HPP_

#include <unistd.h>

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "checkpoint.hpp"
#include "flatten.hpp"
#include "rng.hpp"

namespace emtest {

// Scratch directory removed on destruction.
struct TempDir {
  std::filesystem::path path;

  explicit TempDir(const std::string& tag) {
    static std::atomic<int> counter{0};
    path = std::filesystem::temp_directory_path() /
           (tag + "_" + std::to_string(counter.fetch_add(1)) + "_" +
            std::to_string(static_cast<unsigned>(::getpid())));
    std::filesystem::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  std::string File(const std::string& name) const { return (path / name).string(); }
};

inline std::string ReadFileBytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

inline void WriteFileBytes(const std::string& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

// Values on the grid k/1024 with |k| <= 8192: exact in both f32 and f64, so
// differences and dyadic-coefficient sums incur no rounding at all.
inline double DyadicValue(eigenmerge::SplitMix64& rng) {
  std::int64_t k = static_cast<std::int64_t>(rng.Next() % 16385) - 8192;
  return static_cast<double>(k) / 1024.0;
}

inline std::vector<double> DyadicValues(eigenmerge::SplitMix64& rng, std::size_t n) {
  std::vector<double> out(n);
  for (auto& v : out) v = DyadicValue(rng);
  return out;
}

// Checkpoint with random names, shapes, dtypes, values and metadata.
inline eigenmerge::Checkpoint RandomCheckpoint(eigenmerge::SplitMix64& rng,
                                               int max_tensors = 6) {
  using namespace eigenmerge;
  Checkpoint ckpt;
  int n_tensors = 1 + static_cast<int>(rng.Next() % max_tensors);
  for (int t = 0; t < n_tensors; ++t) {
    std::string name = "layer" + std::to_string(t) +
                       (rng.Next() % 2 ? ".weight" : ".bias");
    int tensor_rank = static_cast<int>(rng.Next() % 4);
    std::vector<std::uint64_t> shape;
    std::uint64_t count = 1;
    for (int d = 0; d < tensor_rank; ++d) {
      std::uint64_t dim = 1 + rng.Next() % 6;
      shape.push_back(dim);
      count *= dim;
    }
    Dtype dtype = rng.Next() % 2 ? Dtype::kF32 : Dtype::kF64;
    std::vector<double> values = DyadicValues(rng, count);
    ckpt.tensors[name] = Tensor::FromValues(dtype, shape, values);
  }
  if (rng.Next() % 2) ckpt.metadata["origin"] = "unit-test";
  if (rng.Next() % 2) ckpt.metadata["note"] = "quoted \"text\", commas, \n newline";
  return ckpt;
}

// Columns written as vector files, for fitting.
inline std::vector<std::string> WriteColumnFiles(
    const TempDir& dir, const std::vector<std::vector<double>>& columns,
    std::uint64_t fingerprint, const std::string& prefix = "col") {
  std::vector<std::string> paths;
  for (std::size_t i = 0; i < columns.size(); ++i) {
    eigenmerge::FlatVector v;
    v.fingerprint = fingerprint;
    v.values = columns[i];
    std::string path = dir.File(prefix + std::to_string(i) + ".evv");
    eigenmerge::WriteFlatVector(v, path);
    paths.push_back(path);
  }
  return paths;
}

}  // namespace emtest

#endif  // EIGENMERGE_TESTS_TEST_UTIL_HPP_
