// src/flatten.hpp

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

#ifndef EIGENMERGE_FLATTEN_HPP_
#define EIGENMERGE_FLATTEN_HPP_

#include <cstdint>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include "checkpoint.hpp"
#include "common.hpp"

namespace eigenmerge {

// Shell-style name matching: '*' any run, '?' one char, '[...]' a class with
// ranges and '!'/'^' negation.  Throws UsageError on an unterminated class.
bool GlobMatch(const std::string& pattern, const std::string& text);

// Selects the trainable subset of a checkpoint by tensor name.  An empty
// include list selects everything; excludes are applied afterwards.
struct ParamFilter {
  std::vector<std::string> include_patterns;
  std::vector<std::string> exclude_patterns;

  bool Matches(const std::string& name) const;
};

struct SchemaEntry {
  std::string name;
  Dtype dtype = Dtype::kF64;
  std::vector<std::uint64_t> shape;
  std::uint64_t offset = 0;

  std::uint64_t NumElements() const;

  bool operator==(const SchemaEntry&) const = default;
};

// Fixed mapping from a filtered tensor set to flat indices: entries sorted by
// name, elements row-major, offsets contiguous from 0.  The fingerprint keys
// every downstream artifact so vectors from different filters cannot mix.
class FlattenSchema {
 public:
  static FlattenSchema Derive(const TensorIndex& index, const ParamFilter& filter);
  static FlattenSchema Derive(const Checkpoint& ckpt, const ParamFilter& filter);

  const std::vector<SchemaEntry>& entries() const { return entries_; }
  std::uint64_t total_dim() const { return total_dim_; }
  std::uint64_t fingerprint() const { return fingerprint_; }
  std::string CanonicalJson() const;

  bool operator==(const FlattenSchema&) const = default;

 private:
  std::vector<SchemaEntry> entries_;
  std::uint64_t total_dim_ = 0;
  std::uint64_t fingerprint_ = 0;
};

// Dense f64 vector tied to the schema that produced it.  fingerprint 0 means
// "no schema": externally supplied vectors (e.g. embeddings) use it, and
// consumers skip the compatibility check for them.
struct FlatVector {
  std::uint64_t fingerprint = 0;
  std::vector<double> values;

  std::uint64_t dim() const { return values.size(); }

  bool operator==(const FlatVector&) const = default;
};

// Vector file "EVV1", little-endian:
//   magic "EVV1" | u64 dim | u64 fingerprint | dim f64 values.
FlatVector ReadFlatVector(const std::string& path);
void WriteFlatVector(const FlatVector& vec, const std::string& path);

class EvvReader {
 public:
  explicit EvvReader(const std::string& path);

  std::uint64_t dim() const { return dim_; }
  std::uint64_t fingerprint() const { return fingerprint_; }

  void Read(std::uint64_t first, std::span<double> out);

 private:
  std::string path_;
  std::ifstream in_;
  std::uint64_t dim_ = 0;
  std::uint64_t fingerprint_ = 0;
};

class EvvWriter {
 public:
  EvvWriter(const std::string& path, std::uint64_t dim, std::uint64_t fingerprint);

  void Append(std::span<const double> values);
  void Finish();

  ~EvvWriter();

 private:
  std::string path_;
  std::ofstream out_;
  std::uint64_t dim_ = 0;
  std::uint64_t written_ = 0;
  bool finished_ = false;
};

// Matrix file "EVM1", little-endian:
//   magic "EVM1" | u64 rows | u64 cols | rows*cols f64 values column-major.
// Row-blocked access so an M x r factor never has to be resident at once.
class EvmWriter {
 public:
  EvmWriter(const std::string& path, std::uint64_t rows, std::uint64_t cols);

  // Writes values into rows [first_row, first_row + values.size()) of col.
  void WriteColumnChunk(std::uint64_t col, std::uint64_t first_row,
                        std::span<const double> values);
  void Finish();

  ~EvmWriter();

 private:
  std::string path_;
  std::ofstream out_;
  std::uint64_t rows_ = 0;
  std::uint64_t cols_ = 0;
  bool finished_ = false;
};

class EvmReader {
 public:
  explicit EvmReader(const std::string& path);

  std::uint64_t rows() const { return rows_; }
  std::uint64_t cols() const { return cols_; }

  void ReadColumnChunk(std::uint64_t col, std::uint64_t first_row,
                       std::span<double> out);

 private:
  std::string path_;
  std::ifstream in_;
  std::uint64_t rows_ = 0;
  std::uint64_t cols_ = 0;
};

}  // namespace eigenmerge

#endif  // EIGENMERGE_FLATTEN_HPP_
