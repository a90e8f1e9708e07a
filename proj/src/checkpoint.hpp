// src/checkpoint.hpp

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

#ifndef EIGENMERGE_CHECKPOINT_HPP_
#define EIGENMERGE_CHECKPOINT_HPP_

#include <cstdint>
#include <fstream>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "common.hpp"

namespace eigenmerge {

// Checkpoint container "EVC1", little-endian:
//   bytes 0-3   magic "EVC1"
//   bytes 4-11  u64 header length H
//   bytes 12..  UTF-8 JSON header:
//               { "metadata": {string: string},
//                 "tensors": { name: { "dtype": "f32"|"f64",
//                                      "shape": [u64...],
//                                      "offset": u64, "nbytes": u64 } } }
//   data section follows; offsets are relative to its start.
// Canonical form: tensor names sorted lexicographically, data placed in that
// order contiguously from offset 0, no padding, compact JSON with sorted keys.

enum class Dtype { kF32, kF64 };

std::size_t DtypeSize(Dtype dtype);
const char* DtypeName(Dtype dtype);
Dtype DtypeFromName(const std::string& name);  // throws DataError

struct Tensor {
  Dtype dtype = Dtype::kF64;
  std::vector<std::uint64_t> shape;
  std::vector<std::uint8_t> data;  // raw little-endian values, row-major

  std::uint64_t NumElements() const;
  std::uint64_t ExpectedBytes() const { return NumElements() * DtypeSize(dtype); }

  double ValueAt(std::uint64_t index) const;
  void SetValueAt(std::uint64_t index, double value);  // rounds to dtype
  std::vector<double> ToDoubles() const;

  static Tensor FromValues(Dtype dtype, std::vector<std::uint64_t> shape,
                           std::span<const double> values);
  static Tensor Zeros(Dtype dtype, std::vector<std::uint64_t> shape);

  bool operator==(const Tensor&) const = default;
};

struct Checkpoint {
  std::map<std::string, Tensor> tensors;
  std::map<std::string, std::string> metadata;

  bool operator==(const Checkpoint&) const = default;
};

// Throws DataError on empty names or data-length mismatches.
void ValidateCheckpoint(const Checkpoint& ckpt);

// Shape/dtype of one tensor, without its data.
struct TensorSpec {
  Dtype dtype = Dtype::kF64;
  std::vector<std::uint64_t> shape;

  std::uint64_t NumElements() const;

  bool operator==(const TensorSpec&) const = default;
};

using TensorIndex = std::map<std::string, TensorSpec>;

TensorIndex IndexOf(const Checkpoint& ckpt);

// Report-only comparison of two checkpoints' tensor layouts.
struct SchemaReport {
  struct Mismatch {
    std::string name;
    TensorSpec a;
    TensorSpec b;
  };
  std::vector<std::string> only_in_a;
  std::vector<std::string> only_in_b;
  std::vector<Mismatch> mismatches;

  bool Empty() const {
    return only_in_a.empty() && only_in_b.empty() && mismatches.empty();
  }
  std::string ToJson() const;
};

SchemaReport DiffSchemas(const TensorIndex& a, const TensorIndex& b);
SchemaReport DiffSchemas(const Checkpoint& a, const Checkpoint& b);

// Whole-value IO.
Checkpoint ReadCheckpoint(const std::string& path);
void WriteCheckpoint(const Checkpoint& ckpt, const std::string& path);

// Header-first reader with per-tensor access, for pipelines that must not
// hold a whole checkpoint in memory.
class CheckpointReader {
 public:
  explicit CheckpointReader(const std::string& path);

  const std::string& path() const { return path_; }
  const std::map<std::string, std::string>& metadata() const { return metadata_; }
  const TensorIndex& Index() const { return index_; }
  bool Has(const std::string& name) const { return entries_.count(name) != 0; }

  Tensor Read(const std::string& name);
  std::vector<std::uint8_t> ReadRaw(const std::string& name);
  // Reads `count` elements starting at element `first` as doubles.
  void ReadValues(const std::string& name, std::uint64_t first,
                  std::span<double> out);
  Checkpoint ReadAll();

 private:
  struct Entry {
    Dtype dtype;
    std::uint64_t offset = 0;
    std::uint64_t nbytes = 0;
  };

  const Entry& Lookup(const std::string& name) const;

  std::string path_;
  std::ifstream in_;
  std::uint64_t data_begin_ = 0;
  std::map<std::string, Entry> entries_;
  TensorIndex index_;
  std::map<std::string, std::string> metadata_;
};

// Canonical streaming writer.  The full tensor plan is fixed up front so the
// header can be written first; tensors are then appended in lexicographic
// name order.
class CheckpointWriter {
 public:
  CheckpointWriter(const std::string& path, const TensorIndex& plan,
                   const std::map<std::string, std::string>& metadata);

  void Append(const std::string& name, const Tensor& tensor);
  void AppendRaw(const std::string& name, std::span<const std::uint8_t> bytes);
  // Per-tensor incremental append; slices must arrive in order and add up to
  // the planned element count before the next tensor starts.
  void AppendValues(const std::string& name, std::span<const double> values);
  void Finish();

  ~CheckpointWriter();

 private:
  void RequireNext(const std::string& name, std::uint64_t nbytes);

  std::string path_;
  std::ofstream out_;
  TensorIndex plan_;
  std::vector<std::string> order_;
  std::size_t next_ = 0;
  std::uint64_t pending_bytes_ = 0;  // bytes still owed for order_[next_]
  bool finished_ = false;
};

}  // namespace eigenmerge

#endif  // EIGENMERGE_CHECKPOINT_HPP_
