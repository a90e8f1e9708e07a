// src/flatten.cpp

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

#include "flatten.hpp"

#include <cstring>

#include "json.hpp"

namespace eigenmerge {

namespace {

// Matches pattern[p..] against text[t..].  One level of '*' backtracking is
// enough because '*' matches any run.
bool MatchClass(const std::string& pattern, std::size_t* p, char c) {
  std::size_t i = *p + 1;  // past '['
  bool negate = false;
  if (i < pattern.size() && (pattern[i] == '!' || pattern[i] == '^')) {
    negate = true;
    ++i;
  }
  bool matched = false;
  bool first = true;
  for (;; ++i, first = false) {
    if (i >= pattern.size()) {
      throw UsageError("glob pattern \"" + pattern + "\": unterminated '['");
    }
    if (pattern[i] == ']' && !first) break;
    if (i + 2 < pattern.size() && pattern[i + 1] == '-' && pattern[i + 2] != ']') {
      if (pattern[i] <= c && c <= pattern[i + 2]) matched = true;
      i += 2;
    } else if (pattern[i] == c) {
      matched = true;
    }
  }
  *p = i + 1;
  return matched != negate;
}

}  // namespace

bool GlobMatch(const std::string& pattern, const std::string& text) {
  std::size_t p = 0, t = 0;
  std::size_t star_p = std::string::npos, star_t = 0;
  while (t < text.size()) {
    std::size_t saved_p = p;
    if (p < pattern.size() && pattern[p] == '*') {
      star_p = ++p;
      star_t = t;
      continue;
    }
    bool ok = false;
    if (p < pattern.size()) {
      if (pattern[p] == '?') {
        ok = true;
        ++p;
      } else if (pattern[p] == '[') {
        ok = MatchClass(pattern, &p, text[t]);
      } else if (pattern[p] == text[t]) {
        ok = true;
        ++p;
      }
    }
    if (ok) {
      ++t;
      continue;
    }
    if (star_p != std::string::npos) {
      p = star_p;
      t = ++star_t;
      continue;
    }
    // Validate the rest of the pattern anyway so a syntax error is reported
    // even when matching already failed.
    p = saved_p;
    while (p < pattern.size()) {
      if (pattern[p] == '[') {
        MatchClass(pattern, &p, '\0');
      } else {
        ++p;
      }
    }
    return false;
  }
  while (p < pattern.size() && pattern[p] == '*') ++p;
  if (p < pattern.size()) {
    std::size_t q = p;
    while (q < pattern.size()) {
      if (pattern[q] == '[') {
        MatchClass(pattern, &q, '\0');
      } else {
        ++q;
      }
    }
    return false;
  }
  return true;
}

bool ParamFilter::Matches(const std::string& name) const {
  bool included = include_patterns.empty();
  for (const auto& pat : include_patterns) {
    if (GlobMatch(pat, name)) {
      included = true;
      break;
    }
  }
  if (!included) return false;
  for (const auto& pat : exclude_patterns) {
    if (GlobMatch(pat, name)) return false;
  }
  return true;
}

std::uint64_t SchemaEntry::NumElements() const {
  std::uint64_t count = 1;
  for (std::uint64_t d : shape) count *= d;
  return count;
}

FlattenSchema FlattenSchema::Derive(const TensorIndex& index, const ParamFilter& filter) {
  FlattenSchema schema;
  std::uint64_t offset = 0;
  for (const auto& [name, spec] : index) {  // std::map: lexicographic
    if (!filter.Matches(name)) continue;
    SchemaEntry entry;
    entry.name = name;
    entry.dtype = spec.dtype;
    entry.shape = spec.shape;
    entry.offset = offset;
    offset += entry.NumElements();
    schema.entries_.push_back(std::move(entry));
  }
  if (schema.entries_.empty()) {
    throw UsageError("parameter filter selects no tensors");
  }
  schema.total_dim_ = offset;
  if (schema.total_dim_ == 0) {
    throw UsageError("parameter filter selects only empty tensors");
  }
  schema.fingerprint_ = Fnv1a64(schema.CanonicalJson());
  return schema;
}

FlattenSchema FlattenSchema::Derive(const Checkpoint& ckpt, const ParamFilter& filter) {
  return Derive(IndexOf(ckpt), filter);
}

std::string FlattenSchema::CanonicalJson() const {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& entry : entries_) {
    j.push_back({entry.name, DtypeName(entry.dtype), entry.shape, entry.offset});
  }
  return j.dump();
}

namespace {

constexpr char kEvvMagic[4] = {'E', 'V', 'V', '1'};
constexpr char kEvmMagic[4] = {'E', 'V', 'M', '1'};

}  // namespace

EvvReader::EvvReader(const std::string& path) : path_(path) {
  in_.open(path, std::ios::binary);
  if (!in_) throw IoError("cannot open \"" + path + "\"");
  in_.seekg(0, std::ios::end);
  std::uint64_t file_size = static_cast<std::uint64_t>(in_.tellg());
  in_.seekg(0);
  char header[20];
  if (file_size < 20 || !in_.read(header, 20)) {
    throw DataError("\"" + path + "\": not an EVV1 file (too short)");
  }
  if (std::memcmp(header, kEvvMagic, 4) != 0) {
    throw DataError("\"" + path + "\": bad magic, expected EVV1");
  }
  dim_ = LoadLeU64(header + 4);
  fingerprint_ = LoadLeU64(header + 12);
  if (file_size != 20 + dim_ * 8) {
    throw DataError("\"" + path + "\": file size does not match dim " +
                    std::to_string(dim_));
  }
}

void EvvReader::Read(std::uint64_t first, std::span<double> out) {
  if (first + out.size() > dim_) {
    throw UsageError("\"" + path_ + "\": slice out of range");
  }
  in_.seekg(static_cast<std::streamoff>(20 + first * 8));
  if (!out.empty() &&
      !in_.read(reinterpret_cast<char*>(out.data()),
                static_cast<std::streamsize>(out.size() * 8))) {
    throw IoError("\"" + path_ + "\": read failed");
  }
}

FlatVector ReadFlatVector(const std::string& path) {
  EvvReader reader(path);
  FlatVector vec;
  vec.fingerprint = reader.fingerprint();
  vec.values.resize(reader.dim());
  reader.Read(0, vec.values);
  return vec;
}

EvvWriter::EvvWriter(const std::string& path, std::uint64_t dim,
                     std::uint64_t fingerprint)
    : path_(path), dim_(dim) {
  out_.open(path, std::ios::binary | std::ios::trunc);
  if (!out_) throw IoError("cannot create \"" + path + "\"");
  char header[20];
  std::memcpy(header, kEvvMagic, 4);
  StoreLeU64(dim, header + 4);
  StoreLeU64(fingerprint, header + 12);
  out_.write(header, 20);
}

void EvvWriter::Append(std::span<const double> values) {
  if (finished_) throw UsageError("vector writer already finished");
  if (written_ + values.size() > dim_) {
    throw UsageError("\"" + path_ + "\": more values than declared dim");
  }
  out_.write(reinterpret_cast<const char*>(values.data()),
             static_cast<std::streamsize>(values.size() * 8));
  written_ += values.size();
}

void EvvWriter::Finish() {
  if (finished_) return;
  if (written_ != dim_) {
    throw UsageError("\"" + path_ + "\": finished with " + std::to_string(written_) +
                     " of " + std::to_string(dim_) + " values");
  }
  out_.flush();
  if (!out_) throw IoError("write failed for \"" + path_ + "\"");
  finished_ = true;
}

EvvWriter::~EvvWriter() = default;

void WriteFlatVector(const FlatVector& vec, const std::string& path) {
  EvvWriter writer(path, vec.dim(), vec.fingerprint);
  writer.Append(vec.values);
  writer.Finish();
}

EvmWriter::EvmWriter(const std::string& path, std::uint64_t rows, std::uint64_t cols)
    : path_(path), rows_(rows), cols_(cols) {
  out_.open(path, std::ios::binary | std::ios::trunc);
  if (!out_) throw IoError("cannot create \"" + path + "\"");
  char header[20];
  std::memcpy(header, kEvmMagic, 4);
  StoreLeU64(rows, header + 4);
  StoreLeU64(cols, header + 12);
  out_.write(header, 20);
  if (rows * cols > 0) {
    // Reserve the full extent up front; chunk writes then seek freely.
    out_.seekp(static_cast<std::streamoff>(20 + rows * cols * 8 - 1));
    out_.put('\0');
  }
  if (!out_) throw IoError("write failed for \"" + path + "\"");
}

void EvmWriter::WriteColumnChunk(std::uint64_t col, std::uint64_t first_row,
                                 std::span<const double> values) {
  if (finished_) throw UsageError("matrix writer already finished");
  if (col >= cols_ || first_row + values.size() > rows_) {
    throw UsageError("\"" + path_ + "\": chunk out of range");
  }
  out_.seekp(static_cast<std::streamoff>(20 + (col * rows_ + first_row) * 8));
  out_.write(reinterpret_cast<const char*>(values.data()),
             static_cast<std::streamsize>(values.size() * 8));
}

void EvmWriter::Finish() {
  if (finished_) return;
  out_.flush();
  if (!out_) throw IoError("write failed for \"" + path_ + "\"");
  finished_ = true;
}

EvmWriter::~EvmWriter() = default;

EvmReader::EvmReader(const std::string& path) : path_(path) {
  in_.open(path, std::ios::binary);
  if (!in_) throw IoError("cannot open \"" + path + "\"");
  in_.seekg(0, std::ios::end);
  std::uint64_t file_size = static_cast<std::uint64_t>(in_.tellg());
  in_.seekg(0);
  char header[20];
  if (file_size < 20 || !in_.read(header, 20)) {
    throw DataError("\"" + path + "\": not an EVM1 file (too short)");
  }
  if (std::memcmp(header, kEvmMagic, 4) != 0) {
    throw DataError("\"" + path + "\": bad magic, expected EVM1");
  }
  rows_ = LoadLeU64(header + 4);
  cols_ = LoadLeU64(header + 12);
  if (file_size != 20 + rows_ * cols_ * 8) {
    throw DataError("\"" + path + "\": file size does not match " +
                    std::to_string(rows_) + "x" + std::to_string(cols_));
  }
}

void EvmReader::ReadColumnChunk(std::uint64_t col, std::uint64_t first_row,
                                std::span<double> out) {
  if (col >= cols_ || first_row + out.size() > rows_) {
    throw UsageError("\"" + path_ + "\": chunk out of range");
  }
  in_.seekg(static_cast<std::streamoff>(20 + (col * rows_ + first_row) * 8));
  if (!out.empty() &&
      !in_.read(reinterpret_cast<char*>(out.data()),
                static_cast<std::streamsize>(out.size() * 8))) {
    throw IoError("\"" + path_ + "\": read failed");
  }
}

}  // namespace eigenmerge
