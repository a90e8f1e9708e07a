// src/checkpoint.cpp

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

#include "checkpoint.hpp"

#include <algorithm>
#include <cstring>
#include <limits>
#include <set>
#include <utility>

#include "json.hpp"

namespace eigenmerge {

namespace {

using nlohmann::json;

constexpr char kMagic[4] = {'E', 'V', 'C', '1'};

std::uint64_t CheckedElementCount(const std::vector<std::uint64_t>& shape,
                                  const std::string& name) {
  std::uint64_t count = 1;
  for (std::uint64_t d : shape) {
    if (d != 0 && count > std::numeric_limits<std::uint64_t>::max() / 8 / (d ? d : 1)) {
      throw DataError("tensor \"" + name + "\": shape product overflows");
    }
    count *= d;
  }
  return count;
}

}  // namespace

std::size_t DtypeSize(Dtype dtype) { return dtype == Dtype::kF32 ? 4 : 8; }

const char* DtypeName(Dtype dtype) { return dtype == Dtype::kF32 ? "f32" : "f64"; }

Dtype DtypeFromName(const std::string& name) {
  if (name == "f32") return Dtype::kF32;
  if (name == "f64") return Dtype::kF64;
  throw DataError("unknown dtype \"" + name + "\"");
}

std::uint64_t Tensor::NumElements() const {
  std::uint64_t count = 1;
  for (std::uint64_t d : shape) count *= d;
  return count;
}

double Tensor::ValueAt(std::uint64_t index) const {
  if (dtype == Dtype::kF32) {
    float v;
    std::memcpy(&v, data.data() + index * 4, 4);
    return static_cast<double>(v);
  }
  double v;
  std::memcpy(&v, data.data() + index * 8, 8);
  return v;
}

void Tensor::SetValueAt(std::uint64_t index, double value) {
  if (dtype == Dtype::kF32) {
    float v = static_cast<float>(value);
    std::memcpy(data.data() + index * 4, &v, 4);
  } else {
    std::memcpy(data.data() + index * 8, &value, 8);
  }
}

std::vector<double> Tensor::ToDoubles() const {
  std::vector<double> out(NumElements());
  for (std::uint64_t i = 0; i < out.size(); ++i) out[i] = ValueAt(i);
  return out;
}

Tensor Tensor::FromValues(Dtype dtype, std::vector<std::uint64_t> shape,
                          std::span<const double> values) {
  Tensor t = Zeros(dtype, std::move(shape));
  if (values.size() != t.NumElements()) {
    throw UsageError("value count does not match tensor shape");
  }
  for (std::uint64_t i = 0; i < values.size(); ++i) t.SetValueAt(i, values[i]);
  return t;
}

Tensor Tensor::Zeros(Dtype dtype, std::vector<std::uint64_t> shape) {
  Tensor t;
  t.dtype = dtype;
  t.shape = std::move(shape);
  t.data.assign(t.ExpectedBytes(), 0);
  return t;
}

void ValidateCheckpoint(const Checkpoint& ckpt) {
  for (const auto& [name, tensor] : ckpt.tensors) {
    if (name.empty()) throw DataError("empty tensor name");
    CheckedElementCount(tensor.shape, name);
    if (tensor.data.size() != tensor.ExpectedBytes()) {
      throw DataError("tensor \"" + name + "\": data length " +
                      std::to_string(tensor.data.size()) + " does not match shape (" +
                      std::to_string(tensor.ExpectedBytes()) + " bytes expected)");
    }
  }
}

std::uint64_t TensorSpec::NumElements() const {
  std::uint64_t count = 1;
  for (std::uint64_t d : shape) count *= d;
  return count;
}

TensorIndex IndexOf(const Checkpoint& ckpt) {
  TensorIndex index;
  for (const auto& [name, tensor] : ckpt.tensors) {
    index.emplace(name, TensorSpec{tensor.dtype, tensor.shape});
  }
  return index;
}

SchemaReport DiffSchemas(const TensorIndex& a, const TensorIndex& b) {
  SchemaReport report;
  for (const auto& [name, spec] : a) {
    auto it = b.find(name);
    if (it == b.end()) {
      report.only_in_a.push_back(name);
    } else if (!(spec == it->second)) {
      report.mismatches.push_back({name, spec, it->second});
    }
  }
  for (const auto& [name, spec] : b) {
    if (!a.count(name)) report.only_in_b.push_back(name);
  }
  return report;
}

SchemaReport DiffSchemas(const Checkpoint& a, const Checkpoint& b) {
  return DiffSchemas(IndexOf(a), IndexOf(b));
}

std::string SchemaReport::ToJson() const {
  json j;
  j["only_in_a"] = only_in_a;
  j["only_in_b"] = only_in_b;
  j["mismatches"] = json::array();
  for (const auto& m : mismatches) {
    j["mismatches"].push_back({{"name", m.name},
                               {"dtype_a", DtypeName(m.a.dtype)},
                               {"shape_a", m.a.shape},
                               {"dtype_b", DtypeName(m.b.dtype)},
                               {"shape_b", m.b.shape}});
  }
  return j.dump();
}

namespace {

struct ParsedHeader {
  std::map<std::string, std::string> metadata;
  struct Entry {
    Dtype dtype;
    std::vector<std::uint64_t> shape;
    std::uint64_t offset;
    std::uint64_t nbytes;
  };
  std::map<std::string, Entry> entries;
};

std::uint64_t RequireU64(const json& j, const std::string& context) {
  if (!j.is_number_unsigned()) {
    throw DataError("malformed header: " + context + " must be a non-negative integer");
  }
  return j.get<std::uint64_t>();
}

ParsedHeader ParseHeader(const std::string& text) {
  // Duplicate keys inside one JSON object collapse silently in most parsers;
  // track them through the parse callback so a file with two tensors of the
  // same name is rejected instead of dropping one.
  std::vector<std::set<std::string>> scopes;
  std::string duplicate;
  json::parser_callback_t cb = [&](int /*depth*/, json::parse_event_t event,
                                   json& parsed) {
    if (event == json::parse_event_t::object_start) {
      scopes.emplace_back();
    } else if (event == json::parse_event_t::object_end) {
      scopes.pop_back();
    } else if (event == json::parse_event_t::key) {
      if (!scopes.back().insert(parsed.get<std::string>()).second &&
          duplicate.empty()) {
        duplicate = parsed.get<std::string>();
      }
    }
    return true;
  };

  json header;
  try {
    header = json::parse(text, cb);
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed header JSON: ") + e.what());
  }
  if (!duplicate.empty()) {
    throw DataError("duplicate key \"" + duplicate + "\" in header");
  }
  if (!header.is_object() || !header.contains("metadata") ||
      !header.contains("tensors") || !header["metadata"].is_object() ||
      !header["tensors"].is_object()) {
    throw DataError("malformed header: expected {\"metadata\": {...}, \"tensors\": {...}}");
  }

  ParsedHeader out;
  for (const auto& [key, value] : header["metadata"].items()) {
    if (!value.is_string()) {
      throw DataError("malformed header: metadata value for \"" + key +
                      "\" is not a string");
    }
    out.metadata.emplace(key, value.get<std::string>());
  }
  for (const auto& [name, spec] : header["tensors"].items()) {
    if (name.empty()) throw DataError("empty tensor name");
    if (!spec.is_object() || !spec.contains("dtype") || !spec.contains("shape") ||
        !spec.contains("offset") || !spec.contains("nbytes")) {
      throw DataError("malformed header: tensor \"" + name +
                      "\" missing dtype/shape/offset/nbytes");
    }
    if (!spec["dtype"].is_string()) {
      throw DataError("malformed header: tensor \"" + name + "\" dtype is not a string");
    }
    ParsedHeader::Entry entry;
    entry.dtype = DtypeFromName(spec["dtype"].get<std::string>());
    if (!spec["shape"].is_array()) {
      throw DataError("malformed header: tensor \"" + name + "\" shape is not an array");
    }
    for (const auto& d : spec["shape"]) {
      entry.shape.push_back(RequireU64(d, "shape of \"" + name + "\""));
    }
    entry.offset = RequireU64(spec["offset"], "offset of \"" + name + "\"");
    entry.nbytes = RequireU64(spec["nbytes"], "nbytes of \"" + name + "\"");
    std::uint64_t elements = CheckedElementCount(entry.shape, name);
    if (entry.nbytes != elements * DtypeSize(entry.dtype)) {
      throw DataError("tensor \"" + name + "\": nbytes " + std::to_string(entry.nbytes) +
                      " does not match shape");
    }
    out.entries.emplace(name, std::move(entry));
  }
  return out;
}

std::string CanonicalHeader(const Checkpoint& ckpt,
                            std::map<std::string, std::uint64_t>* offsets_out) {
  json tensors = json::object();
  std::uint64_t offset = 0;
  for (const auto& [name, tensor] : ckpt.tensors) {  // std::map: sorted
    json spec;
    spec["dtype"] = DtypeName(tensor.dtype);
    spec["shape"] = tensor.shape;
    spec["offset"] = offset;
    spec["nbytes"] = tensor.ExpectedBytes();
    tensors[name] = spec;
    if (offsets_out) (*offsets_out)[name] = offset;
    offset += tensor.ExpectedBytes();
  }
  json header;
  header["metadata"] = ckpt.metadata;
  header["tensors"] = tensors;
  return header.dump();
}

}  // namespace

CheckpointReader::CheckpointReader(const std::string& path) : path_(path) {
  in_.open(path, std::ios::binary);
  if (!in_) throw IoError("cannot open \"" + path + "\"");
  in_.seekg(0, std::ios::end);
  std::uint64_t file_size = static_cast<std::uint64_t>(in_.tellg());
  in_.seekg(0);

  char preamble[12];
  if (file_size < 12 || !in_.read(preamble, 12)) {
    throw DataError("\"" + path + "\": not an EVC1 file (too short)");
  }
  if (std::memcmp(preamble, kMagic, 4) != 0) {
    throw DataError("\"" + path + "\": bad magic, expected EVC1");
  }
  std::uint64_t header_len = LoadLeU64(preamble + 4);
  if (header_len > file_size - 12) {
    throw DataError("\"" + path + "\": truncated header");
  }
  std::string header_text(header_len, '\0');
  if (!in_.read(header_text.data(), static_cast<std::streamsize>(header_len))) {
    throw IoError("\"" + path + "\": read failed");
  }
  data_begin_ = 12 + header_len;
  std::uint64_t data_size = file_size - data_begin_;

  ParsedHeader header = ParseHeader(header_text);
  metadata_ = std::move(header.metadata);

  std::vector<std::pair<std::uint64_t, std::pair<std::uint64_t, std::string>>> spans;
  for (auto& [name, entry] : header.entries) {
    if (entry.offset > data_size || entry.nbytes > data_size - entry.offset) {
      throw DataError("\"" + path + "\": truncated data section (tensor \"" + name +
                      "\")");
    }
    if (entry.nbytes > 0) {
      spans.push_back({entry.offset, {entry.nbytes, name}});
    }
    index_.emplace(name, TensorSpec{entry.dtype, entry.shape});
    entries_.emplace(name, Entry{entry.dtype, entry.offset, entry.nbytes});
  }
  std::sort(spans.begin(), spans.end());
  for (std::size_t i = 1; i < spans.size(); ++i) {
    if (spans[i].first < spans[i - 1].first + spans[i - 1].second.first) {
      throw DataError("\"" + path + "\": overlapping data for tensors \"" +
                      spans[i - 1].second.second + "\" and \"" +
                      spans[i].second.second + "\"");
    }
  }
}

const CheckpointReader::Entry& CheckpointReader::Lookup(const std::string& name) const {
  auto it = entries_.find(name);
  if (it == entries_.end()) {
    throw DataError("\"" + path_ + "\": no tensor \"" + name + "\"");
  }
  return it->second;
}

Tensor CheckpointReader::Read(const std::string& name) {
  Tensor t;
  t.data = ReadRaw(name);  // validates the name before the index is touched
  t.dtype = index_.at(name).dtype;
  t.shape = index_.at(name).shape;
  return t;
}

std::vector<std::uint8_t> CheckpointReader::ReadRaw(const std::string& name) {
  const Entry& entry = Lookup(name);
  std::vector<std::uint8_t> bytes(entry.nbytes);
  in_.seekg(static_cast<std::streamoff>(data_begin_ + entry.offset));
  if (entry.nbytes &&
      !in_.read(reinterpret_cast<char*>(bytes.data()),
                static_cast<std::streamsize>(entry.nbytes))) {
    throw IoError("\"" + path_ + "\": read failed for tensor \"" + name + "\"");
  }
  return bytes;
}

void CheckpointReader::ReadValues(const std::string& name, std::uint64_t first,
                                  std::span<double> out) {
  const Entry& entry = Lookup(name);
  std::size_t dsize = DtypeSize(entry.dtype);
  if ((first + out.size()) * dsize > entry.nbytes) {
    throw UsageError("tensor \"" + name + "\": slice out of range");
  }
  in_.seekg(static_cast<std::streamoff>(data_begin_ + entry.offset + first * dsize));
  if (entry.dtype == Dtype::kF64) {
    if (!out.empty() &&
        !in_.read(reinterpret_cast<char*>(out.data()),
                  static_cast<std::streamsize>(out.size() * 8))) {
      throw IoError("\"" + path_ + "\": read failed for tensor \"" + name + "\"");
    }
    return;
  }
  std::vector<float> tmp(out.size());
  if (!out.empty() &&
      !in_.read(reinterpret_cast<char*>(tmp.data()),
                static_cast<std::streamsize>(tmp.size() * 4))) {
    throw IoError("\"" + path_ + "\": read failed for tensor \"" + name + "\"");
  }
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = tmp[i];
}

Checkpoint CheckpointReader::ReadAll() {
  Checkpoint ckpt;
  ckpt.metadata = metadata_;
  for (const auto& [name, spec] : index_) {
    (void)spec;
    ckpt.tensors.emplace(name, Read(name));
  }
  return ckpt;
}

Checkpoint ReadCheckpoint(const std::string& path) {
  return CheckpointReader(path).ReadAll();
}

void WriteCheckpoint(const Checkpoint& ckpt, const std::string& path) {
  ValidateCheckpoint(ckpt);  // before any bytes hit disk
  std::string header = CanonicalHeader(ckpt, nullptr);

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot create \"" + path + "\"");
  char preamble[12];
  std::memcpy(preamble, kMagic, 4);
  StoreLeU64(header.size(), preamble + 4);
  out.write(preamble, 12);
  out.write(header.data(), static_cast<std::streamsize>(header.size()));
  for (const auto& [name, tensor] : ckpt.tensors) {
    (void)name;
    out.write(reinterpret_cast<const char*>(tensor.data.data()),
              static_cast<std::streamsize>(tensor.data.size()));
  }
  out.flush();
  if (!out) throw IoError("write failed for \"" + path + "\"");
}

CheckpointWriter::CheckpointWriter(const std::string& path, const TensorIndex& plan,
                                   const std::map<std::string, std::string>& metadata)
    : path_(path), plan_(plan) {
  for (const auto& [name, spec] : plan) {
    (void)spec;
    if (name.empty()) throw DataError("empty tensor name");
    order_.push_back(name);
  }
  // Header depends only on the plan, not the data, so it can go out first.
  std::string header;
  {
    nlohmann::json tensors = nlohmann::json::object();
    std::uint64_t offset = 0;
    for (const auto& name : order_) {
      const TensorSpec& spec = plan_.at(name);
      std::uint64_t nbytes = CheckedElementCount(spec.shape, name) * DtypeSize(spec.dtype);
      nlohmann::json entry;
      entry["dtype"] = DtypeName(spec.dtype);
      entry["shape"] = spec.shape;
      entry["offset"] = offset;
      entry["nbytes"] = nbytes;
      tensors[name] = entry;
      offset += nbytes;
    }
    nlohmann::json j;
    j["metadata"] = metadata;
    j["tensors"] = tensors;
    header = j.dump();
  }

  out_.open(path, std::ios::binary | std::ios::trunc);
  if (!out_) throw IoError("cannot create \"" + path + "\"");
  char preamble[12];
  std::memcpy(preamble, kMagic, 4);
  StoreLeU64(header.size(), preamble + 4);
  out_.write(preamble, 12);
  out_.write(header.data(), static_cast<std::streamsize>(header.size()));
  if (!order_.empty()) {
    pending_bytes_ = plan_.at(order_[0]).NumElements() * DtypeSize(plan_.at(order_[0]).dtype);
  }
}

void CheckpointWriter::RequireNext(const std::string& name, std::uint64_t nbytes) {
  if (finished_) throw UsageError("checkpoint writer already finished");
  if (next_ >= order_.size() || order_[next_] != name) {
    throw UsageError("tensor \"" + name + "\" appended out of order");
  }
  if (nbytes > pending_bytes_) {
    throw UsageError("tensor \"" + name + "\": more data than planned");
  }
}

void CheckpointWriter::Append(const std::string& name, const Tensor& tensor) {
  AppendRaw(name, tensor.data);
}

void CheckpointWriter::AppendRaw(const std::string& name,
                                 std::span<const std::uint8_t> bytes) {
  RequireNext(name, bytes.size());
  if (bytes.size() != pending_bytes_) {
    throw UsageError("tensor \"" + name + "\": raw append must be whole tensor");
  }
  out_.write(reinterpret_cast<const char*>(bytes.data()),
             static_cast<std::streamsize>(bytes.size()));
  pending_bytes_ = 0;
  ++next_;
  if (next_ < order_.size()) {
    const TensorSpec& next_spec = plan_.at(order_[next_]);
    pending_bytes_ = next_spec.NumElements() * DtypeSize(next_spec.dtype);
  }
}

void CheckpointWriter::AppendValues(const std::string& name,
                                    std::span<const double> values) {
  const TensorSpec& spec = plan_.at(name);
  std::uint64_t nbytes = values.size() * DtypeSize(spec.dtype);
  RequireNext(name, nbytes);
  if (spec.dtype == Dtype::kF64) {
    out_.write(reinterpret_cast<const char*>(values.data()),
               static_cast<std::streamsize>(values.size() * 8));
  } else {
    std::vector<float> tmp(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) {
      tmp[i] = static_cast<float>(values[i]);
    }
    out_.write(reinterpret_cast<const char*>(tmp.data()),
               static_cast<std::streamsize>(tmp.size() * 4));
  }
  pending_bytes_ -= nbytes;
  if (pending_bytes_ == 0) {
    ++next_;
    if (next_ < order_.size()) {
      const TensorSpec& next_spec = plan_.at(order_[next_]);
      pending_bytes_ = next_spec.NumElements() * DtypeSize(next_spec.dtype);
    }
  }
}

void CheckpointWriter::Finish() {
  if (finished_) return;
  if (next_ != order_.size()) {
    throw UsageError("checkpoint writer finished with tensors missing");
  }
  out_.flush();
  if (!out_) throw IoError("write failed for \"" + path_ + "\"");
  finished_ = true;
}

CheckpointWriter::~CheckpointWriter() {
  // Finish() is the caller's job; the destructor must not throw.
}

}  // namespace eigenmerge
