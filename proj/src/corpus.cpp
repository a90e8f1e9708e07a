// src/corpus.cpp

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

#include "corpus.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include "checkpoint.hpp"
#include "json.hpp"
#include "rng.hpp"

namespace eigenmerge {

namespace {

namespace fs = std::filesystem;

std::uint64_t ElementCount(const std::vector<std::uint64_t>& shape) {
  std::uint64_t count = 1;
  for (std::uint64_t d : shape) count *= d;
  return count;
}

void ValidateSpec(const CorpusSpec& spec) {
  if (spec.n_speakers < 2) throw UsageError("corpus needs at least 2 speakers");
  if (spec.group_a + spec.group_b != spec.n_speakers) {
    throw UsageError("group split does not add up to the speaker count");
  }
  if (spec.latent_dims >= spec.n_speakers) {
    throw UsageError("latent_dims must be smaller than the speaker count");
  }
  if (!(spec.factor_strength >= 0.0) || !(spec.noise_scale >= 0.0)) {
    throw UsageError("factor_strength and noise_scale must be non-negative");
  }
  if (spec.layout.empty()) throw UsageError("corpus layout is empty");
  std::set<std::string> names;
  for (const auto& group : {spec.layout, spec.frozen_layout}) {
    for (const auto& [name, shape] : group) {
      if (name.empty()) throw UsageError("corpus layout has an empty tensor name");
      if (!names.insert(name).second) {
        throw UsageError("corpus layout repeats tensor \"" + name + "\"");
      }
      (void)shape;
    }
  }
  if (spec.TotalDim() == 0) throw UsageError("corpus layout has no parameters");
}

// A fixed random unit direction over the schema order.
std::vector<double> UnitDirection(std::uint64_t seed, std::uint64_t dim) {
  GaussianStream stream(seed);
  std::vector<double> v(dim);
  double norm2 = 0.0;
  for (auto& x : v) {
    x = stream.Next();
    norm2 += x * x;
  }
  double inv = 1.0 / std::sqrt(norm2);
  for (auto& x : v) x *= inv;
  return v;
}

nlohmann::json LayoutToJson(
    const std::vector<std::pair<std::string, std::vector<std::uint64_t>>>& layout) {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& [name, shape] : layout) j.push_back({name, shape});
  return j;
}

std::vector<std::pair<std::string, std::vector<std::uint64_t>>> LayoutFromJson(
    const nlohmann::json& j, const std::string& key) {
  if (!j.is_array()) throw DataError("corpus spec: \"" + key + "\" must be an array");
  std::vector<std::pair<std::string, std::vector<std::uint64_t>>> layout;
  for (const auto& item : j) {
    if (!item.is_array() || item.size() != 2 || !item[0].is_string() ||
        !item[1].is_array()) {
      throw DataError("corpus spec: \"" + key + "\" entries must be [name, shape]");
    }
    layout.push_back({item[0].get<std::string>(),
                      item[1].get<std::vector<std::uint64_t>>()});
  }
  return layout;
}

std::string SpeakerLabel(std::uint64_t i) {
  std::string num = std::to_string(i);
  if (num.size() < 2) num.insert(0, "0");
  return "spk_" + num;
}

}  // namespace

std::uint64_t CorpusSpec::TotalDim() const {
  std::uint64_t total = 0;
  for (const auto& [name, shape] : layout) {
    (void)name;
    total += ElementCount(shape);
  }
  return total;
}

ParamFilter CorpusSpec::Filter() const {
  ParamFilter filter;
  for (const auto& [name, shape] : layout) {
    (void)shape;
    filter.include_patterns.push_back(name);
  }
  return filter;
}

CorpusSpec DefaultCorpusSpec() {
  CorpusSpec spec;
  // 100000 varying parameters split across decoder and variance-adaptor
  // style tensors, plus a frozen block the filter must skip.
  spec.layout = {
      {"dec.attn.w", {128, 256}}, {"dec.attn.b", {256}}, {"dec.ff.w", {256, 96}},
      {"dec.ff.b", {96}},         {"dec.out.w", {96, 80}}, {"dec.out.b", {80}},
      {"va.dur.w", {128, 192}},   {"va.dur.b", {192}},   {"va.pitch.w", {96, 100}},
      {"va.pitch.b", {176}},
  };
  spec.frozen_layout = {{"enc.embed", {32, 32}}};
  return spec;
}

std::string CorpusSpecToJson(const CorpusSpec& spec) {
  nlohmann::json j;
  j["seed"] = spec.seed;
  j["n_speakers"] = spec.n_speakers;
  j["group_a"] = spec.group_a;
  j["group_b"] = spec.group_b;
  j["factor_strength"] = spec.factor_strength;
  j["latent_dims"] = spec.latent_dims;
  j["noise_scale"] = spec.noise_scale;
  j["layout"] = LayoutToJson(spec.layout);
  j["frozen_layout"] = LayoutToJson(spec.frozen_layout);
  return j.dump();
}

CorpusSpec CorpusSpecFromJson(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("corpus spec: ") + e.what());
  }
  CorpusSpec spec = DefaultCorpusSpec();
  try {
    if (j.contains("seed")) spec.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("n_speakers")) spec.n_speakers = j["n_speakers"].get<std::uint64_t>();
    if (j.contains("group_a")) spec.group_a = j["group_a"].get<std::uint64_t>();
    if (j.contains("group_b")) spec.group_b = j["group_b"].get<std::uint64_t>();
    if (j.contains("factor_strength")) {
      spec.factor_strength = j["factor_strength"].get<double>();
    }
    if (j.contains("latent_dims")) spec.latent_dims = j["latent_dims"].get<std::uint64_t>();
    if (j.contains("noise_scale")) spec.noise_scale = j["noise_scale"].get<double>();
    if (j.contains("layout")) spec.layout = LayoutFromJson(j["layout"], "layout");
    if (j.contains("frozen_layout")) {
      spec.frozen_layout = LayoutFromJson(j["frozen_layout"], "frozen_layout");
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("corpus spec: ") + e.what());
  }
  ValidateSpec(spec);
  return spec;
}

CorpusManifest GenerateCorpus(const CorpusSpec& spec, const std::string& out_dir) {
  ValidateSpec(spec);
  fs::create_directories(out_dir);

  TensorIndex plan;
  for (const auto& group : {spec.layout, spec.frozen_layout}) {
    for (const auto& [name, shape] : group) {
      plan.emplace(name, TensorSpec{Dtype::kF64, shape});
    }
  }
  FlattenSchema schema = FlattenSchema::Derive(plan, spec.Filter());
  const std::uint64_t m = schema.total_dim();

  // Base model: every tensor, frozen ones included, drawn in plan order.
  std::map<std::string, std::vector<double>> pre_values;
  {
    GaussianStream stream(DeriveSeed(spec.seed, "pre"));
    for (const auto& [name, tspec] : plan) {
      auto& values = pre_values[name];
      values.resize(tspec.NumElements());
      for (auto& x : values) x = stream.Next() * 0.02;
    }
  }
  std::map<std::string, std::string> corpus_meta = {
      {"eigenmerge.corpus_seed", std::to_string(spec.seed)}};
  {
    CheckpointWriter writer(out_dir + "/pre.evc", plan, corpus_meta);
    for (const auto& [name, values] : pre_values) writer.AppendValues(name, values);
    writer.Finish();
  }

  const std::uint64_t planted_seed = DeriveSeed(spec.seed, "factor");
  std::vector<double> u_g = UnitDirection(planted_seed, m);
  std::vector<std::vector<double>> u_k(spec.latent_dims);
  for (std::uint64_t k = 0; k < spec.latent_dims; ++k) {
    u_k[k] = UnitDirection(DeriveSeed(spec.seed, "latent." + std::to_string(k)), m);
  }

  GaussianStream z_stream(DeriveSeed(spec.seed, "z"));
  const double eps_scale = spec.noise_scale / std::sqrt(static_cast<double>(m));

  CorpusManifest manifest;
  manifest.spec = spec;
  manifest.planted_seed = planted_seed;
  manifest.pre_path = out_dir + "/pre.evc";

  std::vector<double> tau(m);
  for (std::uint64_t i = 0; i < spec.n_speakers; ++i) {
    double s = (i < spec.group_a) ? 1.0 : -1.0;
    double sg = s * spec.factor_strength;
    for (std::uint64_t d = 0; d < m; ++d) tau[d] = sg * u_g[d];
    for (std::uint64_t k = 0; k < spec.latent_dims; ++k) {
      double z = z_stream.Next();
      for (std::uint64_t d = 0; d < m; ++d) tau[d] += z * u_k[k][d];
    }
    if (spec.noise_scale > 0.0) {
      GaussianStream noise(DeriveSeed(spec.seed, "noise." + std::to_string(i)));
      for (std::uint64_t d = 0; d < m; ++d) tau[d] += noise.Next() * eps_scale;
    }

    std::string label = SpeakerLabel(i);
    std::string path = out_dir + "/" + label + ".evc";
    CheckpointWriter writer(path, plan, corpus_meta);
    std::vector<double> values;
    std::size_t entry_idx = 0;
    for (const auto& [name, tspec] : plan) {
      (void)tspec;
      const auto& base = pre_values.at(name);
      if (entry_idx < schema.entries().size() &&
          schema.entries()[entry_idx].name == name) {
        const SchemaEntry& entry = schema.entries()[entry_idx];
        values.resize(base.size());
        for (std::uint64_t d = 0; d < base.size(); ++d) {
          values[d] = base[d] + tau[entry.offset + d];
        }
        writer.AppendValues(name, values);
        ++entry_idx;
      } else {
        writer.AppendValues(name, base);
      }
    }
    writer.Finish();

    manifest.speaker_paths.push_back(path);
    manifest.speaker_labels.push_back(label);
    manifest.speaker_groups.push_back(i < spec.group_a ? "a" : "b");
  }

  nlohmann::json j;
  j["pre"] = "pre.evc";
  j["planted_seed"] = planted_seed;
  j["spec"] = nlohmann::json::parse(CorpusSpecToJson(spec));
  j["speakers"] = nlohmann::json::array();
  for (std::uint64_t i = 0; i < spec.n_speakers; ++i) {
    j["speakers"].push_back({{"path", manifest.speaker_labels[i] + ".evc"},
                             {"label", manifest.speaker_labels[i]},
                             {"group", manifest.speaker_groups[i]}});
  }
  std::ofstream out(out_dir + "/manifest.json", std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot create \"" + out_dir + "/manifest.json\"");
  out << j.dump(2) << "\n";
  out.flush();
  if (!out) throw IoError("write failed for \"" + out_dir + "/manifest.json\"");
  return manifest;
}

CorpusManifest ReadManifest(const std::string& manifest_path) {
  std::ifstream in(manifest_path, std::ios::binary);
  if (!in) throw IoError("cannot open \"" + manifest_path + "\"");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("\"" + manifest_path + "\": " + e.what());
  }
  CorpusManifest manifest;
  std::string dir = fs::path(manifest_path).parent_path().string();
  if (dir.empty()) dir = ".";
  try {
    manifest.pre_path = dir + "/" + j.at("pre").get<std::string>();
    manifest.planted_seed = j.at("planted_seed").get<std::uint64_t>();
    manifest.spec = CorpusSpecFromJson(j.at("spec").dump());
    for (const auto& spk : j.at("speakers")) {
      manifest.speaker_paths.push_back(dir + "/" + spk.at("path").get<std::string>());
      manifest.speaker_labels.push_back(spk.at("label").get<std::string>());
      manifest.speaker_groups.push_back(spk.at("group").get<std::string>());
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError("\"" + manifest_path + "\": " + e.what());
  }
  if (manifest.speaker_paths.size() != manifest.spec.n_speakers) {
    throw DataError("\"" + manifest_path + "\": speaker list does not match the spec");
  }
  return manifest;
}

std::string AxisRecoveryReport::ToJson() const {
  nlohmann::json j;
  j["agreement"] = agreement;
  j["n_speakers"] = n_speakers;
  j["global_sign"] = global_sign;
  j["cosine"] = cosine;
  return j.dump();
}

AxisRecoveryReport VerifyAxisRecovery(const std::string& manifest_path,
                                      const SpeakerBasis& basis) {
  CorpusManifest manifest = ReadManifest(manifest_path);

  // The basis must come from this corpus: same filtered schema.
  CheckpointReader pre(manifest.pre_path);
  FlattenSchema schema = FlattenSchema::Derive(pre.Index(), manifest.spec.Filter());
  if (schema.fingerprint() != basis.schema_fingerprint()) {
    throw DataError("basis was not fitted from this corpus (schema fingerprint mismatch)");
  }
  if (basis.num_speakers() != manifest.spec.n_speakers) {
    throw DataError("basis speaker count does not match the corpus");
  }

  AxisRecoveryReport report;
  report.n_speakers = basis.num_speakers();

  std::uint64_t plus = 0, minus = 0;
  for (std::uint64_t i = 0; i < basis.num_speakers(); ++i) {
    std::vector<double> w = basis.Coeff(i);
    int sign = (w[0] > 0.0) - (w[0] < 0.0);
    int group = (manifest.speaker_groups[i] == "a") ? 1 : -1;
    if (sign == group) ++plus;
    if (sign == -group) ++minus;
  }
  report.global_sign = (minus > plus) ? -1 : 1;
  report.agreement = std::max(plus, minus);

  // Bring the first column back to raw coordinates before comparing with the
  // planted direction.
  std::vector<double> u_g = UnitDirection(manifest.planted_seed, basis.dim());
  EvmReader u(basis.u_path());
  EvvReader sd(basis.std_path());
  const std::uint64_t block = 1ull << 20;
  std::vector<double> ucol(std::min<std::uint64_t>(block, basis.dim()));
  std::vector<double> scol(ucol.size());
  double dot = 0.0, norm2 = 0.0;
  for (std::uint64_t d0 = 0; d0 < basis.dim(); d0 += block) {
    std::uint64_t count = std::min<std::uint64_t>(block, basis.dim() - d0);
    std::span<double> uslice(ucol.data(), count);
    std::span<double> sslice(scol.data(), count);
    u.ReadColumnChunk(0, d0, uslice);
    sd.Read(d0, sslice);
    for (std::uint64_t d = 0; d < count; ++d) {
      double v = uslice[d] * sslice[d];
      dot += v * u_g[d0 + d];
      norm2 += v * v;
    }
  }
  report.cosine = (norm2 > 0.0) ? dot / std::sqrt(norm2) : 0.0;  // |u_g| = 1
  return report;
}

}  // namespace eigenmerge
