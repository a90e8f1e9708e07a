// tools/eigenmerge_main.cpp

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

// Command-line front end.  All model and file-format work goes through the
// C API in eigenmerge.h; this file only resolves paths, globs and config.

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "eigenmerge.h"
#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Exit codes: 0 ok, 2 usage, 3 data or io, 4 numeric.
struct CliError {
  int exit_code;
  std::string kind;
  std::string message;
};

int ExitCodeFor(em_status status) {
  switch (status) {
    case EM_OK:
      return 0;
    case EM_ERR_USAGE:
      return 2;
    case EM_ERR_DATA:
    case EM_ERR_IO:
      return 3;
    case EM_ERR_NUMERIC:
      return 4;
  }
  return 3;
}

const char* KindFor(em_status status) {
  switch (status) {
    case EM_OK:
      return "ok";
    case EM_ERR_USAGE:
      return "usage";
    case EM_ERR_DATA:
      return "data";
    case EM_ERR_NUMERIC:
      return "numeric";
    case EM_ERR_IO:
      return "io";
  }
  return "data";
}

void Check(em_status status) {
  if (status != EM_OK) {
    throw CliError{ExitCodeFor(status), KindFor(status), em_last_error()};
  }
}

CliError Usage(const std::string& message) { return CliError{2, "usage", message}; }
CliError Data(const std::string& message) { return CliError{3, "data", message}; }

using StringPtr = std::unique_ptr<char, decltype(&em_string_free)>;
using BufferPtr = std::unique_ptr<double, decltype(&em_buffer_free)>;
using SchemaPtr = std::unique_ptr<em_schema, decltype(&em_schema_free)>;
using BasisPtr = std::unique_ptr<em_basis, decltype(&em_basis_free)>;

StringPtr WrapString(char* s) { return StringPtr(s, &em_string_free); }

std::vector<const char*> CStrings(const std::vector<std::string>& items) {
  std::vector<const char*> out;
  out.reserve(items.size());
  for (const auto& s : items) out.push_back(s.c_str());
  return out;
}

// Options shared by the subcommands.  Config-file values fill in whatever the
// command line left at its default.
struct Common {
  std::string config_path;
  std::string workspace = "ws";
  std::uint64_t seed = 0;
  int threads = 1;
  double rank_tol = 1e-10;
  std::uint64_t chunk_size = 1ull << 20;
  bool overwrite = false;
  bool json_errors = false;
  bool no_standardize = false;

  std::string manifest;
  std::string pre;
  std::vector<std::string> fine_tuned;
  std::vector<std::string> labels;
  std::vector<std::string> include;
  std::vector<std::string> exclude;
};

void AddCommonFlags(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config_path, "JSON config file; flags override it");
  cmd->add_option("--workspace", c.workspace, "workspace directory (default ws)");
  cmd->add_option("--seed", c.seed, "random seed");
  cmd->add_option("--threads", c.threads, "worker thread cap");
  cmd->add_option("--rank-tol", c.rank_tol, "relative singular-value cutoff");
  cmd->add_option("--chunk-size", c.chunk_size, "scalars per streaming block");
  cmd->add_flag("--overwrite", c.overwrite, "replace existing outputs");
  cmd->add_flag("--json", c.json_errors, "JSON errors on stderr");
}

bool UserSet(const CLI::App* cmd, const std::string& flag) {
  const CLI::Option* opt = cmd->get_option_no_throw(flag);
  return opt != nullptr && opt->count() > 0;
}

// Fills options the user did not pass from the JSON config file.
void ApplyConfig(const CLI::App* cmd, Common& c) {
  if (c.config_path.empty()) return;
  std::ifstream in(c.config_path);
  if (!in) throw Data("cannot open config file " + c.config_path);
  json cfg;
  try {
    cfg = json::parse(in);
  } catch (const json::exception& e) {
    throw Data("config file " + c.config_path + ": " + e.what());
  }

  auto notset = [&](const char* flag) { return !UserSet(cmd, flag); };
  try {
    if (cfg.contains("workspace") && notset("--workspace"))
      c.workspace = cfg.at("workspace").get<std::string>();
    if (cfg.contains("seed") && notset("--seed"))
      c.seed = cfg.at("seed").get<std::uint64_t>();
    if (cfg.contains("threads") && notset("--threads"))
      c.threads = cfg.at("threads").get<int>();
    if (cfg.contains("rank_tol") && notset("--rank-tol"))
      c.rank_tol = cfg.at("rank_tol").get<double>();
    if (cfg.contains("chunk_size") && notset("--chunk-size"))
      c.chunk_size = cfg.at("chunk_size").get<std::uint64_t>();
    if (cfg.contains("standardize") && notset("--no-standardize"))
      c.no_standardize = !cfg.at("standardize").get<bool>();
    if (cfg.contains("manifest") && notset("--manifest"))
      c.manifest = cfg.at("manifest").get<std::string>();
    if (cfg.contains("pre") && notset("--pre"))
      c.pre = cfg.at("pre").get<std::string>();
    if (cfg.contains("fine_tuned") && notset("--ft"))
      c.fine_tuned = cfg.at("fine_tuned").get<std::vector<std::string>>();
    if (cfg.contains("labels") && notset("--labels"))
      c.labels = cfg.at("labels").get<std::vector<std::string>>();
    if (cfg.contains("include") && notset("--include"))
      c.include = cfg.at("include").get<std::vector<std::string>>();
    if (cfg.contains("exclude") && notset("--exclude"))
      c.exclude = cfg.at("exclude").get<std::vector<std::string>>();
  } catch (const json::exception& e) {
    throw Data("config file " + c.config_path + ": " + e.what());
  }
}

// Corpus manifests double as pipeline configs: they name the pre-trained
// checkpoint, the fine-tuned checkpoints with labels, and (through the spec
// layout) the filter patterns.
struct ManifestInfo {
  std::string pre;
  std::vector<std::string> speakers;
  std::vector<std::string> labels;
  std::vector<std::string> include;
};

ManifestInfo LoadManifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Data("cannot open manifest " + path);
  json m;
  try {
    m = json::parse(in);
  } catch (const json::exception& e) {
    throw Data("manifest " + path + ": " + e.what());
  }
  ManifestInfo info;
  try {
    fs::path dir = fs::path(path).parent_path();
    info.pre = (dir / m.at("pre").get<std::string>()).string();
    for (const auto& sp : m.at("speakers")) {
      info.speakers.push_back((dir / sp.at("path").get<std::string>()).string());
      info.labels.push_back(sp.at("label").get<std::string>());
    }
    for (const auto& entry : m.at("spec").at("layout")) {
      info.include.push_back(entry.at(0).get<std::string>());
    }
  } catch (const json::exception& e) {
    throw Data("manifest " + path + ": " + e.what());
  }
  return info;
}

// Applies --manifest to whichever of pre/fine_tuned/labels/include the user
// and config left empty.
void ApplyManifest(Common& c, bool want_speakers) {
  if (c.manifest.empty()) return;
  ManifestInfo info = LoadManifest(c.manifest);
  if (c.pre.empty()) c.pre = info.pre;
  if (c.include.empty()) c.include = info.include;
  if (want_speakers && c.fine_tuned.empty()) {
    c.fine_tuned = info.speakers;
    if (c.labels.empty()) c.labels = info.labels;
  }
}

bool HasGlobChars(const std::string& s) {
  return s.find_first_of("*?[") != std::string::npos;
}

// Expands one glob against the named directory's regular files, sorted.  A
// pattern without glob characters is taken as a literal path.
std::vector<std::string> ExpandPattern(const std::string& pattern) {
  if (!HasGlobChars(pattern)) return {pattern};
  auto slash = pattern.find_last_of('/');
  std::string dir = slash == std::string::npos ? "." : pattern.substr(0, slash);
  std::string name_pattern =
      slash == std::string::npos ? pattern : pattern.substr(slash + 1);
  if (HasGlobChars(dir)) throw Usage("glob not supported in directory part: " + pattern);

  std::vector<std::string> out;
  std::error_code ec;
  fs::directory_iterator it(dir, ec);
  if (ec) throw Data("cannot list " + dir + ": " + ec.message());
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    std::string name = entry.path().filename().string();
    int match = 0;
    Check(em_glob_match(name_pattern.c_str(), name.c_str(), &match));
    if (match) {
      out.push_back(slash == std::string::npos ? name : dir + "/" + name);
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<std::string> ExpandPatterns(const std::vector<std::string>& patterns) {
  std::vector<std::string> out;
  for (const auto& p : patterns) {
    auto matched = ExpandPattern(p);
    out.insert(out.end(), matched.begin(), matched.end());
  }
  if (out.empty()) throw Usage("no files matched the given patterns");
  return out;
}

std::string Stem(const std::string& path) { return fs::path(path).stem().string(); }

std::vector<std::string> StemLabels(const std::vector<std::string>& paths) {
  std::vector<std::string> out;
  out.reserve(paths.size());
  for (const auto& p : paths) out.push_back(Stem(p));
  return out;
}

void RequireFresh(const fs::path& path, bool overwrite) {
  if (!overwrite && fs::exists(path)) {
    throw Usage(path.string() + " exists (pass --overwrite to replace it)");
  }
}

void EnsureDir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Data("cannot create " + dir.string() + ": " + ec.message());
}

std::string PaddedIndex(std::uint64_t i, std::uint64_t count) {
  int width = 3;
  for (std::uint64_t v = count > 0 ? count - 1 : 0; v >= 1000; v /= 10) ++width;
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%0*llu", width,
                static_cast<unsigned long long>(i));
  return buf;
}

SchemaPtr BuildSchema(const Common& c) {
  if (c.pre.empty()) {
    throw Usage("no pre-trained checkpoint: pass --pre or --manifest");
  }
  em_schema* schema = nullptr;
  auto include = CStrings(c.include);
  auto exclude = CStrings(c.exclude);
  Check(em_schema_build(c.pre.c_str(), include.data(), include.size(),
                        exclude.data(), exclude.size(), &schema));
  return SchemaPtr(schema, &em_schema_free);
}

BasisPtr OpenBasis(const std::string& dir) {
  em_basis* basis = nullptr;
  Check(em_basis_open(dir.c_str(), &basis));
  return BasisPtr(basis, &em_basis_free);
}

void WriteTextFile(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw Data("cannot write " + path.string());
}

/* ---- synthgen ----------------------------------------------------------- */

struct SynthgenArgs {
  std::string spec_path;
  std::string out_dir;
  std::uint64_t n_speakers = 0;
  std::uint64_t group_a = 0;
  std::uint64_t group_b = 0;
  double factor_strength = -1.0;
  std::int64_t latent_dims = -1;
  double noise_scale = -1.0;
};

int RunSynthgen(const CLI::App* cmd, Common& c, const SynthgenArgs& a) {
  ApplyConfig(cmd, c);
  std::string out_dir = a.out_dir.empty() ? c.workspace + "/corpus" : a.out_dir;
  RequireFresh(fs::path(out_dir) / "manifest.json", c.overwrite);

  json spec;
  if (a.spec_path.empty()) {
    char* text = nullptr;
    Check(em_default_corpus_spec(&text));
    spec = json::parse(WrapString(text).get());
  } else {
    std::ifstream in(a.spec_path);
    if (!in) throw Data("cannot open spec " + a.spec_path);
    try {
      spec = json::parse(in);
    } catch (const json::exception& e) {
      throw Data("spec " + a.spec_path + ": " + e.what());
    }
  }
  if (UserSet(cmd, "--seed")) spec["seed"] = c.seed;
  if (UserSet(cmd, "--n-speakers")) spec["n_speakers"] = a.n_speakers;
  if (UserSet(cmd, "--group-a")) spec["group_a"] = a.group_a;
  if (UserSet(cmd, "--group-b")) spec["group_b"] = a.group_b;
  if (UserSet(cmd, "--factor-strength")) spec["factor_strength"] = a.factor_strength;
  if (UserSet(cmd, "--latent-dims")) spec["latent_dims"] = a.latent_dims;
  if (UserSet(cmd, "--noise-scale")) spec["noise_scale"] = a.noise_scale;

  EnsureDir(out_dir);
  Check(em_generate_corpus(spec.dump().c_str(), out_dir.c_str()));
  std::cout << "wrote corpus under " << out_dir << " ("
            << spec.value("n_speakers", std::uint64_t{10}) << " speakers)\n";
  std::cout << "manifest: " << out_dir << "/manifest.json\n";
  return 0;
}

/* ---- extract ------------------------------------------------------------ */

int RunExtract(const CLI::App* cmd, Common& c, const std::string& out_flag) {
  ApplyConfig(cmd, c);
  ApplyManifest(c, /*want_speakers=*/true);
  if (c.fine_tuned.empty()) {
    throw Usage("no fine-tuned checkpoints: pass --ft or --manifest");
  }
  SchemaPtr schema = BuildSchema(c);

  std::vector<std::string> ft_paths = ExpandPatterns(c.fine_tuned);
  std::vector<std::string> labels =
      c.labels.empty() ? StemLabels(ft_paths) : c.labels;
  if (labels.size() != ft_paths.size()) {
    throw Usage("got " + std::to_string(labels.size()) + " labels for " +
                std::to_string(ft_paths.size()) + " checkpoints");
  }

  std::string out_dir = out_flag.empty() ? c.workspace + "/taskvecs" : out_flag;
  EnsureDir(out_dir);
  for (std::size_t i = 0; i < ft_paths.size(); ++i) {
    std::string out_path = out_dir + "/" + labels[i] + ".evv";
    RequireFresh(out_path, c.overwrite);
    Check(em_extract_task_vector(ft_paths[i].c_str(), c.pre.c_str(), schema.get(),
                                 out_path.c_str()));
    std::cout << "wrote " << out_path << "\n";
  }

  std::uint64_t dim = 0;
  Check(em_schema_dim(schema.get(), &dim));
  std::cout << "extracted " << ft_paths.size() << " task vectors, dim " << dim
            << "\n";
  return 0;
}

/* ---- fit ----------------------------------------------------------------- */

int RunFit(const CLI::App* cmd, Common& c, std::vector<std::string>& vectors,
           const std::string& out_flag) {
  ApplyConfig(cmd, c);
  if (vectors.empty()) vectors.push_back(c.workspace + "/taskvecs/*.evv");
  std::vector<std::string> paths = ExpandPatterns(vectors);
  std::vector<std::string> labels = c.labels.empty() ? StemLabels(paths) : c.labels;
  if (labels.size() != paths.size()) {
    throw Usage("got " + std::to_string(labels.size()) + " labels for " +
                std::to_string(paths.size()) + " vectors");
  }

  std::string out_dir = out_flag.empty() ? c.workspace + "/basis" : out_flag;
  RequireFresh(fs::path(out_dir) / "meta.json", c.overwrite);

  em_fit_options options;
  em_fit_options_init(&options);
  options.rank_tol = c.rank_tol;
  options.standardize = c.no_standardize ? 0 : 1;
  options.chunk_size = c.chunk_size;
  options.threads = c.threads;

  auto path_ptrs = CStrings(paths);
  auto label_ptrs = CStrings(labels);
  Check(em_fit_basis(path_ptrs.data(), label_ptrs.data(), path_ptrs.size(),
                     &options, out_dir.c_str()));

  BasisPtr basis = OpenBasis(out_dir);
  std::uint64_t dim = 0, rank = 0, n = 0;
  Check(em_basis_dim(basis.get(), &dim));
  Check(em_basis_rank(basis.get(), &rank));
  Check(em_basis_num_speakers(basis.get(), &n));
  std::cout << "fitted basis under " << out_dir << ": dim " << dim << ", "
            << n << " speakers, rank " << rank << "\n";
  return 0;
}

/* ---- sample --------------------------------------------------------------- */

int RunSample(const CLI::App* cmd, Common& c, const std::string& basis_flag,
              std::uint64_t count, const std::string& out_flag) {
  ApplyConfig(cmd, c);
  if (count == 0) throw Usage("--count must be at least 1");
  std::string basis_dir = basis_flag.empty() ? c.workspace + "/basis" : basis_flag;
  BasisPtr basis = OpenBasis(basis_dir);

  std::uint64_t rank = 0, fingerprint = 0;
  Check(em_basis_rank(basis.get(), &rank));
  Check(em_basis_fingerprint(basis.get(), &fingerprint));

  std::vector<double> draws(count * rank);
  Check(em_basis_sample(basis.get(), c.seed, count, draws.data()));

  std::string out_dir = out_flag.empty() ? c.workspace + "/coeffs" : out_flag;
  EnsureDir(out_dir);
  for (std::uint64_t i = 0; i < count; ++i) {
    std::string out_path = out_dir + "/sample_" + PaddedIndex(i, count) + ".evv";
    RequireFresh(out_path, c.overwrite);
    Check(em_vector_write(out_path.c_str(), draws.data() + i * rank, rank,
                          fingerprint));
  }
  std::cout << "wrote " << count << " coefficient files under " << out_dir << "\n";
  return 0;
}

/* ---- synth ---------------------------------------------------------------- */

int RunSynth(const CLI::App* cmd, Common& c, const std::string& basis_flag,
             std::vector<std::string>& coeffs, std::uint64_t count,
             const std::string& out_flag) {
  ApplyConfig(cmd, c);
  ApplyManifest(c, /*want_speakers=*/false);
  std::string basis_dir = basis_flag.empty() ? c.workspace + "/basis" : basis_flag;
  BasisPtr basis = OpenBasis(basis_dir);
  SchemaPtr schema = BuildSchema(c);

  std::uint64_t rank = 0, basis_fp = 0;
  Check(em_basis_rank(basis.get(), &rank));
  Check(em_basis_fingerprint(basis.get(), &basis_fp));

  std::string out_dir = out_flag.empty() ? c.workspace + "/synth" : out_flag;
  EnsureDir(out_dir);

  std::uint64_t written = 0;
  if (!coeffs.empty()) {
    std::vector<std::string> coeff_paths = ExpandPatterns(coeffs);
    for (const auto& coeff_path : coeff_paths) {
      double* raw = nullptr;
      std::uint64_t dim = 0, fp = 0;
      Check(em_vector_read(coeff_path.c_str(), &raw, &dim, &fp));
      BufferPtr w(raw, &em_buffer_free);
      if (fp != 0 && fp != basis_fp) {
        throw Data("coefficient file " + coeff_path +
                   " was not produced by this basis");
      }
      std::string label = Stem(coeff_path);
      std::string out_path = out_dir + "/" + label + ".evc";
      RequireFresh(out_path, c.overwrite);
      Check(em_synthesize(basis.get(), w.get(), dim, c.pre.c_str(), schema.get(),
                          out_path.c_str(), label.c_str(), nullptr));
      std::cout << "wrote " << out_path << "\n";
      ++written;
    }
  } else {
    if (count == 0) throw Usage("--count must be at least 1");
    std::vector<double> draws(count * rank);
    Check(em_basis_sample(basis.get(), c.seed, count, draws.data()));
    std::uint64_t seed = c.seed;
    for (std::uint64_t i = 0; i < count; ++i) {
      std::string label = "gen_" + PaddedIndex(i, count);
      std::string out_path = out_dir + "/" + label + ".evc";
      RequireFresh(out_path, c.overwrite);
      Check(em_synthesize(basis.get(), draws.data() + i * rank, rank,
                          c.pre.c_str(), schema.get(), out_path.c_str(),
                          label.c_str(), &seed));
      std::cout << "wrote " << out_path << "\n";
      ++written;
    }
  }
  std::cout << "synthesized " << written << " checkpoints\n";
  return 0;
}

/* ---- interp --------------------------------------------------------------- */

int RunInterp(const CLI::App* cmd, Common& c, const std::string& model_a,
              const std::string& model_b, double alpha, const std::string& out) {
  ApplyConfig(cmd, c);
  ApplyManifest(c, /*want_speakers=*/false);
  if (c.pre.empty()) {
    throw Usage("no pre-trained checkpoint: pass --pre or --manifest");
  }
  SchemaPtr schema = BuildSchema(c);
  RequireFresh(out, c.overwrite);
  if (auto dir = fs::path(out).parent_path(); !dir.empty()) EnsureDir(dir);
  Check(em_interpolate(model_a.c_str(), model_b.c_str(), c.pre.c_str(), alpha,
                       schema.get(), out.c_str()));
  std::cout << "wrote " << out << "\n";
  return 0;
}

/* ---- flip ----------------------------------------------------------------- */

int RunFlip(const CLI::App* cmd, Common& c, const std::string& coeff,
            std::uint64_t axis, const std::string& out_flag) {
  ApplyConfig(cmd, c);
  std::string out = out_flag;
  if (out.empty()) {
    fs::path p(coeff);
    out = (p.parent_path() / (p.stem().string() + "_flipped.evv")).string();
  }
  RequireFresh(out, c.overwrite);
  Check(em_flip_axis(coeff.c_str(), axis, out.c_str()));
  std::cout << "wrote " << out << "\n";
  return 0;
}

/* ---- report --------------------------------------------------------------- */

int RunReportSimilarity(const CLI::App* cmd, Common& c,
                        std::vector<std::string>& generated,
                        std::vector<std::string>& bases,
                        const std::string& out_flag) {
  ApplyConfig(cmd, c);
  ApplyManifest(c, /*want_speakers=*/false);
  if (generated.empty()) generated.push_back(c.workspace + "/synth/*.evc");
  if (bases.empty()) bases.push_back(c.workspace + "/taskvecs/*.evv");
  std::vector<std::string> gen_paths = ExpandPatterns(generated);
  std::vector<std::string> base_paths = ExpandPatterns(bases);

  std::string out_dir = out_flag.empty() ? c.workspace + "/reports" : out_flag;
  EnsureDir(out_dir);

  // Checkpoints among the generated inputs are reduced to task vectors first;
  // .evv inputs are used as they are.
  bool extracted_any = false;
  std::vector<std::string> gen_vec_paths;
  SchemaPtr schema(nullptr, &em_schema_free);
  for (const auto& path : gen_paths) {
    if (fs::path(path).extension() == ".evv") {
      gen_vec_paths.push_back(path);
      continue;
    }
    if (!schema) schema = BuildSchema(c);
    if (!extracted_any) {
      EnsureDir(out_dir + "/gen_vectors");
      extracted_any = true;
    }
    std::string vec_path = out_dir + "/gen_vectors/" + Stem(path) + ".evv";
    RequireFresh(vec_path, c.overwrite);
    Check(em_extract_task_vector(path.c_str(), c.pre.c_str(), schema.get(),
                                 vec_path.c_str()));
    gen_vec_paths.push_back(vec_path);
  }

  std::vector<std::string> gen_labels = StemLabels(gen_vec_paths);
  std::vector<std::string> base_labels = StemLabels(base_paths);
  auto gen_ptrs = CStrings(gen_vec_paths);
  auto gen_label_ptrs = CStrings(gen_labels);
  auto base_ptrs = CStrings(base_paths);
  auto base_label_ptrs = CStrings(base_labels);

  char* rows_csv = nullptr;
  char* summary_csv = nullptr;
  Check(em_similarity_report(gen_ptrs.data(), gen_label_ptrs.data(),
                             gen_ptrs.size(), base_ptrs.data(),
                             base_label_ptrs.data(), base_ptrs.size(), &rows_csv,
                             &summary_csv));
  StringPtr rows = WrapString(rows_csv);
  StringPtr summary = WrapString(summary_csv);

  fs::path rows_path = fs::path(out_dir) / "similarity_rows.csv";
  fs::path summary_path = fs::path(out_dir) / "similarity_summary.csv";
  RequireFresh(rows_path, c.overwrite);
  RequireFresh(summary_path, c.overwrite);
  WriteTextFile(rows_path, rows.get());
  WriteTextFile(summary_path, summary.get());
  std::cout << "wrote " << rows_path.string() << "\n";
  std::cout << "wrote " << summary_path.string() << "\n";
  return 0;
}

int RunReportScatter(const CLI::App* cmd, Common& c, const std::string& basis_flag,
                     std::uint64_t comp_i, std::uint64_t comp_j,
                     const std::string& out_flag) {
  ApplyConfig(cmd, c);
  std::string basis_dir = basis_flag.empty() ? c.workspace + "/basis" : basis_flag;
  BasisPtr basis = OpenBasis(basis_dir);

  char* csv = nullptr;
  Check(em_coeff_scatter(basis.get(), comp_i, comp_j, &csv));
  StringPtr text = WrapString(csv);

  std::string out_dir = out_flag.empty() ? c.workspace + "/reports" : out_flag;
  EnsureDir(out_dir);
  fs::path out_path = fs::path(out_dir) / ("scatter_" + std::to_string(comp_i) +
                                           "_" + std::to_string(comp_j) + ".csv");
  RequireFresh(out_path, c.overwrite);
  WriteTextFile(out_path, text.get());
  std::cout << "wrote " << out_path.string() << "\n";
  return 0;
}

int Run(int argc, char** argv) {
  CLI::App app{"eigenmerge: low-rank speaker-space toolkit for model checkpoints"};
  app.require_subcommand(1);

  Common c;

  auto* synthgen = app.add_subcommand(
      "synthgen", "generate a synthetic checkpoint corpus with a planted factor");
  SynthgenArgs sg;
  AddCommonFlags(synthgen, c);
  synthgen->add_option("--spec", sg.spec_path, "corpus spec JSON file");
  synthgen->add_option("--out", sg.out_dir, "output directory (default ws/corpus)");
  synthgen->add_option("--n-speakers", sg.n_speakers, "number of speakers");
  synthgen->add_option("--group-a", sg.group_a, "size of group a");
  synthgen->add_option("--group-b", sg.group_b, "size of group b");
  synthgen->add_option("--factor-strength", sg.factor_strength,
                       "planted factor strength");
  synthgen->add_option("--latent-dims", sg.latent_dims, "shared latent directions");
  synthgen->add_option("--noise-scale", sg.noise_scale, "per-speaker noise scale");

  auto* extract = app.add_subcommand(
      "extract", "write task vectors for fine-tuned checkpoints");
  std::string extract_out;
  AddCommonFlags(extract, c);
  extract->add_option("--manifest", c.manifest, "corpus manifest supplying paths");
  extract->add_option("--pre", c.pre, "pre-trained checkpoint");
  extract->add_option("--ft", c.fine_tuned, "fine-tuned checkpoints or globs");
  extract->add_option("--labels", c.labels, "labels, one per checkpoint");
  extract->add_option("--include", c.include, "tensor include globs");
  extract->add_option("--exclude", c.exclude, "tensor exclude globs");
  extract->add_option("--out", extract_out, "output directory (default ws/taskvecs)");

  auto* fit = app.add_subcommand("fit", "fit the speaker basis from task vectors");
  std::vector<std::string> fit_vectors;
  std::string fit_out;
  AddCommonFlags(fit, c);
  fit->add_option("--vectors", fit_vectors,
                  "task vector files or globs (default ws/taskvecs/*.evv)");
  fit->add_option("--labels", c.labels, "labels, one per vector");
  fit->add_option("--out", fit_out, "basis directory (default ws/basis)");
  fit->add_flag("--no-standardize", c.no_standardize,
                "skip per-dimension standardization");

  auto* sample = app.add_subcommand(
      "sample", "draw coefficient vectors from the basis distribution");
  std::string sample_basis, sample_out;
  std::uint64_t sample_count = 1;
  AddCommonFlags(sample, c);
  sample->add_option("--basis", sample_basis, "basis directory (default ws/basis)");
  sample->add_option("--count", sample_count, "number of draws");
  sample->add_option("--out", sample_out, "output directory (default ws/coeffs)");

  auto* synth = app.add_subcommand(
      "synth", "synthesize checkpoints from coefficient vectors");
  std::string synth_basis, synth_out;
  std::vector<std::string> synth_coeffs;
  std::uint64_t synth_count = 1;
  AddCommonFlags(synth, c);
  synth->add_option("--basis", synth_basis, "basis directory (default ws/basis)");
  synth->add_option("--coeff", synth_coeffs, "coefficient files or globs");
  synth->add_option("--count", synth_count, "draws when no --coeff is given");
  synth->add_option("--manifest", c.manifest, "corpus manifest supplying paths");
  synth->add_option("--pre", c.pre, "pre-trained checkpoint");
  synth->add_option("--include", c.include, "tensor include globs");
  synth->add_option("--exclude", c.exclude, "tensor exclude globs");
  synth->add_option("--out", synth_out, "output directory (default ws/synth)");

  auto* interp = app.add_subcommand(
      "interp", "interpolate two checkpoints over the filtered tensors");
  std::string interp_a, interp_b, interp_out;
  double interp_alpha = 0.5;
  AddCommonFlags(interp, c);
  interp->add_option("--model-a", interp_a, "checkpoint at alpha 0")->required();
  interp->add_option("--model-b", interp_b, "checkpoint at alpha 1")->required();
  interp->add_option("--alpha", interp_alpha, "merging coefficient")->required();
  interp->add_option("--manifest", c.manifest, "corpus manifest supplying paths");
  interp->add_option("--pre", c.pre, "pre-trained checkpoint");
  interp->add_option("--include", c.include, "tensor include globs");
  interp->add_option("--exclude", c.exclude, "tensor exclude globs");
  interp->add_option("--out", interp_out, "output checkpoint path")->required();

  auto* flip = app.add_subcommand("flip", "negate one coefficient component");
  std::string flip_coeff, flip_out;
  std::uint64_t flip_axis = 0;
  AddCommonFlags(flip, c);
  flip->add_option("--coeff", flip_coeff, "coefficient file")->required();
  flip->add_option("--axis", flip_axis, "component to negate (default 0)");
  flip->add_option("--out", flip_out, "output path (default <stem>_flipped.evv)");

  auto* report = app.add_subcommand("report", "write analysis CSVs");
  report->require_subcommand(1);

  auto* similarity = report->add_subcommand(
      "similarity", "max cosine similarity of generated vs base task vectors");
  std::vector<std::string> report_generated, report_bases;
  std::string report_out;
  AddCommonFlags(similarity, c);
  similarity->add_option("--generated", report_generated,
                         "generated checkpoints or .evv files (default ws/synth/*.evc)");
  similarity->add_option("--bases", report_bases,
                         "base task vectors (default ws/taskvecs/*.evv)");
  similarity->add_option("--manifest", c.manifest, "corpus manifest supplying paths");
  similarity->add_option("--pre", c.pre, "pre-trained checkpoint");
  similarity->add_option("--include", c.include, "tensor include globs");
  similarity->add_option("--exclude", c.exclude, "tensor exclude globs");
  similarity->add_option("--out", report_out, "output directory (default ws/reports)");

  auto* scatter = report->add_subcommand(
      "scatter", "base coefficients on two components");
  std::string scatter_basis, scatter_out;
  std::uint64_t scatter_i = 0, scatter_j = 1;
  AddCommonFlags(scatter, c);
  scatter->add_option("--basis", scatter_basis, "basis directory (default ws/basis)");
  scatter->add_option("--component-i", scatter_i, "first component");
  scatter->add_option("--component-j", scatter_j, "second component");
  scatter->add_option("--out", scatter_out, "output directory (default ws/reports)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    throw Usage(e.what());
  }

  if (synthgen->parsed()) return RunSynthgen(synthgen, c, sg);
  if (extract->parsed()) return RunExtract(extract, c, extract_out);
  if (fit->parsed()) return RunFit(fit, c, fit_vectors, fit_out);
  if (sample->parsed()) return RunSample(sample, c, sample_basis, sample_count,
                                         sample_out);
  if (synth->parsed()) return RunSynth(synth, c, synth_basis, synth_coeffs,
                                       synth_count, synth_out);
  if (interp->parsed()) return RunInterp(interp, c, interp_a, interp_b,
                                         interp_alpha, interp_out);
  if (flip->parsed()) return RunFlip(flip, c, flip_coeff, flip_axis, flip_out);
  if (report->parsed()) {
    if (similarity->parsed()) {
      return RunReportSimilarity(similarity, c, report_generated, report_bases,
                                 report_out);
    }
    return RunReportScatter(scatter, c, scatter_basis, scatter_i, scatter_j,
                            scatter_out);
  }
  throw Usage("no command given");
}

}  // namespace

int main(int argc, char** argv) {
  bool json_errors = false;
  for (int i = 1; i < argc; ++i) {
    if (std::string(argv[i]) == "--json") json_errors = true;
  }
  try {
    return Run(argc, argv);
  } catch (const CliError& e) {
    if (json_errors) {
      json err = {{"error",
                   {{"code", e.exit_code}, {"kind", e.kind}, {"message", e.message}}}};
      std::cerr << err.dump() << "\n";
    } else {
      std::cerr << "error: " << e.message << "\n";
    }
    return e.exit_code;
  } catch (const std::exception& e) {
    if (json_errors) {
      json err = {{"error", {{"code", 3}, {"kind", "data"}, {"message", e.what()}}}};
      std::cerr << err.dump() << "\n";
    } else {
      std::cerr << "error: " << e.what() << "\n";
    }
    return 3;
  }
}
