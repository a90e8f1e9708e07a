// tests/unit_checkpoint.cpp

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

#include <cstring>
#include <set>

#include "checkpoint.hpp"
#include "common.hpp"
#include "doctest.h"
#include "json.hpp"
#include "test_util.hpp"

using namespace eigenmerge;
using emtest::TempDir;

namespace {

// magic | u64 header length | header | data
std::string BuildRawContainer(const std::string& header, const std::string& data) {
  std::string out = "EVC1";
  char len[8];
  StoreLeU64(header.size(), len);
  out.append(len, 8);
  out += header;
  out += data;
  return out;
}

}  // namespace

TEST_SUITE_BEGIN("checkpoint");

TEST_CASE("two-tensor round trip preserves values, dtypes and metadata") {
  TempDir dir("ckpt");
  Checkpoint ckpt;
  ckpt.tensors["enc.w"] = Tensor::FromValues(Dtype::kF64, {2, 2},
                                             std::vector<double>{1.0, -2.5, 0.25, 8.0});
  ckpt.tensors["enc.b"] = Tensor::FromValues(Dtype::kF32, {3},
                                             std::vector<double>{0.5, -1.0, 2.0});
  ckpt.metadata["step"] = "120";

  std::string path = dir.File("a.evc");
  WriteCheckpoint(ckpt, path);
  Checkpoint back = ReadCheckpoint(path);
  CHECK(back == ckpt);
  CHECK(back.tensors.at("enc.b").dtype == Dtype::kF32);
  CHECK(back.tensors.at("enc.w").ToDoubles() ==
        std::vector<double>{1.0, -2.5, 0.25, 8.0});
  CHECK(back.metadata.at("step") == "120");
}

TEST_CASE("written header is canonical: sorted names, contiguous offsets") {
  TempDir dir("ckpt");
  Checkpoint ckpt;
  ckpt.tensors["zz"] = Tensor::FromValues(Dtype::kF64, {2}, std::vector<double>{1, 2});
  ckpt.tensors["aa"] = Tensor::FromValues(Dtype::kF32, {1}, std::vector<double>{3});
  ckpt.tensors["mm"] = Tensor::FromValues(Dtype::kF64, {}, std::vector<double>{4});
  std::string path = dir.File("c.evc");
  WriteCheckpoint(ckpt, path);

  std::string raw = emtest::ReadFileBytes(path);
  REQUIRE(raw.size() > 12);
  std::uint64_t header_len = LoadLeU64(raw.data() + 4);
  auto header = nlohmann::json::parse(raw.substr(12, header_len));
  REQUIRE(header.contains("tensors"));

  std::uint64_t expected_offset = 0;
  std::vector<std::string> names;
  for (auto it = header["tensors"].begin(); it != header["tensors"].end(); ++it) {
    names.push_back(it.key());
    CHECK(it.value()["offset"].get<std::uint64_t>() == expected_offset);
    expected_offset += it.value()["nbytes"].get<std::uint64_t>();
  }
  CHECK(names == std::vector<std::string>{"aa", "mm", "zz"});
  CHECK(raw.size() == 12 + header_len + expected_offset);
}

TEST_CASE("scalar and empty tensors round trip") {
  TempDir dir("ckpt");
  Checkpoint ckpt;
  ckpt.tensors["scalar"] = Tensor::FromValues(Dtype::kF64, {}, std::vector<double>{7.5});
  ckpt.tensors["empty"] = Tensor::FromValues(Dtype::kF64, {0, 4}, std::vector<double>{});
  std::string path = dir.File("s.evc");
  WriteCheckpoint(ckpt, path);
  Checkpoint back = ReadCheckpoint(path);
  CHECK(back == ckpt);
  CHECK(back.tensors.at("scalar").NumElements() == 1);
  CHECK(back.tensors.at("empty").NumElements() == 0);
}

TEST_CASE("f32 tensors store single precision bits") {
  TempDir dir("ckpt");
  Checkpoint ckpt;
  double v = 0.1;  // not representable in f32
  ckpt.tensors["t"] = Tensor::FromValues(Dtype::kF32, {1}, std::vector<double>{v});
  std::string path = dir.File("f.evc");
  WriteCheckpoint(ckpt, path);
  Checkpoint back = ReadCheckpoint(path);
  CHECK(back.tensors.at("t").ToDoubles()[0] == doctest::Approx(v).epsilon(1e-7));
  CHECK(back.tensors.at("t").ToDoubles()[0] == static_cast<double>(0.1f));
}

TEST_CASE("randomized write-read-write round trips are byte identical") {
  TempDir dir("ckpt");
  SplitMix64 rng(0xC0FFEE);
  for (int i = 0; i < 300; ++i) {
    Checkpoint ckpt = emtest::RandomCheckpoint(rng);
    std::string p1 = dir.File("r1.evc");
    std::string p2 = dir.File("r2.evc");
    WriteCheckpoint(ckpt, p1);
    Checkpoint back = ReadCheckpoint(p1);
    REQUIRE(back == ckpt);
    WriteCheckpoint(back, p2);
    REQUIRE(emtest::ReadFileBytes(p1) == emtest::ReadFileBytes(p2));
  }
}

TEST_CASE("reader rejects malformed containers") {
  TempDir dir("ckpt");
  std::string path = dir.File("bad.evc");

  SUBCASE("too short") {
    emtest::WriteFileBytes(path, "EVC");
    CHECK_THROWS_WITH_AS(ReadCheckpoint(path), doctest::Contains("too short"),
                         DataError);
  }
  SUBCASE("bad magic") {
    emtest::WriteFileBytes(path, std::string("EVCX") + std::string(20, '\0'));
    CHECK_THROWS_WITH_AS(ReadCheckpoint(path), doctest::Contains("bad magic"),
                         DataError);
  }
  SUBCASE("header length beyond file") {
    std::string raw = "EVC1";
    char len[8];
    StoreLeU64(9999, len);
    raw.append(len, 8);
    raw += "{}";
    emtest::WriteFileBytes(path, raw);
    CHECK_THROWS_WITH_AS(ReadCheckpoint(path), doctest::Contains("truncated header"),
                         DataError);
  }
  SUBCASE("header is not the expected object") {
    emtest::WriteFileBytes(path, BuildRawContainer("[1,2]", ""));
    CHECK_THROWS_WITH_AS(ReadCheckpoint(path), doctest::Contains("malformed header"),
                         DataError);
  }
  SUBCASE("header JSON is invalid") {
    emtest::WriteFileBytes(path, BuildRawContainer("{not json", ""));
    CHECK_THROWS_AS(ReadCheckpoint(path), DataError);
  }
  SUBCASE("duplicate tensor name in header") {
    std::string header =
        R"({"metadata":{},"tensors":{)"
        R"("a":{"dtype":"f64","shape":[1],"offset":0,"nbytes":8},)"
        R"("a":{"dtype":"f64","shape":[1],"offset":8,"nbytes":8}}})";
    emtest::WriteFileBytes(path, BuildRawContainer(header, std::string(16, '\0')));
    CHECK_THROWS_WITH_AS(ReadCheckpoint(path), doctest::Contains("duplicate key"),
                         DataError);
  }
  SUBCASE("tensor data runs past the file") {
    std::string header =
        R"({"metadata":{},"tensors":{"a":{"dtype":"f64","shape":[4],"offset":0,"nbytes":32}}})";
    emtest::WriteFileBytes(path, BuildRawContainer(header, std::string(16, '\0')));
    CHECK_THROWS_WITH_AS(ReadCheckpoint(path),
                         doctest::Contains("truncated data section"), DataError);
  }
  SUBCASE("overlapping tensor data") {
    std::string header =
        R"({"metadata":{},"tensors":{)"
        R"("a":{"dtype":"f64","shape":[2],"offset":0,"nbytes":16},)"
        R"("b":{"dtype":"f64","shape":[2],"offset":8,"nbytes":16}}})";
    emtest::WriteFileBytes(path, BuildRawContainer(header, std::string(24, '\0')));
    CHECK_THROWS_WITH_AS(ReadCheckpoint(path), doctest::Contains("overlapping data"),
                         DataError);
  }
  SUBCASE("nbytes disagrees with shape and dtype") {
    std::string header =
        R"({"metadata":{},"tensors":{"a":{"dtype":"f64","shape":[2],"offset":0,"nbytes":8}}})";
    emtest::WriteFileBytes(path, BuildRawContainer(header, std::string(8, '\0')));
    CHECK_THROWS_AS(ReadCheckpoint(path), DataError);
  }
  SUBCASE("unknown dtype") {
    std::string header =
        R"({"metadata":{},"tensors":{"a":{"dtype":"f16","shape":[1],"offset":0,"nbytes":2}}})";
    emtest::WriteFileBytes(path, BuildRawContainer(header, std::string(2, '\0')));
    CHECK_THROWS_WITH_AS(ReadCheckpoint(path), doctest::Contains("dtype"), DataError);
  }
  SUBCASE("empty tensor name") {
    std::string header =
        R"({"metadata":{},"tensors":{"":{"dtype":"f64","shape":[1],"offset":0,"nbytes":8}}})";
    emtest::WriteFileBytes(path, BuildRawContainer(header, std::string(8, '\0')));
    CHECK_THROWS_WITH_AS(ReadCheckpoint(path), doctest::Contains("empty tensor name"),
                         DataError);
  }
  SUBCASE("metadata value is not a string") {
    std::string header = R"({"metadata":{"k":5},"tensors":{}})";
    emtest::WriteFileBytes(path, BuildRawContainer(header, ""));
    CHECK_THROWS_AS(ReadCheckpoint(path), DataError);
  }
  SUBCASE("missing file is an io error") {
    CHECK_THROWS_AS(ReadCheckpoint(dir.File("absent.evc")), IoError);
  }
}

TEST_CASE("reader accepts tensors stored in any non-overlapping order") {
  TempDir dir("ckpt");
  // b's data before a's, with a gap; values 1.0 and 2.0.
  std::string data(24, '\0');
  double one = 1.0, two = 2.0;
  std::memcpy(data.data() + 16, &one, 8);
  std::memcpy(data.data() + 0, &two, 8);
  std::string header =
      R"({"metadata":{},"tensors":{)"
      R"("a":{"dtype":"f64","shape":[1],"offset":16,"nbytes":8},)"
      R"("b":{"dtype":"f64","shape":[1],"offset":0,"nbytes":8}}})";
  std::string path = dir.File("weird.evc");
  emtest::WriteFileBytes(path, BuildRawContainer(header, data));

  Checkpoint ckpt = ReadCheckpoint(path);
  CHECK(ckpt.tensors.at("a").ToDoubles()[0] == 1.0);
  CHECK(ckpt.tensors.at("b").ToDoubles()[0] == 2.0);

  // Rewriting compacts to canonical form.
  std::string path2 = dir.File("canon.evc");
  WriteCheckpoint(ckpt, path2);
  Checkpoint back = ReadCheckpoint(path2);
  CHECK(back == ckpt);
}

TEST_CASE("streaming reader matches whole-file reads") {
  TempDir dir("ckpt");
  SplitMix64 rng(77);
  Checkpoint ckpt;
  ckpt.tensors["big"] =
      Tensor::FromValues(Dtype::kF64, {41}, emtest::DyadicValues(rng, 41));
  ckpt.tensors["small"] =
      Tensor::FromValues(Dtype::kF32, {5}, emtest::DyadicValues(rng, 5));
  std::string path = dir.File("st.evc");
  WriteCheckpoint(ckpt, path);

  CheckpointReader reader(path);
  CHECK(reader.Index().at("big").NumElements() == 41);
  CHECK(reader.metadata() == ckpt.metadata);

  std::vector<double> whole = reader.Read("big").ToDoubles();
  std::vector<double> chunks(41);
  for (std::uint64_t first = 0; first < 41; first += 7) {
    std::uint64_t n = std::min<std::uint64_t>(7, 41 - first);
    reader.ReadValues("big", first, std::span<double>(chunks.data() + first, n));
  }
  CHECK(chunks == whole);
  CHECK(reader.ReadAll() == ckpt);

  CHECK_THROWS_AS(reader.Read("absent"), DataError);
  std::vector<double> over(64);
  CHECK_THROWS_AS(reader.ReadValues("big", 30, std::span<double>(over.data(), 20)),
                  UsageError);
}

TEST_CASE("incremental writer enforces the declared plan") {
  TempDir dir("ckpt");
  TensorIndex plan;
  plan["a"] = TensorSpec{Dtype::kF64, {3}};
  plan["b"] = TensorSpec{Dtype::kF32, {2}};
  std::string path = dir.File("w.evc");

  SUBCASE("in-order append produces a readable file") {
    CheckpointWriter writer(path, plan, {{"k", "v"}});
    writer.AppendValues("a", std::vector<double>{1, 2});
    writer.AppendValues("a", std::vector<double>{3});
    writer.AppendValues("b", std::vector<double>{4, 5});
    writer.Finish();
    Checkpoint back = ReadCheckpoint(path);
    CHECK(back.tensors.at("a").ToDoubles() == std::vector<double>{1, 2, 3});
    CHECK(back.tensors.at("b").ToDoubles() == std::vector<double>{4, 5});
    CHECK(back.metadata.at("k") == "v");
  }
  SUBCASE("out-of-order append is rejected") {
    CheckpointWriter writer(path, plan, {});
    CHECK_THROWS_WITH_AS(writer.AppendValues("b", std::vector<double>{4, 5}),
                         doctest::Contains("out of order"), UsageError);
  }
  SUBCASE("appending more than planned is rejected") {
    CheckpointWriter writer(path, plan, {});
    CHECK_THROWS_WITH_AS(writer.AppendValues("a", std::vector<double>{1, 2, 3, 4}),
                         doctest::Contains("more data"), UsageError);
  }
  SUBCASE("finishing early is rejected") {
    CheckpointWriter writer(path, plan, {});
    writer.AppendValues("a", std::vector<double>{1, 2, 3});
    CHECK_THROWS_WITH_AS(writer.Finish(), doctest::Contains("missing"), UsageError);
  }
}

TEST_CASE("schema diff reports the asymmetry") {
  Checkpoint a, b;
  a.tensors["x"] = Tensor::FromValues(Dtype::kF64, {2}, std::vector<double>{1, 2});
  a.tensors["y"] = Tensor::FromValues(Dtype::kF64, {2}, std::vector<double>{1, 2});
  b.tensors["y"] = Tensor::FromValues(Dtype::kF64, {3}, std::vector<double>{1, 2, 3});
  b.tensors["z"] = Tensor::FromValues(Dtype::kF64, {2}, std::vector<double>{1, 2});

  SchemaReport report = DiffSchemas(a, b);
  CHECK(report.only_in_a == std::vector<std::string>{"x"});
  CHECK(report.only_in_b == std::vector<std::string>{"z"});
  REQUIRE(report.mismatches.size() == 1);
  CHECK(report.mismatches[0].name == "y");
  CHECK_FALSE(report.Empty());

  SchemaReport same = DiffSchemas(a, a);
  CHECK(same.Empty());

  auto parsed = nlohmann::json::parse(report.ToJson());
  CHECK(parsed["only_in_a"][0] == "x");
  CHECK(parsed["mismatches"][0]["name"] == "y");
}

TEST_CASE("validate rejects inconsistent in-memory checkpoints") {
  Checkpoint ckpt;
  ckpt.tensors["a"] = Tensor::FromValues(Dtype::kF64, {2}, std::vector<double>{1, 2});
  ckpt.tensors["a"].data.resize(9);
  CHECK_THROWS_AS(ValidateCheckpoint(ckpt), DataError);

  Checkpoint empty_name;
  empty_name.tensors[""] = Tensor::FromValues(Dtype::kF64, {1}, std::vector<double>{1});
  CHECK_THROWS_AS(ValidateCheckpoint(empty_name), DataError);
}

TEST_SUITE_END();
