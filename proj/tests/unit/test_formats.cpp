// Copyright (c) 2026 The w4ax Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>

#include <bit>
#include <filesystem>

#include "golden_cases.hpp"
#include "oracles.hpp"
#include "w4ax/formats.hpp"

namespace w4ax::io {
namespace {

const std::filesystem::path kGolden = W4AX_GOLDEN_DIR;

// Little-endian byte assembly written independently of the library writer.
struct Bytes {
  std::vector<std::uint8_t> b;
  void put(std::uint64_t v, int n) {
    for (int i = 0; i < n; ++i) b.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void str(const char* s) {
    while (*s) b.push_back(static_cast<std::uint8_t>(*s++));
  }
  void f32(double v) { put(std::bit_cast<std::uint32_t>(static_cast<float>(v)), 4); }
};

TEST(Golden, FilesAreByteIdenticalToEncoder) {
  for (const auto& c : golden::cmtq_cases()) {
    const auto bytes = read_file(kGolden / c.file);
    EXPECT_EQ(encode_cmtq(c.tensor), bytes) << c.file;
    EXPECT_EQ(decode_cmtq(bytes), c.tensor) << c.file;
  }
  const auto dense = read_file(kGolden / golden::kCmtaFile);
  EXPECT_EQ(encode_cmta(golden::cmta_case()), dense);
  EXPECT_EQ(decode_cmta(dense), golden::cmta_case());
}

TEST(Golden, SwappedWeightsFileMatchesHandAssembledBytes) {
  const auto codes = golden::codes(32, 5, 3);
  Bytes x;
  x.str("CMTQ");
  x.put(1, 2);  // version
  x.put(2, 1);  // rank
  x.put(4, 4);
  x.put(8, 4);
  x.put(1, 1);  // swapped order
  x.put(0, 3);  // no interleave
  x.put(0, 1);  // symmetric
  x.put(2, 1);  // per group
  x.put(4, 4);  // group size
  x.put(8, 4);  // parameter count
  for (int i = 0; i < 8; ++i) x.put(4, 1);
  for (int i = 0; i < 8; ++i) x.f32(std::ldexp(1.0, i % 7 - 4));
  for (int i = 0; i < 8; ++i) x.put(0, 4);
  x.put(16, 8);
  for (std::size_t w = 0; w < 8; ++w) {
    std::uint16_t word = 0;
    for (int j = 0; j < 4; ++j) {
      word |= static_cast<std::uint16_t>((codes[4 * w + j] & 0xF) << oracle::kSwappedShift[j]);
    }
    x.put(word, 2);
  }
  EXPECT_EQ(read_file(kGolden / "weights_4x8_g4_swapped.cmtq"), x.b);
}

TEST(Golden, DenseFileMatchesHandAssembledBytes) {
  Bytes x;
  x.str("CMTA");
  x.put(2, 1);
  x.put(3, 4);
  x.put(4, 4);
  for (int i = 0; i < 12; ++i) x.f32((i - 6) * 0.5);
  EXPECT_EQ(read_file(kGolden / golden::kCmtaFile), x.b);
}

TEST(Cmta, RoundTripAndErrors) {
  Rng rng(1);
  const MatrixD m = oracle::gaussian(7, 5, rng);
  const DenseTensor t = from_matrix(m);
  EXPECT_EQ(t.dims, (std::vector<std::uint32_t>{7, 5}));
  const auto bytes = encode_cmta(t);
  EXPECT_EQ(bytes.size(), 4 + 1 + 8 + 4 * 35u);
  EXPECT_EQ(decode_cmta(bytes), t);
  const MatrixD back = to_matrix(decode_cmta(bytes));
  for (std::size_t i = 0; i < m.size(); ++i) EXPECT_EQ(back.data()[i], static_cast<double>(static_cast<float>(m.data()[i])));

  auto bad = bytes;
  bad[0] = 'X';
  EXPECT_THROW(decode_cmta(bad), FormatError);
  EXPECT_THROW(decode_cmta(std::span(bytes).first(bytes.size() - 1)), FormatError);
  auto extra = bytes;
  extra.push_back(0);
  EXPECT_THROW(decode_cmta(extra), FormatError);
  EXPECT_THROW(encode_cmta(DenseTensor{{2, 2}, {1.0f}}), FormatError);
}

TEST(Cmtq, RejectsCorruptHeaders) {
  const auto c = golden::cmtq_cases()[0];
  const auto good = encode_cmtq(c.tensor);
  auto mutate = [&](std::size_t at, std::uint8_t v) {
    auto b = good;
    b[at] = v;
    return b;
  };
  EXPECT_THROW(decode_cmtq(mutate(0, 'Z')), FormatError);        // magic
  EXPECT_THROW(decode_cmtq(mutate(4, 2)), FormatError);          // version
  EXPECT_THROW(decode_cmtq(mutate(15, 7)), FormatError);         // order
  EXPECT_THROW(decode_cmtq(mutate(16, 1)), FormatError);         // interleave without span
  EXPECT_THROW(decode_cmtq(mutate(19, 9)), FormatError);         // scheme
  EXPECT_THROW(decode_cmtq(mutate(20, 9)), FormatError);         // granularity
  EXPECT_THROW(decode_cmtq(mutate(25, 9)), FormatError);         // parameter count
  EXPECT_THROW(decode_cmtq(mutate(29, 8)), FormatError);         // bit width
  EXPECT_THROW(decode_cmtq(std::span(good).first(good.size() - 1)), FormatError);
  auto extra = good;
  extra.push_back(0);
  EXPECT_THROW(decode_cmtq(extra), FormatError);
  for (std::size_t n = 0; n < good.size(); ++n) {
    EXPECT_THROW(decode_cmtq(std::span(good).first(n)), FormatError) << n;
  }
}

TEST(Cmtq, EncoderValidatesTensor) {
  auto t = golden::cmtq_cases()[0].tensor;
  t.params.pop_back();
  EXPECT_THROW(encode_cmtq(t), FormatError);
  t = golden::cmtq_cases()[0].tensor;
  t.params[3].scheme = quant::Scheme::kAsymmetric;
  EXPECT_THROW(encode_cmtq(t), FormatError);
  t = golden::cmtq_cases()[0].tensor;
  t.dims = {4, 9};
  EXPECT_THROW(encode_cmtq(t), FormatError);
}

TEST(Cmtq, WeightsRoundTripWithAndWithoutInterleave) {
  Rng rng(2);
  const MatrixD w = oracle::gaussian(64, 10, rng);
  const auto qw = gemm::pack_weights(fmpq::quantize_weights_grouped(w, 32));
  for (layout::Interleave il : {layout::kNoInterleave, layout::Interleave{4, 16}}) {
    const CmtqTensor t = cmtq_from_weights(qw, il);
    const auto back = weights_from_cmtq(decode_cmtq(encode_cmtq(t)));
    EXPECT_EQ(back.N, qw.N);
    EXPECT_EQ(back.K, qw.K);
    EXPECT_EQ(back.packed, qw.packed);
    ASSERT_EQ(back.group_params.size(), qw.group_params.size());
    for (std::size_t i = 0; i < qw.group_params.size(); ++i) {
      EXPECT_EQ(back.group_params[i].scale, static_cast<double>(static_cast<float>(qw.group_params[i].scale)));
    }
  }
}

TEST(Json, CalibStatsRoundTrip) {
  Rng rng(3);
  const MatrixD x = oracle::gaussian(9, 6, rng);
  const auto s = quant::collect_calib_stats(std::span(&x, 1));
  const json j = calib_stats_to_json(s);
  EXPECT_EQ(j.begin().key(), "channels");
  EXPECT_EQ(calib_stats_from_json(json::parse(dump(j))), s);
  json bad = j;
  bad["min"][0] = 100.0;
  EXPECT_THROW(calib_stats_from_json(bad), FormatError);
  bad = j;
  bad.erase("max");
  EXPECT_THROW(calib_stats_from_json(bad), FormatError);
}

TEST(Json, PrecisionMapRoundTrip) {
  const auto a = synthetic_activations(64, 300, 4, 7);
  EXPECT_EQ(a.outlier_channels.size(), 4u);
  const auto stats = quant::collect_calib_stats(std::span(&a.values, 1));
  const auto report = fmpq::detect_outliers(stats);
  const auto map = fmpq::build_precision_map(stats, 8.0, 128);
  const json j = precision_map_to_json(map, &report);
  EXPECT_EQ(j["format"], "w4ax-precision-map");
  EXPECT_EQ(j["version"], 1);
  EXPECT_EQ(j["outliers"].size(), 4u);
  const auto back = precision_map_from_json(json::parse(dump(j)));
  EXPECT_EQ(back.permutation, map.permutation);
  EXPECT_EQ(back.block_bits, map.block_bits);
  EXPECT_EQ(back.k, map.k);
  EXPECT_EQ(back.theta, map.theta);
  for (std::size_t b = 0; b < map.num_blocks(); ++b) EXPECT_EQ(back.block_params[b], map.block_params[b]);

  json bad = j;
  bad["perm"][0] = bad["perm"][1];
  EXPECT_THROW(precision_map_from_json(bad), FormatError);
  bad = j;
  bad["block_bits"][0] = 6;
  EXPECT_THROW(precision_map_from_json(bad), FormatError);
  bad = j;
  bad["format"] = "other";
  EXPECT_THROW(precision_map_from_json(bad), FormatError);
}

TEST(Json, ManifestRoundTrip) {
  RunManifest m;
  m.command = "gemm";
  m.config = {{"m", 4}, {"check", true}};
  m.seed = 42;
  m.inputs = {"a.cmta"};
  m.outputs = {"b.cmtq"};
  m.tool_version = kToolVersion;
  const auto back = RunManifest::from_json(json::parse(dump(m.to_json())));
  EXPECT_EQ(back.command, m.command);
  EXPECT_EQ(back.config, m.config);
  EXPECT_EQ(back.seed, 42u);
  EXPECT_EQ(back.inputs, m.inputs);
  EXPECT_EQ(back.outputs, m.outputs);
  EXPECT_EQ(back.tool_version, "0.1.0");
  EXPECT_THROW(RunManifest::from_json(json::object()), FormatError);
}

}  // namespace
}  // namespace w4ax::io
