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

// On-disk formats. All binary fields are little-endian regardless of host.
//
// CMTA, raw f32 tensor:
//   "CMTA" | rank u8 | dims u32[rank] | f32[prod(dims)]
//
// CMTQ, packed 4-bit tensor (version 1):
//   "CMTQ" | version u16 | rank u8 | dims u32[rank]
//   | nibble_order u8 | interleave u8 | fragment u8 | span u8
//   | scheme u8 | granularity u8 | group_size u32 | count u32
//   | bit_widths u8[count] | scales f32[count] | zero_points i32[count]
//   | payload_len u64 | payload u8[payload_len]
// The last dim is the packed (reduction) axis; earlier dims are flattened
// into rows for the parameter layout.
//
// Calibration statistics and precision maps are JSON, see docs/formats.md.

#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "w4ax/common.hpp"
#include "w4ax/fmpq.hpp"
#include "w4ax/mp_gemm.hpp"
#include "w4ax/packed_layout.hpp"
#include "w4ax/quant_core.hpp"

namespace w4ax::io {

using json = nlohmann::ordered_json;

inline constexpr std::uint16_t kCmtqVersion = 1;
inline constexpr const char* kToolVersion = "0.1.0";

struct DenseTensor {
  std::vector<std::uint32_t> dims;
  std::vector<float> data;

  std::size_t element_count() const noexcept;
  bool operator==(const DenseTensor&) const = default;
};

std::vector<std::uint8_t> encode_cmta(const DenseTensor& t);
/// Throws FormatError on a bad magic, truncation, trailing bytes or a
/// payload that does not match the dims.
DenseTensor decode_cmta(std::span<const std::uint8_t> bytes);

/// Rank-2 tensors map directly, rank 1 becomes one row and higher ranks
/// flatten the leading dims into rows. Throws DimensionError for rank 0.
MatrixD to_matrix(const DenseTensor& t);
DenseTensor from_matrix(const MatrixD& m);

struct CmtqTensor {
  std::vector<std::uint32_t> dims;
  layout::PackedNibbleBuffer payload;
  quant::QuantLayout layout;
  std::vector<quant::QuantParams> params;

  std::size_t rows() const noexcept;
  std::size_t cols() const noexcept;
  bool operator==(const CmtqTensor&) const = default;
};

/// Throws FormatError when the params are not all 4-bit of one scheme, a
/// scale is not a positive finite f32, or counts disagree with the dims.
std::vector<std::uint8_t> encode_cmtq(const CmtqTensor& t);
CmtqTensor decode_cmtq(std::span<const std::uint8_t> bytes);

/// Weights as [N, K] per-group CMTQ, optionally re-laid-out with the
/// fragment interleave.
CmtqTensor cmtq_from_weights(const gemm::QuantizedWeights& w,
                             layout::Interleave interleave = layout::kNoInterleave);
/// Inverse of cmtq_from_weights; an interleaved payload is converted back to
/// the plain swapped layout the GEMM consumes.
gemm::QuantizedWeights weights_from_cmtq(const CmtqTensor& t);

std::vector<std::uint8_t> read_file(const std::filesystem::path& p);
void write_file(const std::filesystem::path& p, std::span<const std::uint8_t> bytes);
void write_text(const std::filesystem::path& p, const std::string& text);

json calib_stats_to_json(const quant::CalibStats& s);
/// Throws FormatError on missing fields or inconsistent lengths.
quant::CalibStats calib_stats_from_json(const json& j);

json precision_map_to_json(const fmpq::BlockPrecisionMap& map,
                           const fmpq::OutlierReport* report = nullptr);
fmpq::BlockPrecisionMap precision_map_from_json(const json& j);

/// Stable text rendering (two-space indent, trailing newline).
std::string dump(const json& j);

struct RunManifest {
  std::string command;
  json config = json::object();
  std::uint64_t seed = 0;
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;
  std::string tool_version;

  json to_json() const;
  static RunManifest from_json(const json& j);
};

/// Seeded N(0, 1) activations [rows, channels] with `num_outliers` planted
/// channels of magnitude outlier_scale * [1, 2).
struct SyntheticActivations {
  MatrixD values;
  std::vector<std::size_t> outlier_channels;
};
SyntheticActivations synthetic_activations(std::size_t rows, std::size_t channels,
                                           std::size_t num_outliers, std::uint64_t seed,
                                           double outlier_scale = 40.0);

}  // namespace w4ax::io
