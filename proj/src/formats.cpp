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

#include "w4ax/formats.hpp"

#include <bit>
#include <cmath>
#include <fstream>
#include <iterator>
#include <limits>

#include "w4ax/model_runtime.hpp"

namespace w4ax::io {

using quant::Granularity;
using quant::QuantParams;
using quant::Scheme;

namespace {

class Writer {
 public:
  void u8(std::uint8_t v) { out_.push_back(v); }
  void u16(std::uint16_t v) { put(v, 2); }
  void u32(std::uint32_t v) { put(v, 4); }
  void u64(std::uint64_t v) { put(v, 8); }
  void i32(std::int32_t v) { put(static_cast<std::uint32_t>(v), 4); }
  void f32(float v) { put(std::bit_cast<std::uint32_t>(v), 4); }
  void raw(std::span<const std::uint8_t> b) { out_.insert(out_.end(), b.begin(), b.end()); }
  void magic(const char (&m)[5]) {
    for (int i = 0; i < 4; ++i) u8(static_cast<std::uint8_t>(m[i]));
  }
  std::vector<std::uint8_t> take() { return std::move(out_); }

 private:
  void put(std::uint64_t v, int n) {
    for (int i = 0; i < n; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  std::vector<std::uint8_t> out_;
};

class Reader {
 public:
  Reader(std::span<const std::uint8_t> b, const char* what) : b_(b), what_(what) {}

  std::uint8_t u8() { return static_cast<std::uint8_t>(get(1)); }
  std::uint16_t u16() { return static_cast<std::uint16_t>(get(2)); }
  std::uint32_t u32() { return static_cast<std::uint32_t>(get(4)); }
  std::uint64_t u64() { return get(8); }
  std::int32_t i32() { return static_cast<std::int32_t>(u32()); }
  float f32() { return std::bit_cast<float>(u32()); }
  std::span<const std::uint8_t> raw(std::uint64_t n) {
    need(n);
    auto s = b_.subspan(pos_, static_cast<std::size_t>(n));
    pos_ += static_cast<std::size_t>(n);
    return s;
  }
  void magic(const char (&m)[5]) {
    for (int i = 0; i < 4; ++i) {
      if (u8() != static_cast<std::uint8_t>(m[i])) {
        throw FormatError(std::string(what_) + ": bad magic");
      }
    }
  }
  void finish() const {
    if (pos_ != b_.size()) {
      throw FormatError(std::string(what_) + ": " + std::to_string(b_.size() - pos_) +
                        " trailing bytes");
    }
  }
  std::size_t remaining() const noexcept { return b_.size() - pos_; }

 private:
  void need(std::uint64_t n) const {
    if (n > b_.size() - pos_) throw FormatError(std::string(what_) + ": truncated");
  }
  std::uint64_t get(int n) {
    need(static_cast<std::uint64_t>(n));
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(b_[pos_ + i]) << (8 * i);
    pos_ += static_cast<std::size_t>(n);
    return v;
  }

  std::span<const std::uint8_t> b_;
  const char* what_;
  std::size_t pos_ = 0;
};

std::size_t product(const std::vector<std::uint32_t>& dims) {
  std::size_t n = 1;
  for (std::uint32_t d : dims) {
    if (d != 0 && n > std::numeric_limits<std::size_t>::max() / d) {
      throw FormatError("tensor dims overflow");
    }
    n *= d;
  }
  return n;
}

std::vector<std::uint32_t> read_dims(Reader& r) {
  const std::uint8_t rank = r.u8();
  if (rank == 0) throw FormatError("tensor rank must be at least 1");
  std::vector<std::uint32_t> dims(rank);
  for (auto& d : dims) d = r.u32();
  return dims;
}

template <typename T>
std::vector<T> json_array(const json& j, const char* key) {
  if (!j.contains(key) || !j.at(key).is_array()) {
    throw FormatError(std::string("missing array field \"") + key + "\"");
  }
  try {
    return j.at(key).get<std::vector<T>>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("field \"") + key + "\": " + e.what());
  }
}

template <typename T>
T json_value(const json& j, const char* key) {
  if (!j.contains(key)) throw FormatError(std::string("missing field \"") + key + "\"");
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("field \"") + key + "\": " + e.what());
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// CMTA

std::size_t DenseTensor::element_count() const noexcept {
  std::size_t n = 1;
  for (std::uint32_t d : dims) n *= d;
  return dims.empty() ? 0 : n;
}

std::vector<std::uint8_t> encode_cmta(const DenseTensor& t) {
  if (t.dims.empty() || t.dims.size() > 255) throw FormatError("CMTA rank must be in [1, 255]");
  if (product(t.dims) != t.data.size()) throw FormatError("CMTA payload does not match dims");
  Writer w;
  w.magic("CMTA");
  w.u8(static_cast<std::uint8_t>(t.dims.size()));
  for (std::uint32_t d : t.dims) w.u32(d);
  for (float v : t.data) w.f32(v);
  return w.take();
}

DenseTensor decode_cmta(std::span<const std::uint8_t> bytes) {
  Reader r(bytes, "CMTA");
  r.magic("CMTA");
  DenseTensor t;
  t.dims = read_dims(r);
  const std::size_t n = product(t.dims);
  if (r.remaining() / 4 < n) throw FormatError("CMTA: truncated");
  t.data.resize(n);
  for (float& v : t.data) v = r.f32();
  r.finish();
  return t;
}

MatrixD to_matrix(const DenseTensor& t) {
  if (t.dims.empty()) throw DimensionError("rank-0 tensor has no matrix view");
  const std::size_t cols = t.dims.back();
  const std::size_t rows = cols == 0 ? 0 : t.data.size() / cols;
  MatrixD m(rows, cols);
  for (std::size_t i = 0; i < t.data.size(); ++i) m.data()[i] = static_cast<double>(t.data[i]);
  return m;
}

DenseTensor from_matrix(const MatrixD& m) {
  DenseTensor t;
  t.dims = {static_cast<std::uint32_t>(m.rows()), static_cast<std::uint32_t>(m.cols())};
  t.data.reserve(m.size());
  for (double v : m.data()) t.data.push_back(static_cast<float>(v));
  return t;
}

// ---------------------------------------------------------------------------
// CMTQ

std::size_t CmtqTensor::cols() const noexcept { return dims.empty() ? 0 : dims.back(); }

std::size_t CmtqTensor::rows() const noexcept {
  if (dims.empty()) return 0;
  std::size_t n = 1;
  for (std::size_t i = 0; i + 1 < dims.size(); ++i) n *= dims[i];
  return n;
}

namespace {

void check_cmtq(const CmtqTensor& t) {
  if (t.dims.empty() || t.dims.size() > 255) throw FormatError("CMTQ rank must be in [1, 255]");
  if (product(t.dims) != t.payload.num_elements()) {
    throw FormatError("CMTQ payload holds " + std::to_string(t.payload.num_elements()) +
                      " elements, dims need " + std::to_string(product(t.dims)));
  }
  std::size_t expected = 0;
  try {
    expected = quant::param_count(t.layout, t.rows(), t.cols());
  } catch (const Error& e) {
    throw FormatError(std::string("CMTQ layout: ") + e.what());
  }
  if (t.params.size() != expected) {
    throw FormatError("CMTQ has " + std::to_string(t.params.size()) + " parameter sets, layout needs " +
                      std::to_string(expected));
  }
  if (t.params.empty()) throw FormatError("CMTQ needs at least one parameter set");
  const Scheme scheme = t.params.front().scheme;
  for (const QuantParams& p : t.params) {
    if (p.bit_width != 4) throw FormatError("CMTQ holds 4-bit tensors only");
    if (p.scheme != scheme) throw FormatError("CMTQ parameters mix schemes");
    const float s = static_cast<float>(p.scale);
    if (!std::isfinite(s) || !(s > 0.0f)) throw FormatError("CMTQ scale must be positive and finite");
    try {
      quant::validate(p);
    } catch (const Error& e) {
      throw FormatError(std::string("CMTQ parameters: ") + e.what());
    }
  }
  const auto& il = t.payload.interleave();
  if (il.fragment > 255 || il.span > 255) throw FormatError("CMTQ interleave does not fit a byte");
}

}  // namespace

std::vector<std::uint8_t> encode_cmtq(const CmtqTensor& t) {
  check_cmtq(t);
  Writer w;
  w.magic("CMTQ");
  w.u16(kCmtqVersion);
  w.u8(static_cast<std::uint8_t>(t.dims.size()));
  for (std::uint32_t d : t.dims) w.u32(d);
  w.u8(static_cast<std::uint8_t>(t.payload.order()));
  const auto& il = t.payload.interleave();
  w.u8(il.enabled() ? 1 : 0);
  w.u8(static_cast<std::uint8_t>(il.fragment));
  w.u8(static_cast<std::uint8_t>(il.span));

  w.u8(static_cast<std::uint8_t>(t.params.front().scheme));
  w.u8(static_cast<std::uint8_t>(t.layout.granularity));
  w.u32(static_cast<std::uint32_t>(t.layout.size));
  w.u32(static_cast<std::uint32_t>(t.params.size()));
  for (const auto& p : t.params) w.u8(static_cast<std::uint8_t>(p.bit_width));
  for (const auto& p : t.params) w.f32(static_cast<float>(p.scale));
  for (const auto& p : t.params) w.i32(p.zero_point);

  w.u64(t.payload.bytes().size());
  w.raw(t.payload.bytes());
  return w.take();
}

CmtqTensor decode_cmtq(std::span<const std::uint8_t> bytes) {
  Reader r(bytes, "CMTQ");
  r.magic("CMTQ");
  const std::uint16_t version = r.u16();
  if (version != kCmtqVersion) {
    throw FormatError("CMTQ version " + std::to_string(version) + " is not supported");
  }
  CmtqTensor t;
  t.dims = read_dims(r);
  const std::uint8_t order = r.u8();
  if (order > 1) throw FormatError("CMTQ nibble order must be 0 or 1");
  const std::uint8_t il_flag = r.u8();
  const std::uint8_t frag = r.u8();
  const std::uint8_t span = r.u8();
  if (il_flag > 1) throw FormatError("CMTQ interleave flag must be 0 or 1");
  layout::Interleave il;
  if (il_flag == 1) {
    if (frag == 0 || span == 0 || span % (2 * frag) != 0) {
      throw FormatError("CMTQ interleave span must be a positive multiple of 2 * fragment");
    }
    if (t.dims.back() % span != 0) throw FormatError("CMTQ rows are not whole interleave spans");
    il = {frag, span};
  } else if (frag != 0 || span != 0) {
    throw FormatError("CMTQ interleave parameters set while interleave is off");
  }

  const std::uint8_t scheme = r.u8();
  const std::uint8_t gran = r.u8();
  if (scheme > 1) throw FormatError("CMTQ scheme must be 0 or 1");
  if (gran > 3) throw FormatError("CMTQ granularity must be in [0, 3]");
  t.layout = {static_cast<Granularity>(gran), r.u32()};
  const std::uint32_t count = r.u32();
  if (r.remaining() / 9 < count) throw FormatError("CMTQ: truncated");
  t.params.resize(count);
  for (auto& p : t.params) {
    p.bit_width = r.u8();
    p.scheme = static_cast<Scheme>(scheme);
  }
  for (auto& p : t.params) p.scale = static_cast<double>(r.f32());
  for (auto& p : t.params) p.zero_point = r.i32();

  const std::uint64_t len = r.u64();
  const auto payload = r.raw(len);
  r.finish();
  try {
    t.payload = layout::PackedNibbleBuffer(std::vector<std::uint8_t>(payload.begin(), payload.end()),
                                           product(t.dims), static_cast<layout::NibbleOrder>(order),
                                           il);
  } catch (const Error& e) {
    throw FormatError(std::string("CMTQ payload: ") + e.what());
  }
  check_cmtq(t);
  return t;
}

CmtqTensor cmtq_from_weights(const gemm::QuantizedWeights& w, layout::Interleave interleave) {
  CmtqTensor t;
  t.dims = {static_cast<std::uint32_t>(w.N), static_cast<std::uint32_t>(w.K)};
  t.layout = {Granularity::kPerGroup, w.group_size};
  t.params = w.group_params;
  if (interleave.enabled()) {
    const auto values = layout::unpack_nibbles(w.packed);
    t.payload = layout::interleave_weights(values, w.K, interleave.fragment, interleave.span,
                                           layout::NibbleOrder::kSwapped);
  } else {
    t.payload = w.packed;
  }
  return t;
}

gemm::QuantizedWeights weights_from_cmtq(const CmtqTensor& t) {
  if (t.dims.size() != 2) throw FormatError("weights must be a rank-2 CMTQ tensor");
  if (t.layout.granularity != Granularity::kPerGroup) {
    throw FormatError("weights must use per-group parameters");
  }
  gemm::QuantizedWeights w;
  w.N = t.dims[0];
  w.K = t.dims[1];
  w.group_size = t.layout.size;
  w.group_params = t.params;
  if (t.payload.interleave().enabled() || t.payload.order() != layout::NibbleOrder::kSwapped) {
    w.packed = layout::pack_nibbles(layout::unpack_nibbles(t.payload), layout::NibbleOrder::kSwapped);
  } else {
    w.packed = t.payload;
  }
  return w;
}

// ---------------------------------------------------------------------------
// Files

std::vector<std::uint8_t> read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw InputError("cannot open " + p.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::filesystem::path& p, std::span<const std::uint8_t> bytes) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw InputError("cannot write " + p.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw InputError("write failed for " + p.string());
}

void write_text(const std::filesystem::path& p, const std::string& text) {
  write_file(p, {reinterpret_cast<const std::uint8_t*>(text.data()), text.size()});
}

// ---------------------------------------------------------------------------
// JSON

std::string dump(const json& j) { return j.dump(2) + "\n"; }

json calib_stats_to_json(const quant::CalibStats& s) {
  json j;
  j["channels"] = s.num_channels;
  j["min"] = s.per_channel_min;
  j["max"] = s.per_channel_max;
  j["samples"] = s.sample_count;
  return j;
}

quant::CalibStats calib_stats_from_json(const json& j) {
  quant::CalibStats s;
  s.num_channels = json_value<std::size_t>(j, "channels");
  s.per_channel_min = json_array<double>(j, "min");
  s.per_channel_max = json_array<double>(j, "max");
  s.sample_count = json_value<std::size_t>(j, "samples");
  if (s.per_channel_min.size() != s.num_channels || s.per_channel_max.size() != s.num_channels) {
    throw FormatError("calibration stats arrays must have \"channels\" entries");
  }
  s.per_channel_maxabs.resize(s.num_channels);
  for (std::size_t c = 0; c < s.num_channels; ++c) {
    if (s.per_channel_min[c] > s.per_channel_max[c]) {
      throw FormatError("calibration stats have min > max at channel " + std::to_string(c));
    }
    s.per_channel_maxabs[c] = std::max(std::abs(s.per_channel_min[c]), std::abs(s.per_channel_max[c]));
  }
  return s;
}

json precision_map_to_json(const fmpq::BlockPrecisionMap& map, const fmpq::OutlierReport* report) {
  json j;
  j["format"] = "w4ax-precision-map";
  j["version"] = 1;
  j["channels"] = map.num_channels;
  j["k"] = map.k;
  j["theta"] = map.theta;
  j["perm"] = map.permutation.perm();
  j["block_bits"] = map.block_bits;
  std::vector<double> scales;
  std::vector<std::int32_t> zps;
  for (const auto& p : map.block_params) {
    scales.push_back(p.scale);
    zps.push_back(p.zero_point);
  }
  j["scales"] = scales;
  j["zero_points"] = zps;
  if (report) j["outliers"] = report->outlier_channels();
  return j;
}

fmpq::BlockPrecisionMap precision_map_from_json(const json& j) {
  if (json_value<std::string>(j, "format") != "w4ax-precision-map") {
    throw FormatError("not a precision map");
  }
  if (json_value<int>(j, "version") != 1) throw FormatError("unsupported precision map version");
  fmpq::BlockPrecisionMap m;
  m.num_channels = json_value<std::size_t>(j, "channels");
  m.k = json_value<std::size_t>(j, "k");
  m.theta = json_value<double>(j, "theta");
  if (m.k == 0) throw FormatError("block size must be positive");
  try {
    m.permutation = fmpq::ChannelPermutation(json_array<std::size_t>(j, "perm"));
  } catch (const InputError& e) {
    throw FormatError(std::string("perm: ") + e.what());
  }
  if (m.permutation.size() != m.num_channels) throw FormatError("perm length differs from channels");
  m.block_bits = json_array<int>(j, "block_bits");
  const auto scales = json_array<double>(j, "scales");
  const auto zps = json_array<std::int32_t>(j, "zero_points");
  const std::size_t blocks = ceil_div(m.num_channels, m.k);
  if (m.block_bits.size() != blocks || scales.size() != blocks || zps.size() != blocks) {
    throw FormatError("precision map needs " + std::to_string(blocks) + " blocks");
  }
  for (std::size_t b = 0; b < blocks; ++b) {
    if (m.block_bits[b] != 4 && m.block_bits[b] != 8) throw FormatError("block bits must be 4 or 8");
    QuantParams p{scales[b], zps[b], m.block_bits[b], Scheme::kSymmetric};
    try {
      quant::validate(p);
    } catch (const Error& e) {
      throw FormatError(std::string("block parameters: ") + e.what());
    }
    m.block_params.push_back(p);
  }
  return m;
}

json RunManifest::to_json() const {
  json j;
  j["command"] = command;
  j["config"] = config;
  j["seed"] = seed;
  j["inputs"] = inputs;
  j["outputs"] = outputs;
  j["tool_version"] = tool_version;
  return j;
}

RunManifest RunManifest::from_json(const json& j) {
  RunManifest m;
  m.command = json_value<std::string>(j, "command");
  m.config = j.contains("config") ? j.at("config") : json::object();
  m.seed = json_value<std::uint64_t>(j, "seed");
  m.inputs = j.contains("inputs") ? json_array<std::string>(j, "inputs") : std::vector<std::string>{};
  m.outputs =
      j.contains("outputs") ? json_array<std::string>(j, "outputs") : std::vector<std::string>{};
  m.tool_version = j.value("tool_version", std::string{});
  return m;
}

SyntheticActivations synthetic_activations(std::size_t rows, std::size_t channels,
                                           std::size_t num_outliers, std::uint64_t seed,
                                           double outlier_scale) {
  SyntheticActivations s;
  s.outlier_channels = model::default_outlier_channels(channels, seed ^ 0x9e3779b97f4a7c15ULL,
                                                       num_outliers);
  s.values = model::synthetic_tokens(1, rows, channels, seed, s.outlier_channels, outlier_scale).x;
  return s;
}

}  // namespace w4ax::io
