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

// Integer quantization primitives: calibration statistics, scale and
// zero-point computation, and quantize/dequantize at tensor, channel, group
// and block granularity. Everything here is a pure function of its inputs.

#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "w4ax/common.hpp"

namespace w4ax::quant {

enum class Scheme : std::uint8_t { kSymmetric = 0, kAsymmetric = 1 };

enum class Granularity : std::uint8_t {
  kPerTensor = 0,
  kPerChannel = 1,  // one parameter set per column
  kPerGroup = 2,    // per (row, group of `size` consecutive columns)
  kPerBlock = 3,    // per block of `size` consecutive columns, shared by all rows
};

/// Running per-channel extremes. Channels are the columns of every absorbed
/// batch (rows are samples).
struct CalibStats {
  std::size_t num_channels = 0;
  std::vector<double> per_channel_min;
  std::vector<double> per_channel_max;
  std::vector<double> per_channel_maxabs;
  std::size_t sample_count = 0;

  /// Elementwise min/max merge of two partial statistics.
  CalibStats merged(const CalibStats& other) const;

  bool operator==(const CalibStats&) const = default;
};

struct QuantParams {
  double scale = 1.0;  // real units per integer step, always > 0
  std::int32_t zero_point = 0;
  int bit_width = 8;  // 4 or 8
  Scheme scheme = Scheme::kSymmetric;

  std::int32_t qmin() const noexcept;
  std::int32_t qmax() const noexcept;
  /// Stored byte = q - storage_offset(). 128 for asymmetric 8-bit, whose
  /// codes [0, 255] do not fit a signed byte, 0 otherwise.
  std::int32_t storage_offset() const noexcept {
    return scheme == Scheme::kAsymmetric && bit_width == 8 ? 128 : 0;
  }

  bool operator==(const QuantParams&) const = default;
};

/// Throws InputError if the invariants (scale > 0, bit width 4/8, symmetric
/// zero point 0, asymmetric zero point in range) do not hold.
void validate(const QuantParams& p);

struct QuantLayout {
  Granularity granularity = Granularity::kPerTensor;
  std::size_t size = 0;  // group or block length; unused otherwise

  bool operator==(const QuantLayout&) const = default;
};

/// Number of parameter sets a layout needs for a rows x cols matrix. Throws
/// InputError for a zero group or block size.
std::size_t param_count(const QuantLayout& layout, std::size_t rows, std::size_t cols);

/// Index of the parameter set governing element (r, c).
std::size_t param_index(const QuantLayout& layout, std::size_t cols, std::size_t r, std::size_t c);

/// Unpacked integer tensor, one value per byte, row-major rows x cols. Each
/// byte holds q - storage_offset() of its parameter set; at() undoes it.
struct IntTensor {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::int8_t> data;
  QuantLayout layout;
  std::vector<QuantParams> params;

  const QuantParams& params_at(std::size_t r, std::size_t c) const {
    return params[param_index(layout, cols, r, c)];
  }
  std::int32_t at(std::size_t r, std::size_t c) const {
    return data[r * cols + c] + params_at(r, c).storage_offset();
  }
};

/// Absorbs `batches` into `existing` (or fresh stats). Throws DimensionError
/// when channel counts disagree.
CalibStats collect_calib_stats(std::span<const MatrixD> batches,
                               const std::optional<CalibStats>& existing = std::nullopt);

/// Min-max parameters. Symmetric: scale = maxabs / qmax, zero point 0.
/// Asymmetric: the range is widened to include zero, scale = (max - min) /
/// (2^b - 1), zero point = round(-min / scale). When min == max == v the
/// constant v round-trips exactly (scale 1 for v = 0, |v| otherwise).
QuantParams compute_scale(double min, double max, int bit_width, Scheme scheme);

/// q = clamp(round_half_away(x / scale) + zero_point, qmin, qmax).
std::int32_t quantize_value(double x, const QuantParams& p);
double dequantize_value(std::int32_t q, const QuantParams& p) noexcept;

/// Quantizes a matrix with the given layout. Throws InputError for non-finite
/// values and DimensionError when the parameter count does not fit.
IntTensor quantize(const MatrixD& t, const QuantLayout& layout, std::vector<QuantParams> params);

/// Per-tensor convenience overload.
IntTensor quantize(const MatrixD& t, const QuantParams& params);

MatrixD dequantize(const IntTensor& q);

/// 10 log10(|x|^2 / |x - x_hat|^2); +inf when the reconstruction is exact.
double sqnr_db(std::span<const double> x, std::span<const double> x_hat);

}  // namespace w4ax::quant
