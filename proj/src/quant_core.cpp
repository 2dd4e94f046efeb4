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

#include "w4ax/quant_core.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "w4ax/kernels/kernels.hpp"

namespace w4ax::quant {

std::int32_t QuantParams::qmin() const noexcept {
  if (scheme == Scheme::kAsymmetric) return 0;
  // symmetric range is [-(2^(b-1) - 1), 2^(b-1) - 1]; -2^(b-1) is never produced
  return -((1 << (bit_width - 1)) - 1);
}

std::int32_t QuantParams::qmax() const noexcept {
  if (scheme == Scheme::kAsymmetric) return (1 << bit_width) - 1;
  return (1 << (bit_width - 1)) - 1;
}

void validate(const QuantParams& p) {
  if (p.bit_width != 4 && p.bit_width != 8) {
    throw InputError("bit width must be 4 or 8, got " + std::to_string(p.bit_width));
  }
  if (!(p.scale > 0.0) || !std::isfinite(p.scale)) {
    throw InputError("scale must be positive and finite");
  }
  if (p.scheme == Scheme::kSymmetric && p.zero_point != 0) {
    throw InputError("symmetric quantization requires zero point 0");
  }
  if (p.scheme == Scheme::kAsymmetric && (p.zero_point < p.qmin() || p.zero_point > p.qmax())) {
    throw InputError("zero point " + std::to_string(p.zero_point) + " outside [" +
                     std::to_string(p.qmin()) + ", " + std::to_string(p.qmax()) + "]");
  }
}

CalibStats CalibStats::merged(const CalibStats& other) const {
  if (num_channels == 0 && sample_count == 0) return other;
  if (other.num_channels == 0 && other.sample_count == 0) return *this;
  if (other.num_channels != num_channels) {
    throw DimensionError("cannot merge stats over " + std::to_string(num_channels) + " and " +
                         std::to_string(other.num_channels) + " channels");
  }
  CalibStats out = *this;
  for (std::size_t c = 0; c < num_channels; ++c) {
    out.per_channel_min[c] = std::min(per_channel_min[c], other.per_channel_min[c]);
    out.per_channel_max[c] = std::max(per_channel_max[c], other.per_channel_max[c]);
    out.per_channel_maxabs[c] = std::max(per_channel_maxabs[c], other.per_channel_maxabs[c]);
  }
  out.sample_count += other.sample_count;
  return out;
}

std::size_t param_count(const QuantLayout& layout, std::size_t rows, std::size_t cols) {
  if ((layout.granularity == Granularity::kPerGroup || layout.granularity == Granularity::kPerBlock) &&
      layout.size == 0) {
    throw InputError("group and block sizes must be positive");
  }
  switch (layout.granularity) {
    case Granularity::kPerTensor:
      return 1;
    case Granularity::kPerChannel:
      return cols;
    case Granularity::kPerGroup:
      return rows * ceil_div(cols, layout.size);
    case Granularity::kPerBlock:
      return ceil_div(cols, layout.size);
  }
  return 0;
}

std::size_t param_index(const QuantLayout& layout, std::size_t cols, std::size_t r, std::size_t c) {
  switch (layout.granularity) {
    case Granularity::kPerTensor:
      return 0;
    case Granularity::kPerChannel:
      return c;
    case Granularity::kPerGroup:
      return r * ceil_div(cols, layout.size) + c / layout.size;
    case Granularity::kPerBlock:
      return c / layout.size;
  }
  return 0;
}

CalibStats collect_calib_stats(std::span<const MatrixD> batches,
                               const std::optional<CalibStats>& existing) {
  CalibStats stats = existing.value_or(CalibStats{});
  for (const MatrixD& batch : batches) {
    if (batch.rows() == 0) continue;
    if (stats.sample_count == 0 && stats.num_channels == 0) {
      stats.num_channels = batch.cols();
      stats.per_channel_min.assign(batch.cols(), std::numeric_limits<double>::infinity());
      stats.per_channel_max.assign(batch.cols(), -std::numeric_limits<double>::infinity());
      stats.per_channel_maxabs.assign(batch.cols(), 0.0);
    }
    if (batch.cols() != stats.num_channels) {
      throw DimensionError("batch has " + std::to_string(batch.cols()) + " channels, expected " +
                           std::to_string(stats.num_channels));
    }
    for (std::size_t r = 0; r < batch.rows(); ++r) {
      const auto row = batch.row(r);
      for (std::size_t c = 0; c < row.size(); ++c) {
        const double v = row[c];
        if (!std::isfinite(v)) throw InputError("non-finite calibration sample");
        stats.per_channel_min[c] = std::min(stats.per_channel_min[c], v);
        stats.per_channel_max[c] = std::max(stats.per_channel_max[c], v);
      }
    }
    for (std::size_t c = 0; c < stats.num_channels; ++c) {
      stats.per_channel_maxabs[c] =
          std::max(std::abs(stats.per_channel_min[c]), std::abs(stats.per_channel_max[c]));
    }
    stats.sample_count += batch.rows();
  }
  return stats;
}

QuantParams compute_scale(double min, double max, int bit_width, Scheme scheme) {
  if (!std::isfinite(min) || !std::isfinite(max)) throw InputError("non-finite range");
  if (min > max) throw InputError("range minimum exceeds maximum");
  QuantParams p;
  p.bit_width = bit_width;
  p.scheme = scheme;
  if (bit_width != 4 && bit_width != 8) {
    throw InputError("bit width must be 4 or 8, got " + std::to_string(bit_width));
  }

  if (min == max) {
    // degenerate: one level represents the constant exactly
    p.scale = min == 0.0 ? 1.0 : std::abs(min);
    p.zero_point = (scheme == Scheme::kAsymmetric && min < 0.0) ? 1 : 0;
    return p;
  }

  if (scheme == Scheme::kSymmetric) {
    p.scale = std::max(std::abs(min), std::abs(max)) / p.qmax();
    p.zero_point = 0;
    return p;
  }

  const double lo = std::min(min, 0.0);
  const double hi = std::max(max, 0.0);
  p.scale = (hi - lo) / p.qmax();
  const double zp = std::round(-lo / p.scale);
  p.zero_point = static_cast<std::int32_t>(std::clamp(zp, 0.0, static_cast<double>(p.qmax())));
  return p;
}

std::int32_t quantize_value(double x, const QuantParams& p) {
  if (!std::isfinite(x)) throw InputError("non-finite value");
  const double q = std::round(x / p.scale) + p.zero_point;
  return static_cast<std::int32_t>(
      std::clamp(q, static_cast<double>(p.qmin()), static_cast<double>(p.qmax())));
}

double dequantize_value(std::int32_t q, const QuantParams& p) noexcept {
  return static_cast<double>(q - p.zero_point) * p.scale;
}

IntTensor quantize(const MatrixD& t, const QuantLayout& layout, std::vector<QuantParams> params) {
  if ((layout.granularity == Granularity::kPerGroup ||
       layout.granularity == Granularity::kPerBlock) &&
      layout.size == 0) {
    throw InputError("group/block size must be positive");
  }
  const std::size_t expected = param_count(layout, t.rows(), t.cols());
  if (params.size() != expected) {
    throw DimensionError("layout needs " + std::to_string(expected) + " parameter sets, got " +
                         std::to_string(params.size()));
  }
  for (const QuantParams& p : params) validate(p);
  for (double v : t.data()) {
    if (!std::isfinite(v)) throw InputError("non-finite value in tensor");
  }

  IntTensor out;
  out.rows = t.rows();
  out.cols = t.cols();
  out.data.resize(t.size());
  out.layout = layout;
  out.params = std::move(params);

  const auto& k = kernels::active();
  for (std::size_t r = 0; r < t.rows(); ++r) {
    const double* row = t.row(r).data();
    std::int8_t* dst = out.data.data() + r * t.cols();
    std::size_t c = 0;
    while (c < t.cols()) {
      std::size_t end = t.cols();
      if (layout.granularity == Granularity::kPerChannel) {
        end = c + 1;
      } else if (layout.granularity != Granularity::kPerTensor) {
        end = std::min(t.cols(), (c / layout.size + 1) * layout.size);
      }
      const QuantParams& p = out.params[param_index(layout, t.cols(), r, c)];
      const std::int32_t off = p.storage_offset();
      k.quantize_f64(row + c, end - c, p.scale, p.zero_point - off, p.qmin() - off, p.qmax() - off,
                     dst + c);
      c = end;
    }
  }
  return out;
}

IntTensor quantize(const MatrixD& t, const QuantParams& params) {
  return quantize(t, QuantLayout{}, {params});
}

MatrixD dequantize(const IntTensor& q) {
  MatrixD out(q.rows, q.cols);
  for (std::size_t r = 0; r < q.rows; ++r) {
    for (std::size_t c = 0; c < q.cols; ++c) {
      out(r, c) = dequantize_value(q.at(r, c), q.params_at(r, c));
    }
  }
  return out;
}

double sqnr_db(std::span<const double> x, std::span<const double> x_hat) {
  if (x.size() != x_hat.size()) throw DimensionError("sqnr operands differ in length");
  double signal = 0.0;
  double noise = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    signal += x[i] * x[i];
    const double d = x[i] - x_hat[i];
    noise += d * d;
  }
  if (noise == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(signal / noise);
}

}  // namespace w4ax::quant
