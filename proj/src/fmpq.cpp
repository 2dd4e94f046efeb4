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

#include "w4ax/fmpq.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace w4ax::fmpq {

using quant::CalibStats;
using quant::QuantParams;
using quant::Scheme;

std::size_t OutlierReport::outlier_count() const {
  return static_cast<std::size_t>(std::count(outlier_flags.begin(), outlier_flags.end(), true));
}

std::vector<std::size_t> OutlierReport::outlier_channels() const {
  std::vector<std::size_t> out;
  for (std::size_t c = 0; c < outlier_flags.size(); ++c) {
    if (outlier_flags[c]) out.push_back(c);
  }
  return out;
}

ChannelPermutation::ChannelPermutation(std::vector<std::size_t> perm)
    : perm_(std::move(perm)), inverse_(perm_.size(), std::numeric_limits<std::size_t>::max()) {
  for (std::size_t i = 0; i < perm_.size(); ++i) {
    const std::size_t src = perm_[i];
    if (src >= perm_.size() || inverse_[src] != std::numeric_limits<std::size_t>::max()) {
      throw InputError("channel permutation is not a bijection (entry " + std::to_string(i) + ")");
    }
    inverse_[src] = i;
  }
}

ChannelPermutation ChannelPermutation::identity(std::size_t n) {
  std::vector<std::size_t> p(n);
  std::iota(p.begin(), p.end(), std::size_t{0});
  return ChannelPermutation(std::move(p));
}

bool ChannelPermutation::is_identity() const noexcept {
  for (std::size_t i = 0; i < perm_.size(); ++i) {
    if (perm_[i] != i) return false;
  }
  return true;
}

std::size_t BlockPrecisionMap::eight_bit_blocks() const {
  return static_cast<std::size_t>(std::count(block_bits.begin(), block_bits.end(), 8));
}

double BlockPrecisionMap::eight_bit_fraction() const {
  if (block_bits.empty()) return 0.0;
  return static_cast<double>(eight_bit_blocks()) / static_cast<double>(block_bits.size());
}

OutlierReport detect_outliers(const CalibStats& stats, double theta) {
  if (stats.num_channels == 0) throw InputError("outlier detection needs at least one channel");
  if (!(theta > 1.0)) throw InputError("outlier threshold factor must exceed 1");

  OutlierReport report;
  report.theta = theta;
  report.channel_score = stats.per_channel_maxabs;

  std::vector<double> sorted = report.channel_score;
  const std::size_t mid = (sorted.size() - 1) / 2;
  std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(mid), sorted.end());
  report.median_score = sorted[mid];

  const double threshold = theta * report.median_score;
  report.outlier_flags.resize(report.channel_score.size());
  for (std::size_t c = 0; c < report.channel_score.size(); ++c) {
    report.outlier_flags[c] = report.channel_score[c] > threshold;
  }
  return report;
}

ChannelPermutation build_permutation(const OutlierReport& report, std::size_t k) {
  if (k == 0) throw InputError("block size must be positive");
  std::vector<std::size_t> outliers = report.outlier_channels();
  std::stable_sort(outliers.begin(), outliers.end(), [&](std::size_t a, std::size_t b) {
    return report.channel_score[a] > report.channel_score[b];
  });
  std::vector<std::size_t> perm = std::move(outliers);
  perm.reserve(report.outlier_flags.size());
  for (std::size_t c = 0; c < report.outlier_flags.size(); ++c) {
    if (!report.outlier_flags[c]) perm.push_back(c);
  }
  return ChannelPermutation(std::move(perm));
}

BlockPrecisionMap assign_block_precision(const CalibStats& stats, const ChannelPermutation& perm,
                                         const OutlierReport& report, std::size_t k) {
  if (k == 0) throw InputError("block size must be positive");
  const std::size_t C = stats.num_channels;
  if (perm.size() != C || report.outlier_flags.size() != C) {
    throw DimensionError("stats, permutation and outlier report disagree on channel count");
  }
  BlockPrecisionMap map;
  map.k = k;
  map.theta = report.theta;
  map.num_channels = C;
  map.permutation = perm;
  const std::size_t blocks = ceil_div(C, k);
  map.block_bits.reserve(blocks);
  map.block_params.reserve(blocks);
  for (std::size_t b = 0; b < blocks; ++b) {
    bool has_outlier = false;
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    for (std::size_t i = b * k; i < std::min(C, (b + 1) * k); ++i) {
      const std::size_t src = perm.perm()[i];
      has_outlier = has_outlier || report.outlier_flags[src];
      lo = std::min(lo, stats.per_channel_min[src]);
      hi = std::max(hi, stats.per_channel_max[src]);
    }
    const int bits = has_outlier ? 8 : 4;
    map.block_bits.push_back(bits);
    map.block_params.push_back(quant::compute_scale(lo, hi, bits, Scheme::kSymmetric));
  }
  return map;
}

BlockPrecisionMap build_precision_map(const CalibStats& stats, double theta, std::size_t k) {
  const OutlierReport report = detect_outliers(stats, theta);
  return assign_block_precision(stats, build_permutation(report, k), report, k);
}

quant::IntTensor quantize_activation_fmpq(const MatrixD& act, const BlockPrecisionMap& map) {
  if (act.cols() != map.num_channels) {
    throw DimensionError("activation has " + std::to_string(act.cols()) +
                         " channels, precision map covers " + std::to_string(map.num_channels));
  }
  const MatrixD permuted = permute_channels(act, map.permutation, Axis::kCols);
  return quant::quantize(permuted, {quant::Granularity::kPerBlock, map.k}, map.block_params);
}

std::vector<QuantParams> kv_channel_params(const CalibStats& stats) {
  std::vector<QuantParams> params;
  params.reserve(stats.num_channels);
  for (std::size_t c = 0; c < stats.num_channels; ++c) {
    params.push_back(quant::compute_scale(stats.per_channel_min[c], stats.per_channel_max[c], 4,
                                          Scheme::kAsymmetric));
  }
  return params;
}

quant::IntTensor quantize_kv_cache(const MatrixD& kv, const std::vector<QuantParams>& params) {
  for (const QuantParams& p : params) {
    if (p.bit_width != 4 || p.scheme != Scheme::kAsymmetric) {
      throw InputError("KV cache parameters must be asymmetric INT4");
    }
  }
  return quant::quantize(kv, {quant::Granularity::kPerChannel, 0}, params);
}

quant::IntTensor quantize_weights_grouped(const MatrixD& w, std::size_t group_size) {
  if (group_size == 0) throw InputError("group size must be positive");
  const std::size_t K = w.rows();
  const std::size_t N = w.cols();
  MatrixD wt(N, K);
  for (std::size_t k = 0; k < K; ++k) {
    for (std::size_t n = 0; n < N; ++n) wt(n, k) = w(k, n);
  }
  const std::size_t groups = ceil_div(K, group_size);
  std::vector<QuantParams> params;
  params.reserve(N * groups);
  for (std::size_t n = 0; n < N; ++n) {
    for (std::size_t g = 0; g < groups; ++g) {
      double lo = std::numeric_limits<double>::infinity();
      double hi = -std::numeric_limits<double>::infinity();
      for (std::size_t k = g * group_size; k < std::min(K, (g + 1) * group_size); ++k) {
        if (!std::isfinite(wt(n, k))) throw InputError("non-finite weight");
        lo = std::min(lo, wt(n, k));
        hi = std::max(hi, wt(n, k));
      }
      params.push_back(quant::compute_scale(lo, hi, 4, Scheme::kSymmetric));
    }
  }
  return quant::quantize(wt, {quant::Granularity::kPerGroup, group_size}, std::move(params));
}

}  // namespace w4ax::fmpq
