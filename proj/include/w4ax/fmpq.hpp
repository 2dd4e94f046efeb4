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

// Fine-grained mixed-precision quantization.
//
// Activation channels are split into blocks of k consecutive channels. A
// block holding at least one outlier channel is quantized to 8 bits, all
// others to 4 bits, with one symmetric scale per block. Outlier channels are
// first permuted to the front so they occupy as few blocks as possible; the
// same permutation is applied to the reduction axis of the weights, which
// leaves the GEMM product unchanged.

#pragma once

#include <cstdint>
#include <vector>

#include "w4ax/common.hpp"
#include "w4ax/quant_core.hpp"

namespace w4ax::fmpq {

inline constexpr double kDefaultTheta = 8.0;
inline constexpr std::size_t kDefaultBlockSize = 128;
inline constexpr std::size_t kDefaultGroupSize = 128;

struct OutlierReport {
  std::vector<double> channel_score;  // calibration maxabs per channel
  double theta = kDefaultTheta;
  double median_score = 0.0;
  std::vector<bool> outlier_flags;

  std::size_t outlier_count() const;
  std::vector<std::size_t> outlier_channels() const;
};

class ChannelPermutation {
 public:
  ChannelPermutation() = default;
  /// `perm[i]` is the original channel placed at position i. Throws
  /// InputError unless perm is a bijection on [0, n).
  explicit ChannelPermutation(std::vector<std::size_t> perm);

  static ChannelPermutation identity(std::size_t n);

  std::size_t size() const noexcept { return perm_.size(); }
  const std::vector<std::size_t>& perm() const noexcept { return perm_; }
  const std::vector<std::size_t>& inverse() const noexcept { return inverse_; }
  ChannelPermutation inverted() const { return ChannelPermutation(inverse_); }
  bool is_identity() const noexcept;

  bool operator==(const ChannelPermutation&) const = default;

 private:
  std::vector<std::size_t> perm_;
  std::vector<std::size_t> inverse_;
};

struct BlockPrecisionMap {
  std::size_t k = kDefaultBlockSize;
  double theta = kDefaultTheta;
  std::size_t num_channels = 0;
  std::vector<int> block_bits;                   // 4 or 8 per block
  std::vector<quant::QuantParams> block_params;  // symmetric, one per block
  ChannelPermutation permutation;

  std::size_t num_blocks() const noexcept { return block_bits.size(); }
  std::size_t eight_bit_blocks() const;
  double eight_bit_fraction() const;
  /// Block containing permuted position `channel`.
  std::size_t block_of(std::size_t channel) const noexcept { return channel / k; }
};

enum class Axis { kRows, kCols };

/// Flags channels whose calibration maxabs exceeds theta times the median
/// score (lower middle for even counts).
OutlierReport detect_outliers(const quant::CalibStats& stats, double theta = kDefaultTheta);

/// Outliers first (descending score, ties by ascending index), then the
/// remaining channels in their original order.
ChannelPermutation build_permutation(const OutlierReport& report,
                                     std::size_t k = kDefaultBlockSize);

/// Per-block bit widths and pooled symmetric parameters under `perm`.
BlockPrecisionMap assign_block_precision(const quant::CalibStats& stats,
                                         const ChannelPermutation& perm,
                                         const OutlierReport& report,
                                         std::size_t k = kDefaultBlockSize);

/// Detect, permute and assign in one step.
BlockPrecisionMap build_precision_map(const quant::CalibStats& stats,
                                      double theta = kDefaultTheta,
                                      std::size_t k = kDefaultBlockSize);

/// out[..., i, ...] = in[..., perm[i], ...] along `axis`.
template <typename T>
Matrix<T> permute_channels(const Matrix<T>& t, const ChannelPermutation& perm, Axis axis) {
  const std::size_t len = axis == Axis::kCols ? t.cols() : t.rows();
  if (len != perm.size()) {
    throw DimensionError("permutation of length " + std::to_string(perm.size()) +
                         " applied to axis of length " + std::to_string(len));
  }
  Matrix<T> out(t.rows(), t.cols());
  const auto& p = perm.perm();
  for (std::size_t r = 0; r < t.rows(); ++r) {
    for (std::size_t c = 0; c < t.cols(); ++c) {
      out(r, c) = axis == Axis::kCols ? t(r, p[c]) : t(p[r], c);
    }
  }
  return out;
}

/// Permutes the channels (columns) of `act` and quantizes each block at its
/// assigned width. Result layout is per-block.
quant::IntTensor quantize_activation_fmpq(const MatrixD& act, const BlockPrecisionMap& map);

/// Asymmetric INT4 parameters for every channel (column) of `stats`.
std::vector<quant::QuantParams> kv_channel_params(const quant::CalibStats& stats);

/// Channel-wise asymmetric INT4 quantization of a [tokens, head_dim] slice.
quant::IntTensor quantize_kv_cache(const MatrixD& kv, const std::vector<quant::QuantParams>& params);

/// Symmetric INT4 per (output channel, group of `group_size` reduction
/// elements). `w` is in GEMM orientation [K, N]; the result is stored output
/// channel major, shape [N, K]. The last group may be short.
quant::IntTensor quantize_weights_grouped(const MatrixD& w,
                                          std::size_t group_size = kDefaultGroupSize);

}  // namespace w4ax::fmpq
