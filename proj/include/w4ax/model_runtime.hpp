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

// Toy decoder-only transformer running on the quantized engine.
//
// Each layer is pre-norm: x += Wo * attn(RMSNorm(x) * Wqkv), then
// x += W2 * silu(RMSNorm(x) * W1). Every linear layer goes through
// gemm::mixed_gemm with a static precision map from calibration. K and V are
// stored as channel-wise asymmetric INT4 with parameters frozen at
// calibration; attention itself runs in double on the dequantized cache.
// There is no embedding or vocabulary projection: the logits are the final
// hidden states.
//
// Prefill appends each token's K/V and then attends over the cache through
// the same per-token code path that generate_step uses, so prefill(L + T)
// and prefill(L) followed by T steps produce bit-identical caches.

#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "w4ax/common.hpp"
#include "w4ax/fmpq.hpp"
#include "w4ax/mp_gemm.hpp"
#include "w4ax/packed_layout.hpp"
#include "w4ax/quant_core.hpp"

namespace w4ax::model {

struct ModelConfig {
  std::size_t batch = 1;        // B
  std::size_t prompt_len = 16;  // L
  std::size_t hidden = 256;     // H
  std::size_t heads = 4;
  std::size_t layers = 2;
  std::size_t ffn_mult = 2;  // FFN width = ffn_mult * H
  std::size_t max_seq_len = 64;

  /// Throws InputError unless all sizes are positive, H is even and
  /// divisible by heads, and prompt_len <= max_seq_len.
  void validate() const;
  std::size_t head_dim() const noexcept { return hidden / heads; }
  std::size_t ffn_dim() const noexcept { return ffn_mult * hidden; }

  /// H = 256, 4 heads, 2 layers.
  static ModelConfig tiny();

  bool operator==(const ModelConfig&) const = default;
};

/// A batch of token activations [B, T, H], stored as a matrix with row
/// b * T + t.
struct Tokens {
  std::size_t batch = 0;
  std::size_t length = 0;
  MatrixD x;

  Tokens() = default;
  Tokens(std::size_t b, std::size_t t, std::size_t h) : batch(b), length(t), x(b * t, h) {}

  std::size_t hidden() const noexcept { return x.cols(); }
  std::span<double> row(std::size_t b, std::size_t t) noexcept { return x.row(b * length + t); }
  std::span<const double> row(std::size_t b, std::size_t t) const noexcept {
    return x.row(b * length + t);
  }

  /// Positions [begin, begin + count) of every sequence.
  Tokens slice(std::size_t begin, std::size_t count) const;
  /// Concatenation along the sequence axis.
  static Tokens concat(const Tokens& a, const Tokens& b);
};

/// Weights in GEMM orientation [in, out].
struct LayerWeights {
  MatrixD wqkv;  // [H, 3H], columns q | k | v
  MatrixD wo;    // [H, H]
  MatrixD w1;    // [H, F]
  MatrixD w2;    // [F, H]
};

struct ModelWeights {
  ModelConfig cfg;
  std::vector<LayerWeights> layers;

  /// Gaussian init with std 1/sqrt(fan_in); the two projections feeding the
  /// residual stream (wo, w2) are additionally scaled by `residual_gain`,
  /// which defaults (0) to 1/sqrt(2 * layers).
  static ModelWeights random(const ModelConfig& cfg, std::uint64_t seed,
                             double residual_gain = 0.0);
  static ModelWeights zeros(const ModelConfig& cfg);
};

/// Synthetic activations: N(0, 1) everywhere plus `outlier_scale` times a
/// random sign and magnitude in [1, 2) on the listed channels.
Tokens synthetic_tokens(std::size_t batch, std::size_t length, std::size_t hidden,
                        std::uint64_t seed, std::span<const std::size_t> outlier_channels = {},
                        double outlier_scale = 40.0);

/// Outlier channels used by the demo and tests for a given hidden size.
std::vector<std::size_t> default_outlier_channels(std::size_t hidden, std::uint64_t seed,
                                                  std::size_t count = 3);

/// One quantized linear layer: the activation precision map of its input and
/// the grouped INT4 weights permuted to match.
struct QuantLinear {
  fmpq::BlockPrecisionMap map;
  gemm::QuantizedWeights weights;
};

struct QuantLayer {
  QuantLinear qkv, o, up, down;
  std::vector<quant::QuantParams> k_params;  // per channel, asymmetric INT4
  std::vector<quant::QuantParams> v_params;
};

struct QuantizedModel {
  ModelConfig cfg;
  std::vector<QuantLayer> layers;
};

struct CalibrationOptions {
  double theta = fmpq::kDefaultTheta;
  std::size_t block_size = fmpq::kDefaultBlockSize;
  std::size_t group_size = fmpq::kDefaultGroupSize;
};

/// Static calibration: runs the full-precision model over `calibration`
/// sequences, records the input range of every linear layer and of K/V, and
/// quantizes the weights accordingly. Throws InputError when no sequence is
/// given and DimensionError on a hidden-size mismatch.
QuantizedModel quantize_model(const ModelWeights& weights, std::span<const Tokens> calibration,
                              const CalibrationOptions& opts = {});

/// Packed INT4 K/V for every layer and sequence. Codes are stored as
/// (q - 8) in linear nibble order, one row of H nibbles per position.
class QuantKVCache {
 public:
  QuantKVCache() = default;
  QuantKVCache(const ModelConfig& cfg, std::vector<std::vector<quant::QuantParams>> k_params,
               std::vector<std::vector<quant::QuantParams>> v_params);

  const ModelConfig& config() const noexcept { return cfg_; }
  /// Positions held for sequence b (equal across layers between calls).
  std::size_t length(std::size_t b) const;
  std::size_t length(std::size_t layer, std::size_t b) const;

  /// Throws CapacityError when the sequence is already at max_seq_len.
  void append(std::size_t layer, std::size_t b, std::span<const double> k,
              std::span<const double> v);

  /// Dequantized [length, H] keys / values of one sequence.
  MatrixD keys(std::size_t layer, std::size_t b) const;
  MatrixD values(std::size_t layer, std::size_t b) const;

  /// Raw stored codes as packed buffers (linear nibble order).
  layout::PackedNibbleBuffer packed_keys(std::size_t layer, std::size_t b) const;
  layout::PackedNibbleBuffer packed_values(std::size_t layer, std::size_t b) const;

  const std::vector<quant::QuantParams>& key_params(std::size_t layer) const {
    return k_params_.at(layer);
  }
  const std::vector<quant::QuantParams>& value_params(std::size_t layer) const {
    return v_params_.at(layer);
  }

  /// Bytes actually held: packed payload and serialized parameters.
  std::size_t payload_bytes() const;
  std::size_t param_bytes() const;

  bool operator==(const QuantKVCache&) const = default;

 private:
  struct Store {
    std::vector<std::uint8_t> bytes;
    std::size_t length = 0;

    bool operator==(const Store&) const = default;
  };
  Store& store(std::size_t layer, std::size_t b, bool value);
  const Store& store(std::size_t layer, std::size_t b, bool value) const;
  MatrixD dequantize_store(const Store& s, const std::vector<quant::QuantParams>& params) const;

  ModelConfig cfg_;
  std::vector<std::vector<quant::QuantParams>> k_params_;
  std::vector<std::vector<quant::QuantParams>> v_params_;
  std::vector<Store> stores_;  // (layer * batch + b) * 2 + {0: K, 1: V}
};

/// Serialized bytes per parameter set: f32 scale + i32 zero point.
inline constexpr std::size_t kKvParamBytes = 8;

struct KvFootprint {
  std::size_t payload_bytes = 0;  // 4-bit K and V
  std::size_t param_bytes = 0;    // per-channel scale + zero point
  std::size_t fp16_payload_bytes = 0;

  std::size_t total() const noexcept { return payload_bytes + param_bytes; }
};

/// layers * 2 * B * seq_len * H / 2 payload bytes plus layers * 2 * H *
/// kKvParamBytes parameter bytes.
KvFootprint kv_memory_footprint(const ModelConfig& cfg, std::size_t seq_len);

struct ForwardResult {
  Tokens logits;
  QuantKVCache cache;
};

/// Runs a prompt [B, L, H] (any L up to max_seq_len) through the quantized
/// model. Throws DimensionError on a shape mismatch.
ForwardResult prefill(const QuantizedModel& model, const Tokens& prompt, std::size_t workers = 1);

/// One decoding step for a token [B, 1, H]: appends K/V and returns logits
/// [B, 1, H]. Throws CapacityError (cache untouched) when a sequence is full.
Tokens generate_step(const QuantizedModel& model, QuantKVCache& cache, const Tokens& token,
                     std::size_t workers = 1);

/// Full-precision reference with an unquantized cache.
class ReferenceModel {
 public:
  explicit ReferenceModel(ModelWeights weights);

  const ModelConfig& config() const noexcept { return w_.cfg; }
  Tokens prefill(const Tokens& prompt);
  Tokens step(const Tokens& token);
  std::size_t length(std::size_t b) const { return lengths_.at(b); }

 private:
  friend QuantizedModel quantize_model(const ModelWeights&, std::span<const Tokens>,
                                       const CalibrationOptions&);
  struct Observer;
  Tokens forward(const Tokens& in, Observer* obs);

  ModelWeights w_;
  // [layer * batch + b] -> one row per position
  std::vector<std::vector<std::vector<double>>> keys_;
  std::vector<std::vector<std::vector<double>>> values_;
  std::vector<std::size_t> lengths_;
};

/// Softmax-weighted attention of one query row over [n, H] keys and values,
/// head by head. `weights`, when given, receives heads x n probabilities.
std::vector<double> attend(std::span<const double> q, const MatrixD& keys, const MatrixD& values,
                           std::size_t heads, std::vector<double>* weights = nullptr);

/// x / sqrt(mean(x^2) + eps), row by row.
MatrixD rms_norm(const MatrixD& x, double eps = 1e-6);

}  // namespace w4ax::model
