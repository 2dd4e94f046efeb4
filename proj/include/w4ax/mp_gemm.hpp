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

// Tile-based mixed-precision integer GEMM.
//
// out[M, N] = act[M, K] * W[K, N], where act is quantized block-wise along K
// (4 or 8 bits per block, see fmpq) and W is grouped symmetric INT4. The
// product is split into tile_m x tile_n x tile_k tasks. A task whose k-range
// touches an 8-bit activation block runs the W4A8 path: its weights are
// widened with the two-operation INT4->INT8 conversion (values come out 16x)
// and the 1/16 is folded into the weight scale at reduction. Other tasks run
// W4A4 on sign-extended nibbles. Accumulation is exact int32.
//
// Partial tiles of one (m, n) output tile form a reduction group and are
// combined in k order once the whole group has finished, so the result is
// bit-identical for any worker count or steal order.

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "w4ax/common.hpp"
#include "w4ax/fmpq.hpp"
#include "w4ax/packed_layout.hpp"
#include "w4ax/quant_core.hpp"

namespace w4ax::gemm {

struct TileConfig {
  static constexpr std::size_t kMaxTileK = 4096;  // 127 * 128 * 4096 < 2^31

  std::size_t tile_m = 128;
  std::size_t tile_n = 128;
  std::size_t tile_k = 128;

  /// Throws InputError unless all sizes are positive, tile_k <= kMaxTileK and
  /// tile_k and the block size divide one another.
  void validate(std::size_t block_k) const;
};

enum class TilePrecision : std::uint8_t { kW4A4 = 0, kW4A8 = 1 };

struct TileTask {
  std::size_t m_idx = 0;
  std::size_t n_idx = 0;
  std::size_t k_idx = 0;
  TilePrecision precision = TilePrecision::kW4A4;
  std::uint32_t cost_units = 1;  // 1 for W4A4, 2 for W4A8

  bool operator==(const TileTask&) const = default;
};

struct GemmPlan {
  std::size_t M = 0, N = 0, K = 0;
  TileConfig cfg;
  std::size_t tiles_m = 0, tiles_n = 0, tiles_k = 0;
  std::vector<TileTask> tasks;  // row-major over (m, n, k)
  // group g = m_idx * tiles_n + n_idx; task indices in ascending k_idx
  std::vector<std::vector<std::size_t>> reduction_groups;

  std::size_t group_of(const TileTask& t) const noexcept { return t.m_idx * tiles_n + t.n_idx; }
};

/// Packed grouped INT4 weights, output-channel major: row n holds the K
/// reduction values of output channel n in swapped nibble order.
struct QuantizedWeights {
  std::size_t K = 0;
  std::size_t N = 0;
  std::size_t group_size = fmpq::kDefaultGroupSize;
  layout::PackedNibbleBuffer packed;
  std::vector<quant::QuantParams> group_params;  // N * ceil(K / group_size)

  std::size_t groups_per_row() const noexcept { return ceil_div(K, group_size); }
  const quant::QuantParams& params(std::size_t n, std::size_t group) const {
    return group_params[n * groups_per_row() + group];
  }
};

/// Packs the output of fmpq::quantize_weights_grouped ([N, K], per-group).
QuantizedWeights pack_weights(const quant::IntTensor& w_nk);

/// Permutes the reduction axis of `w_kn` ([K, N]) with the map's channel
/// permutation, then quantizes and packs it.
QuantizedWeights quantize_weights_for_map(const MatrixD& w_kn, const fmpq::BlockPrecisionMap& map,
                                          std::size_t group_size = fmpq::kDefaultGroupSize);

/// Dequantized weights in GEMM orientation [K, N], in permuted channel order.
MatrixD dequantize_weights(const QuantizedWeights& w);

GemmPlan plan_gemm(std::size_t M, std::size_t N, std::size_t K, const fmpq::BlockPrecisionMap& map,
                   const TileConfig& cfg = {});

/// Same, from the per-block bit widths directly.
GemmPlan plan_gemm(std::size_t M, std::size_t N, std::size_t K, std::span<const int> block_bits,
                   std::size_t block_k, const TileConfig& cfg = {});

/// Maximal k sub-range of a tile with one activation block and one weight
/// group, hence one pair of scales.
struct KSegment {
  std::size_t k_begin = 0;
  std::size_t k_end = 0;
  std::size_t act_block = 0;
  std::size_t weight_group = 0;
};

/// int32 partial sums of one task: one rows x cols slab per k segment.
struct TileAccumulator {
  std::size_t task_index = 0;
  std::size_t rows = 0;
  std::size_t cols = 0;
  TilePrecision precision = TilePrecision::kW4A4;
  std::vector<KSegment> segments;
  std::vector<std::int32_t> acc;

  std::int32_t at(std::size_t seg, std::size_t r, std::size_t c) const {
    return acc[(seg * rows + r) * cols + c];
  }
};

/// Weights of one task, widened to int8 (16x on the W4A8 path). One slot of
/// a worker's double buffer.
struct StagedTile {
  std::size_t task_index = 0;
  std::size_t k_begin = 0;
  std::size_t k_len = 0;
  std::vector<std::int8_t> weights;  // cols x k_len
  std::vector<std::int8_t> scratch;
};

void stage_tile(const GemmPlan& plan, std::size_t task_index, const QuantizedWeights& w,
                StagedTile& slot);

TileAccumulator compute_tile(const GemmPlan& plan, std::size_t task_index,
                             const quant::IntTensor& a, const StagedTile& staged,
                             std::size_t weight_group_size);

/// stage_tile + compute_tile. `a` is the block-quantized, permuted activation
/// ([M, K], per-block layout). Throws LayoutError if the weights are not in
/// swapped order or interleaved.
TileAccumulator execute_tile(const GemmPlan& plan, std::size_t task_index,
                             const quant::IntTensor& a, const QuantizedWeights& w);

/// out tile = sum over k tiles and segments of s_a(block) * s_w(n, group) *
/// acc, in k order. W4A8 partials use the folded weight scale (s_w / 16).
/// Throws ConsistencyError when a partial is missing or out of place.
void reduce_and_dequant(const GemmPlan& plan, std::size_t group,
                        std::span<const TileAccumulator* const> partials,
                        const quant::IntTensor& a, const QuantizedWeights& w, MatrixD& out);

struct ExecOptions {
  std::size_t workers = 1;
  bool double_buffer = true;
};

struct ExecStats {
  std::vector<std::size_t> tasks_per_worker;
  std::size_t steals = 0;
};

/// Runs every task of `plan` on a work-stealing pool. Tasks start on workers
/// by longest-processing-time assignment of their cost units.
MatrixD execute_plan(const GemmPlan& plan, const quant::IntTensor& a, const QuantizedWeights& w,
                     const ExecOptions& opts = {}, ExecStats* stats = nullptr);

/// Full pipeline: permute and quantize `act` per `map`, plan, execute, reduce.
/// `w` must come from quantize_weights_for_map with the same map.
MatrixD mixed_gemm(const MatrixD& act, const QuantizedWeights& w, const fmpq::BlockPrecisionMap& map,
                   const TileConfig& cfg = {}, std::size_t workers = 1,
                   ExecStats* stats = nullptr);

/// Plain f64 matmul [M, K] x [K, N].
MatrixD matmul(const MatrixD& a, const MatrixD& b);

/// |a - b|_F / |b|_F (0 when both are zero).
double relative_frobenius_error(const MatrixD& a, const MatrixD& b);

}  // namespace w4ax::gemm
