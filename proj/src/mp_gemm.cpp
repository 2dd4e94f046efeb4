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

#include "w4ax/mp_gemm.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <memory>
#include <optional>

#include "w4ax/kernels/kernels.hpp"
#include "w4ax/work_stealing.hpp"

namespace w4ax::gemm {

using quant::Granularity;
using quant::IntTensor;

void TileConfig::validate(std::size_t block_k) const {
  if (tile_m == 0 || tile_n == 0 || tile_k == 0) throw InputError("tile sizes must be positive");
  if (tile_k > kMaxTileK) {
    throw InputError("tile_k " + std::to_string(tile_k) + " exceeds " + std::to_string(kMaxTileK) +
                     " (int32 accumulator bound)");
  }
  if (block_k == 0) throw InputError("block size must be positive");
  if (tile_k % block_k != 0 && block_k % tile_k != 0) {
    throw InputError("tile_k " + std::to_string(tile_k) + " and block size " +
                     std::to_string(block_k) + " must divide one another");
  }
}

QuantizedWeights pack_weights(const IntTensor& w_nk) {
  if (w_nk.layout.granularity != Granularity::kPerGroup || w_nk.layout.size == 0) {
    throw LayoutError("weights must use per-group quantization");
  }
  for (const auto& p : w_nk.params) {
    if (p.bit_width != 4 || p.scheme != quant::Scheme::kSymmetric) {
      throw LayoutError("weights must be symmetric INT4");
    }
  }
  QuantizedWeights out;
  out.N = w_nk.rows;
  out.K = w_nk.cols;
  out.group_size = w_nk.layout.size;
  out.packed = layout::pack_nibbles(w_nk.data, layout::NibbleOrder::kSwapped);
  out.group_params = w_nk.params;
  return out;
}

QuantizedWeights quantize_weights_for_map(const MatrixD& w_kn, const fmpq::BlockPrecisionMap& map,
                                          std::size_t group_size) {
  if (w_kn.rows() != map.num_channels) {
    throw DimensionError("weights have " + std::to_string(w_kn.rows()) +
                         " reduction rows, precision map covers " +
                         std::to_string(map.num_channels) + " channels");
  }
  const MatrixD permuted = fmpq::permute_channels(w_kn, map.permutation, fmpq::Axis::kRows);
  return pack_weights(fmpq::quantize_weights_grouped(permuted, group_size));
}

MatrixD dequantize_weights(const QuantizedWeights& w) {
  const auto values = layout::unpack_nibbles(w.packed);
  MatrixD out(w.K, w.N);
  for (std::size_t n = 0; n < w.N; ++n) {
    for (std::size_t k = 0; k < w.K; ++k) {
      out(k, n) = quant::dequantize_value(values[n * w.K + k], w.params(n, k / w.group_size));
    }
  }
  return out;
}

GemmPlan plan_gemm(std::size_t M, std::size_t N, std::size_t K, std::span<const int> block_bits,
                   std::size_t block_k, const TileConfig& cfg) {
  if (M == 0 || N == 0 || K == 0) throw InputError("GEMM dimensions must be positive");
  cfg.validate(block_k);
  if (block_bits.size() != ceil_div(K, block_k)) {
    throw DimensionError("precision map has " + std::to_string(block_bits.size()) +
                         " blocks, K = " + std::to_string(K) + " needs " +
                         std::to_string(ceil_div(K, block_k)));
  }
  GemmPlan plan;
  plan.M = M;
  plan.N = N;
  plan.K = K;
  plan.cfg = cfg;
  plan.tiles_m = ceil_div(M, cfg.tile_m);
  plan.tiles_n = ceil_div(N, cfg.tile_n);
  plan.tiles_k = ceil_div(K, cfg.tile_k);

  std::vector<TilePrecision> k_precision(plan.tiles_k, TilePrecision::kW4A4);
  for (std::size_t kt = 0; kt < plan.tiles_k; ++kt) {
    const std::size_t k0 = kt * cfg.tile_k;
    const std::size_t k1 = std::min(K, k0 + cfg.tile_k);
    for (std::size_t b = k0 / block_k; b <= (k1 - 1) / block_k; ++b) {
      if (block_bits[b] == 8) k_precision[kt] = TilePrecision::kW4A8;
    }
  }

  plan.tasks.reserve(plan.tiles_m * plan.tiles_n * plan.tiles_k);
  plan.reduction_groups.resize(plan.tiles_m * plan.tiles_n);
  for (std::size_t m = 0; m < plan.tiles_m; ++m) {
    for (std::size_t n = 0; n < plan.tiles_n; ++n) {
      for (std::size_t k = 0; k < plan.tiles_k; ++k) {
        const TilePrecision p = k_precision[k];
        plan.reduction_groups[m * plan.tiles_n + n].push_back(plan.tasks.size());
        plan.tasks.push_back({m, n, k, p, p == TilePrecision::kW4A8 ? 2u : 1u});
      }
    }
  }
  return plan;
}

GemmPlan plan_gemm(std::size_t M, std::size_t N, std::size_t K, const fmpq::BlockPrecisionMap& map,
                   const TileConfig& cfg) {
  if (map.num_channels != K) {
    throw DimensionError("precision map covers " + std::to_string(map.num_channels) +
                         " channels, K = " + std::to_string(K));
  }
  return plan_gemm(M, N, K, map.block_bits, map.k, cfg);
}

namespace {

struct TileBounds {
  std::size_t m0, m1, n0, n1, k0, k1;
};

TileBounds bounds_of(const GemmPlan& plan, const TileTask& t) {
  const auto& c = plan.cfg;
  return {t.m_idx * c.tile_m, std::min(plan.M, (t.m_idx + 1) * c.tile_m),
          t.n_idx * c.tile_n, std::min(plan.N, (t.n_idx + 1) * c.tile_n),
          t.k_idx * c.tile_k, std::min(plan.K, (t.k_idx + 1) * c.tile_k)};
}

std::vector<KSegment> segments_of(std::size_t k0, std::size_t k1, std::size_t block_k,
                                  std::size_t group_size) {
  std::vector<KSegment> segs;
  std::size_t k = k0;
  while (k < k1) {
    const std::size_t next_block = (k / block_k + 1) * block_k;
    const std::size_t next_group = (k / group_size + 1) * group_size;
    const std::size_t end = std::min({k1, next_block, next_group});
    segs.push_back({k, end, k / block_k, k / group_size});
    k = end;
  }
  return segs;
}

}  // namespace

void stage_tile(const GemmPlan& plan, std::size_t task_index, const QuantizedWeights& w,
                StagedTile& slot) {
  if (w.packed.order() != layout::NibbleOrder::kSwapped || w.packed.interleave().enabled()) {
    throw LayoutError("tile execution needs swapped-order, non-interleaved weights");
  }
  const TileTask& task = plan.tasks.at(task_index);
  const TileBounds b = bounds_of(plan, task);
  const auto& kern = kernels::active();
  const auto convert = task.precision == TilePrecision::kW4A8 ? kern.convert_i4_to_i8
                                                              : kern.unpack_i4_swapped;
  slot.task_index = task_index;
  slot.k_begin = b.k0;
  slot.k_len = b.k1 - b.k0;
  slot.weights.resize((b.n1 - b.n0) * slot.k_len);
  const std::uint8_t* bytes = w.packed.bytes().data();
  for (std::size_t n = b.n0; n < b.n1; ++n) {
    // widen the whole words covering [n*K + k0, n*K + k1), then copy out
    const std::size_t first = n * w.K + b.k0;
    const std::size_t word0 = first / 4;
    const std::size_t word1 = ceil_div(n * w.K + b.k1, 4);
    slot.scratch.resize(4 * (word1 - word0));
    convert(bytes + 2 * word0, word1 - word0, slot.scratch.data());
    std::copy_n(slot.scratch.begin() + static_cast<std::ptrdiff_t>(first - 4 * word0), slot.k_len,
                slot.weights.begin() + static_cast<std::ptrdiff_t>((n - b.n0) * slot.k_len));
  }
}

TileAccumulator compute_tile(const GemmPlan& plan, std::size_t task_index, const IntTensor& a,
                             const StagedTile& staged, std::size_t weight_group_size) {
  if (staged.task_index != task_index) {
    throw ConsistencyError("staged operands belong to a different task");
  }
  if (a.layout.granularity != Granularity::kPerBlock) {
    throw LayoutError("activations must be block-quantized");
  }
  const TileTask& task = plan.tasks.at(task_index);
  const TileBounds b = bounds_of(plan, task);

  TileAccumulator out;
  out.task_index = task_index;
  out.rows = b.m1 - b.m0;
  out.cols = b.n1 - b.n0;
  out.precision = task.precision;
  out.segments = segments_of(b.k0, b.k1, a.layout.size, weight_group_size);
  out.acc.assign(out.segments.size() * out.rows * out.cols, 0);

  const auto dot = kernels::active().dot_i8;
  for (std::size_t s = 0; s < out.segments.size(); ++s) {
    const KSegment& seg = out.segments[s];
    if (task.precision == TilePrecision::kW4A4 && a.params[seg.act_block].bit_width == 8) {
      throw ConsistencyError("8-bit activation block routed to a W4A4 tile");
    }
    const std::size_t len = seg.k_end - seg.k_begin;
    for (std::size_t r = 0; r < out.rows; ++r) {
      const std::int8_t* arow = a.data.data() + (b.m0 + r) * a.cols + seg.k_begin;
      std::int32_t* dst = out.acc.data() + (s * out.rows + r) * out.cols;
      for (std::size_t c = 0; c < out.cols; ++c) {
        const std::int8_t* wrow = staged.weights.data() + c * staged.k_len + (seg.k_begin - b.k0);
        dst[c] = dot(arow, wrow, len);
      }
    }
  }
  return out;
}

TileAccumulator execute_tile(const GemmPlan& plan, std::size_t task_index, const IntTensor& a,
                             const QuantizedWeights& w) {
  StagedTile slot;
  stage_tile(plan, task_index, w, slot);
  return compute_tile(plan, task_index, a, slot, w.group_size);
}

void reduce_and_dequant(const GemmPlan& plan, std::size_t group,
                        std::span<const TileAccumulator* const> partials, const IntTensor& a,
                        const QuantizedWeights& w, MatrixD& out) {
  const auto& expected = plan.reduction_groups.at(group);
  if (partials.size() != expected.size()) {
    throw ConsistencyError("reduction group " + std::to_string(group) + " has " +
                           std::to_string(partials.size()) + " of " +
                           std::to_string(expected.size()) + " partials");
  }
  for (std::size_t i = 0; i < expected.size(); ++i) {
    if (partials[i] == nullptr || partials[i]->task_index != expected[i]) {
      throw ConsistencyError("reduction group " + std::to_string(group) +
                             " is missing partial for task " + std::to_string(expected[i]));
    }
  }
  const TileBounds b = bounds_of(plan, plan.tasks[expected.front()]);
  const std::size_t rows = b.m1 - b.m0;
  const std::size_t cols = b.n1 - b.n0;
  std::vector<double> sum(rows * cols, 0.0);
  std::vector<double> col_scale(cols);
  for (const TileAccumulator* part : partials) {
    for (std::size_t s = 0; s < part->segments.size(); ++s) {
      const KSegment& seg = part->segments[s];
      const double sa = a.params[seg.act_block].scale;
      for (std::size_t c = 0; c < cols; ++c) {
        const auto& pw = w.params(b.n0 + c, seg.weight_group);
        const double sw = part->precision == TilePrecision::kW4A8
                              ? layout::fold_conversion_scale(pw).scale
                              : pw.scale;
        col_scale[c] = sa * sw;
      }
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) {
          sum[r * cols + c] += col_scale[c] * static_cast<double>(part->at(s, r, c));
        }
      }
    }
  }
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) out(b.m0 + r, b.n0 + c) = sum[r * cols + c];
  }
}

MatrixD execute_plan(const GemmPlan& plan, const IntTensor& a, const QuantizedWeights& w,
                     const ExecOptions& opts, ExecStats* stats) {
  if (a.rows != plan.M || a.cols != plan.K) {
    throw DimensionError("activation shape does not match the plan");
  }
  if (w.K != plan.K || w.N != plan.N) throw DimensionError("weight shape does not match the plan");
  if (a.layout.granularity != Granularity::kPerBlock) {
    throw LayoutError("activations must be block-quantized");
  }
  const std::size_t workers = std::max<std::size_t>(1, opts.workers);

  MatrixD out(plan.M, plan.N);
  std::vector<std::unique_ptr<TileAccumulator>> partials(plan.tasks.size());
  auto remaining = std::make_unique<std::atomic<std::size_t>[]>(plan.reduction_groups.size());
  for (std::size_t g = 0; g < plan.reduction_groups.size(); ++g) {
    remaining[g].store(plan.reduction_groups[g].size(), std::memory_order_relaxed);
  }

  auto finish = [&](TileAccumulator acc) {
    const std::size_t task = acc.task_index;
    const std::size_t g = plan.group_of(plan.tasks[task]);
    partials[task] = std::make_unique<TileAccumulator>(std::move(acc));
    if (remaining[g].fetch_sub(1, std::memory_order_acq_rel) == 1) {
      // last partial of the group: reduce in k order
      std::vector<const TileAccumulator*> ordered;
      ordered.reserve(plan.reduction_groups[g].size());
      for (std::size_t t : plan.reduction_groups[g]) ordered.push_back(partials[t].get());
      reduce_and_dequant(plan, g, ordered, a, w, out);
      for (std::size_t t : plan.reduction_groups[g]) partials[t].reset();
    }
  };

  std::vector<std::int64_t> costs;
  costs.reserve(plan.tasks.size());
  for (const TileTask& t : plan.tasks) costs.push_back(t.cost_units);
  const auto queues = sched::lpt_assignment(costs, workers);

  sched::WorkStealingPool pool;
  const sched::PoolStats ps = pool.run(queues, [&](sched::WorkStealingPool::Worker& worker) {
    StagedTile slots[2];
    int cur = 0;
    std::optional<std::size_t> current = worker.next();
    if (current) stage_tile(plan, *current, w, slots[cur]);
    while (current) {
      std::optional<std::size_t> upcoming;
      if (opts.double_buffer) {
        // stage the next local task into the other slot before computing
        upcoming = worker.pop_local();
        if (upcoming) stage_tile(plan, *upcoming, w, slots[cur ^ 1]);
      }
      finish(compute_tile(plan, *current, a, slots[cur], w.group_size));
      worker.executed();
      if (!upcoming) {
        upcoming = worker.next();
        if (upcoming) stage_tile(plan, *upcoming, w, slots[cur ^ 1]);
      }
      current = upcoming;
      cur ^= 1;
    }
  });

  for (std::size_t g = 0; g < plan.reduction_groups.size(); ++g) {
    if (remaining[g].load() != 0) {
      throw ConsistencyError("reduction group " + std::to_string(g) + " never completed");
    }
  }
  if (stats != nullptr) {
    stats->tasks_per_worker = ps.executed_per_worker;
    stats->steals = ps.steals;
  }
  return out;
}

MatrixD mixed_gemm(const MatrixD& act, const QuantizedWeights& w, const fmpq::BlockPrecisionMap& map,
                   const TileConfig& cfg, std::size_t workers, ExecStats* stats) {
  if (act.cols() != w.K) {
    throw DimensionError("activation has " + std::to_string(act.cols()) +
                         " columns, weights expect K = " + std::to_string(w.K));
  }
  const IntTensor a = fmpq::quantize_activation_fmpq(act, map);
  const GemmPlan plan = plan_gemm(act.rows(), w.N, w.K, map, cfg);
  return execute_plan(plan, a, w, {workers, true}, stats);
}

MatrixD matmul(const MatrixD& a, const MatrixD& b) {
  if (a.cols() != b.rows()) throw DimensionError("matmul inner dimensions differ");
  MatrixD out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double v = a(i, k);
      if (v == 0.0) continue;
      for (std::size_t j = 0; j < b.cols(); ++j) out(i, j) += v * b(k, j);
    }
  }
  return out;
}

double relative_frobenius_error(const MatrixD& a, const MatrixD& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw DimensionError("shape mismatch");
  double num = 0.0;
  double den = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a.data()[i] - b.data()[i];
    num += d * d;
    den += b.data()[i] * b.data()[i];
  }
  if (den == 0.0) return num == 0.0 ? 0.0 : std::sqrt(num);
  return std::sqrt(num / den);
}

}  // namespace w4ax::gemm
