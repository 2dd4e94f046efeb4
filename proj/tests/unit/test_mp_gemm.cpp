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

#include "oracles.hpp"
#include "w4ax/mp_gemm.hpp"

namespace w4ax::gemm {
namespace {

using fmpq::BlockPrecisionMap;

MatrixD outlier_activations(std::size_t m, std::size_t k, std::size_t outliers, Rng& rng) {
  MatrixD a = oracle::gaussian(m, k, rng);
  const auto perm = oracle::random_perm(k, rng);
  for (std::size_t i = 0; i < outliers && i < k; ++i) {
    for (std::size_t r = 0; r < m; ++r) a(r, perm[i]) *= 40.0;
  }
  return a;
}

BlockPrecisionMap calibrate(const MatrixD& a, std::size_t k = 128) {
  return fmpq::build_precision_map(quant::collect_calib_stats(std::span(&a, 1)), fmpq::kDefaultTheta, k);
}

// Dequantized operands in permuted channel order, multiplied in long double.
MatrixD dequantized_reference(const MatrixD& act, const QuantizedWeights& w, const BlockPrecisionMap& map) {
  const MatrixD a = quant::dequantize(fmpq::quantize_activation_fmpq(act, map));
  const auto codes = layout::unpack_nibbles(w.packed);
  MatrixD wd(w.K, w.N);
  for (std::size_t n = 0; n < w.N; ++n) {
    for (std::size_t k = 0; k < w.K; ++k) {
      wd(k, n) = codes[n * w.K + k] * w.params(n, k / w.group_size).scale;
    }
  }
  return oracle::matmul(a, wd);
}

TEST(Plan, TileCountsPrecisionAndCost) {
  const std::vector<int> bits{8, 4, 4};
  const auto plan = plan_gemm(256, 256, 384, bits, 128);
  EXPECT_EQ(plan.tiles_m, 2u);
  EXPECT_EQ(plan.tiles_n, 2u);
  EXPECT_EQ(plan.tiles_k, 3u);
  ASSERT_EQ(plan.tasks.size(), 12u);
  for (const auto& t : plan.tasks) {
    const bool eight = t.k_idx == 0;
    EXPECT_EQ(t.precision, eight ? TilePrecision::kW4A8 : TilePrecision::kW4A4);
    EXPECT_EQ(t.cost_units, eight ? 2u : 1u);
  }
  ASSERT_EQ(plan.reduction_groups.size(), 4u);
  for (const auto& g : plan.reduction_groups) {
    ASSERT_EQ(g.size(), 3u);
    for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(plan.tasks[g[i]].k_idx, i);
  }
}

TEST(Plan, TileSpanningSeveralBlocksTakesHighestPrecision) {
  TileConfig cfg;
  cfg.tile_k = 256;
  const std::vector<int> bits{4, 4, 4, 8};
  const auto plan = plan_gemm(128, 128, 512, bits, 128, cfg);
  ASSERT_EQ(plan.tasks.size(), 2u);
  EXPECT_EQ(plan.tasks[0].precision, TilePrecision::kW4A4);
  EXPECT_EQ(plan.tasks[1].precision, TilePrecision::kW4A8);
}

TEST(Plan, RejectsInconsistentInputs) {
  const std::vector<int> bits{4, 4};
  EXPECT_THROW(plan_gemm(0, 1, 256, bits, 128), InputError);
  EXPECT_THROW(plan_gemm(1, 1, 384, bits, 128), DimensionError);
  TileConfig cfg;
  cfg.tile_k = 96;
  EXPECT_THROW(plan_gemm(1, 1, 256, bits, 128, cfg), InputError);
  cfg.tile_k = 8192;
  EXPECT_THROW(plan_gemm(1, 1, 256, bits, 128, cfg), InputError);
}

TEST(Weights, DequantizeMatchesGroupedOracle) {
  Rng rng(1);
  const MatrixD w = oracle::gaussian(200, 9, rng);
  const MatrixD a = outlier_activations(4, 200, 2, rng);
  const auto map = calibrate(a, 64);
  const auto qw = quantize_weights_for_map(w, map, 64);
  EXPECT_EQ(qw.packed.bytes().size(), 2 * ((200 * 9 + 3) / 4));
  const MatrixD back = dequantize_weights(qw);
  for (std::size_t k = 0; k < 200; ++k) {
    for (std::size_t n = 0; n < 9; ++n) {
      EXPECT_LE(std::abs(back(k, n) - w(map.permutation.perm()[k], n)), qw.params(n, k / 64).scale / 2 * (1 + 1e-12));
    }
  }
}

// mixed_gemm equals the f64 product of the dequantized operands and is
// bit-identical across worker counts.
TEST(MixedGemmProperty, MatchesDequantizedOracleAcrossWorkers) {
  Rng rng(2);
  for (int trial = 0; trial < 12; ++trial) {
    const std::size_t M = 1 + rng.below(300);
    const std::size_t N = 1 + rng.below(300);
    const std::size_t K = 1 + rng.below(512);
    const MatrixD act = outlier_activations(M, K, rng.below(6), rng);
    const MatrixD w = oracle::gaussian(K, N, rng, 0.05);
    const auto map = calibrate(act);
    const auto qw = quantize_weights_for_map(w, map);
    const MatrixD ref = dequantized_reference(act, qw, map);

    const MatrixD out1 = mixed_gemm(act, qw, map, {}, 1);
    EXPECT_LE(oracle::rel_fro(out1, ref), 1e-6) << M << "x" << N << "x" << K;
    for (std::size_t workers : {2u, 4u, 8u}) {
      ExecStats stats;
      const MatrixD outw = mixed_gemm(act, qw, map, {}, workers, &stats);
      EXPECT_EQ(outw, out1) << "workers=" << workers;
      std::size_t ran = 0;
      for (std::size_t n : stats.tasks_per_worker) ran += n;
      EXPECT_EQ(ran, plan_gemm(M, N, K, map).tasks.size());
    }
  }
}

TEST(MixedGemm, SmallTilesAndNoDoubleBuffer) {
  Rng rng(3);
  const MatrixD act = outlier_activations(70, 160, 3, rng);
  const MatrixD w = oracle::gaussian(160, 50, rng);
  const auto map = calibrate(act, 32);
  const auto qw = quantize_weights_for_map(w, map, 32);
  const MatrixD ref = dequantized_reference(act, qw, map);
  TileConfig cfg;
  cfg.tile_m = 16;
  cfg.tile_n = 24;
  cfg.tile_k = 64;
  const auto plan = plan_gemm(70, 50, 160, map, cfg);
  const auto a = fmpq::quantize_activation_fmpq(act, map);
  const MatrixD x = execute_plan(plan, a, qw, {3, false});
  const MatrixD y = execute_plan(plan, a, qw, {5, true});
  EXPECT_LE(oracle::rel_fro(x, ref), 1e-6);
  EXPECT_EQ(x, y);
}

TEST(MixedGemm, RejectsShapeMismatch) {
  Rng rng(4);
  const MatrixD act = outlier_activations(4, 128, 1, rng);
  const auto map = calibrate(act);
  const auto qw = quantize_weights_for_map(oracle::gaussian(128, 8, rng), map);
  EXPECT_THROW(mixed_gemm(MatrixD(4, 64), qw, map), DimensionError);
  EXPECT_THROW(quantize_weights_for_map(oracle::gaussian(64, 8, rng), map), DimensionError);
}

// Integer-valued operands with unit scales: the GEMM is exact, so the
// permuted and unpermuted products agree bit for bit and equal an int64
// product.
BlockPrecisionMap unit_scale_map(std::vector<std::size_t> perm, std::size_t k, Rng& rng) {
  BlockPrecisionMap map;
  map.k = k;
  map.num_channels = perm.size();
  map.permutation = fmpq::ChannelPermutation(std::move(perm));
  for (std::size_t b = 0; b < ceil_div(map.num_channels, k); ++b) {
    const int bits = rng.below(2) ? 8 : 4;
    map.block_bits.push_back(bits);
    map.block_params.push_back({1.0, 0, bits, quant::Scheme::kSymmetric});
  }
  return map;
}

QuantizedWeights unit_scale_weights(const MatrixD& w_kn, const fmpq::ChannelPermutation& perm,
                                    std::size_t group) {
  quant::IntTensor t;
  t.rows = w_kn.cols();
  t.cols = w_kn.rows();
  t.layout = {quant::Granularity::kPerGroup, group};
  for (std::size_t n = 0; n < t.rows; ++n) {
    for (std::size_t i = 0; i < t.cols; ++i) {
      t.data.push_back(static_cast<std::int8_t>(w_kn(perm.perm()[i], n)));
    }
  }
  t.params.assign(t.rows * ceil_div(t.cols, group), {1.0, 0, 4, quant::Scheme::kSymmetric});
  return pack_weights(t);
}

TEST(PermutationEquivalence, PermutedGemmIsExact) {
  Rng rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t k = std::size_t{32} << rng.below(3);
    const std::size_t M = 1 + rng.below(40);
    const std::size_t N = 1 + rng.below(40);
    const std::size_t K = 1 + rng.below(320);
    const MatrixD a = oracle::integers(M, K, rng, -7, 7);
    const MatrixD w = oracle::integers(K, N, rng, -7, 7);

    const auto pmap = unit_scale_map(oracle::random_perm(K, rng), k, rng);
    const auto imap = unit_scale_map(fmpq::ChannelPermutation::identity(K).perm(), k, rng);
    TileConfig cfg;
    cfg.tile_k = k;
    const MatrixD permuted = mixed_gemm(a, unit_scale_weights(w, pmap.permutation, k), pmap, cfg, 1 + trial % 4);
    const MatrixD plain = mixed_gemm(a, unit_scale_weights(w, imap.permutation, k), imap, cfg);
    ASSERT_EQ(permuted, plain) << "trial " << trial;

    for (std::size_t i = 0; i < M; ++i) {
      for (std::size_t j = 0; j < N; ++j) {
        std::int64_t s = 0;
        for (std::size_t c = 0; c < K; ++c) {
          s += static_cast<std::int64_t>(a(i, c)) * static_cast<std::int64_t>(w(c, j));
        }
        ASSERT_EQ(plain(i, j), static_cast<double>(s));
      }
    }
  }
}

TEST(Execute, EightBitBlockInW4A4TileIsAConsistencyError) {
  Rng rng(6);
  const MatrixD act = outlier_activations(8, 128, 2, rng);
  const auto map = calibrate(act);
  ASSERT_EQ(map.block_bits[0], 8);
  const auto qw = quantize_weights_for_map(oracle::gaussian(128, 8, rng), map);
  const std::vector<int> wrong{4};
  const auto plan = plan_gemm(8, 8, 128, wrong, 128);
  EXPECT_THROW(execute_plan(plan, fmpq::quantize_activation_fmpq(act, map), qw), ConsistencyError);
}

TEST(Reference, MatmulAndErrorHelpers) {
  const MatrixD a(2, 2, std::vector<double>{1, 2, 3, 4});
  const MatrixD b(2, 1, std::vector<double>{5, 6});
  EXPECT_EQ(matmul(a, b), MatrixD(2, 1, std::vector<double>{17, 39}));
  EXPECT_EQ(relative_frobenius_error(a, a), 0.0);
  EXPECT_THROW(matmul(b, b), DimensionError);
}

}  // namespace
}  // namespace w4ax::gemm
