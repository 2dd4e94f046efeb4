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

// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails.

#include <bit>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <set>
#include <sstream>
#include <string>

#include "golden_cases.hpp"
#include "oracles.hpp"
#include "w4ax/fmpq.hpp"
#include "w4ax/formats.hpp"
#include "w4ax/kernels/kernels.hpp"
#include "w4ax/model_runtime.hpp"
#include "w4ax/mp_gemm.hpp"
#include "w4ax/packed_layout.hpp"
#include "w4ax/quant_core.hpp"
#include "w4ax/sched_sim.hpp"

namespace w4ax {
namespace {

using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok && pass) detail << "first failure: " << what << "; ";
    pass = pass && ok;
  }
};

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

// 1. Every 16-bit word converts to sign-extend-then-x16, in under a second.
void ac1(Outcome& o) {
  const auto t0 = Clock::now();
  std::vector<std::int8_t> all(4 * 65536);
  for (std::uint32_t w = 0; w < 65536; ++w) {
    const auto v = oracle::decode_swapped_word(static_cast<std::uint16_t>(w));
    for (int j = 0; j < 4; ++j) all[4 * w + j] = static_cast<std::int8_t>(v[j]);
  }
  const auto packed = layout::pack_nibbles(all, layout::NibbleOrder::kSwapped);
  std::size_t mismatches = 0;
  const auto got = layout::fast_convert_i4_to_i8(packed);
  for (std::size_t i = 0; i < all.size(); ++i) mismatches += got[i] != 16 * all[i];
  for (const auto* table : kernels::available_tables()) {
    std::vector<std::int8_t> out(all.size());
    table->convert_i4_to_i8(packed.bytes().data(), 65536, out.data());
    for (std::size_t i = 0; i < all.size(); ++i) mismatches += out[i] != 16 * all[i];
  }
  const double secs = seconds_since(t0);
  o.require(mismatches == 0, std::to_string(mismatches) + " mismatches");
  o.require(secs < 1.0, "runtime over 1 s");
  o.detail << "65536 words x " << kernels::available_tables().size() + 1 << " paths, " << mismatches
           << " mismatches, " << secs * 1e3 << " ms";
}

// 2. dequantize(fast_convert(q), scale / 16) == dequantize(q, scale).
void ac2(Outcome& o) {
  Rng rng(2);
  std::size_t elements = 0, mismatches = 0;
  for (int t = 0; t < 10000; ++t) {
    const std::size_t n = 1 + rng.below(64);
    std::vector<std::int8_t> q(n);
    for (auto& v : q) v = static_cast<std::int8_t>(static_cast<int>(rng.below(16)) - 8);
    const quant::QuantParams p{std::ldexp(0.5 + rng.uniform(), static_cast<int>(rng.below(60)) - 30), 0, 4,
                               quant::Scheme::kSymmetric};
    const auto folded = layout::fold_conversion_scale(p);
    const auto wide = layout::fast_convert_i4_to_i8(layout::pack_nibbles(q, layout::NibbleOrder::kSwapped));
    for (std::size_t i = 0; i < n; ++i) {
      mismatches += quant::dequantize_value(wide[i], folded) != quant::dequantize_value(q[i], p);
    }
    elements += n;
  }
  o.require(mismatches == 0, std::to_string(mismatches) + " mismatches");
  o.detail << "10000 tensors, " << elements << " elements, " << mismatches << " mismatches";
}

MatrixD outlier_matrix(std::size_t rows, std::size_t cols, std::size_t outliers, Rng& rng,
                       double scale = 40.0, std::set<std::size_t>* chosen = nullptr) {
  MatrixD m = oracle::gaussian(rows, cols, rng);
  const auto perm = oracle::random_perm(cols, rng);
  for (std::size_t i = 0; i < outliers && i < cols; ++i) {
    for (std::size_t r = 0; r < rows; ++r) m(r, perm[i]) *= scale;
    if (chosen) chosen->insert(perm[i]);
  }
  return m;
}

quant::CalibStats stats_of(const MatrixD& m) { return quant::collect_calib_stats(std::span(&m, 1)); }

// 3. mixed_gemm vs f64 product of dequantized operands, deterministic across
// worker counts.
void ac3(Outcome& o) {
  const auto t0 = Clock::now();
  Rng rng(3);
  double worst = 0.0;
  int runs = 0;
  for (int t = 0; t < 8; ++t) {
    const bool largest = t == 0;
    const std::size_t M = largest ? 512 : 1 + rng.below(512);
    const std::size_t N = largest ? 512 : 1 + rng.below(512);
    const std::size_t K = largest ? 512 : 1 + rng.below(512);
    const MatrixD act = outlier_matrix(M, K, rng.below(8), rng);
    const MatrixD w = oracle::gaussian(K, N, rng, 1.0 / std::sqrt(static_cast<double>(K)));
    const auto map = fmpq::build_precision_map(stats_of(act));
    const auto qw = gemm::quantize_weights_for_map(w, map);

    const MatrixD ad = quant::dequantize(fmpq::quantize_activation_fmpq(act, map));
    const auto codes = layout::unpack_nibbles(qw.packed);
    MatrixD wd(K, N);
    for (std::size_t n = 0; n < N; ++n) {
      for (std::size_t k = 0; k < K; ++k) wd(k, n) = codes[n * K + k] * qw.params(n, k / qw.group_size).scale;
    }
    const MatrixD ref = oracle::matmul(ad, wd);

    const MatrixD base = gemm::mixed_gemm(act, qw, map, {}, 1);
    worst = std::max(worst, oracle::rel_fro(base, ref));
    for (std::size_t workers : {2u, 4u, 8u}) {
      o.require(gemm::mixed_gemm(act, qw, map, {}, workers) == base,
                "workers=" + std::to_string(workers) + " differs");
    }
    ++runs;
  }
  const double secs = seconds_since(t0);
  o.require(worst <= 1e-6, "relative error above 1e-6");
  o.require(secs < 30.0, "runtime over 30 s");
  o.detail << runs << " shapes up to 512x512x512, max rel_err " << worst
           << ", bit-identical for workers {1,2,4,8}, " << secs << " s";
}

// 4. Permuted and unpermuted GEMM agree exactly on integer operands.
void ac4(Outcome& o) {
  Rng rng(4);
  auto unit_map = [&](std::vector<std::size_t> perm, std::size_t k) {
    fmpq::BlockPrecisionMap map;
    map.k = k;
    map.num_channels = perm.size();
    map.permutation = fmpq::ChannelPermutation(std::move(perm));
    for (std::size_t b = 0; b < ceil_div(map.num_channels, k); ++b) {
      const int bits = rng.below(2) ? 8 : 4;
      map.block_bits.push_back(bits);
      map.block_params.push_back({1.0, 0, bits, quant::Scheme::kSymmetric});
    }
    return map;
  };
  auto unit_weights = [](const MatrixD& w, const fmpq::ChannelPermutation& perm, std::size_t g) {
    quant::IntTensor t;
    t.rows = w.cols();
    t.cols = w.rows();
    t.layout = {quant::Granularity::kPerGroup, g};
    for (std::size_t n = 0; n < t.rows; ++n) {
      for (std::size_t i = 0; i < t.cols; ++i) t.data.push_back(static_cast<std::int8_t>(w(perm.perm()[i], n)));
    }
    t.params.assign(t.rows * ceil_div(t.cols, g), {1.0, 0, 4, quant::Scheme::kSymmetric});
    return gemm::pack_weights(t);
  };
  int equal = 0;
  for (int t = 0; t < 100; ++t) {
    const std::size_t k = std::size_t{32} << rng.below(3);
    const std::size_t M = 1 + rng.below(48), N = 1 + rng.below(48), K = 1 + rng.below(384);
    const MatrixD a = oracle::integers(M, K, rng, -7, 7);
    const MatrixD w = oracle::integers(K, N, rng, -7, 7);
    const auto pmap = unit_map(oracle::random_perm(K, rng), k);
    const auto imap = unit_map(fmpq::ChannelPermutation::identity(K).perm(), k);
    gemm::TileConfig cfg;
    cfg.tile_k = k;
    const MatrixD permuted = gemm::mixed_gemm(a, unit_weights(w, pmap.permutation, k), pmap, cfg);
    const MatrixD plain = gemm::mixed_gemm(a, unit_weights(w, imap.permutation, k), imap, cfg);
    bool exact = permuted == plain;
    for (std::size_t i = 0; i < M && exact; ++i) {
      for (std::size_t j = 0; j < N; ++j) {
        std::int64_t s = 0;
        for (std::size_t c = 0; c < K; ++c) s += static_cast<std::int64_t>(a(i, c)) * static_cast<std::int64_t>(w(c, j));
        exact = exact && plain(i, j) == static_cast<double>(s);
      }
    }
    equal += exact;
  }
  o.require(equal == 100, "inexact trial");
  o.detail << equal << "/100 random (A, W, perm) exactly equal to each other and to an int64 product";
}

// 5. ceil(o / k) eight-bit blocks with the permutation, at least that many
// without, and <= 20% on 1% outliers at C = 4096, k = 128.
void ac5(Outcome& o) {
  Rng rng(5);
  int trials = 0;
  for (int t = 0; t < 200; ++t) {
    const std::size_t k = std::size_t{16} << rng.below(4);
    const std::size_t C = k * (2 + rng.below(10)) - rng.below(k);
    const std::size_t outliers = rng.below(std::min<std::size_t>(C / 3, 3 * k));
    const MatrixD x = outlier_matrix(64, C, outliers, rng);
    const auto s = stats_of(x);
    const auto report = fmpq::detect_outliers(s);
    const auto map = fmpq::build_precision_map(s, fmpq::kDefaultTheta, k);
    const auto unperm = fmpq::assign_block_precision(s, fmpq::ChannelPermutation::identity(C), report, k);
    o.require(report.outlier_count() == outliers, "detector missed planted outliers");
    o.require(map.eight_bit_blocks() == ceil_div(outliers, k), "8-bit block count != ceil(o/k)");
    o.require(unperm.eight_bit_blocks() >= map.eight_bit_blocks(), "unpermuted count below permuted");
    ++trials;
  }
  Rng big(55);
  const MatrixD x = outlier_matrix(128, 4096, 41, big);
  const auto map = fmpq::build_precision_map(stats_of(x), fmpq::kDefaultTheta, 128);
  o.require(map.eight_bit_fraction() <= 0.20, "8-bit fraction above 20%");
  o.detail << trials << " planted trials match ceil(o/k); C=4096 with 41 outliers: "
           << map.eight_bit_blocks() << "/" << map.num_blocks() << " blocks 8-bit ("
           << 100.0 * map.eight_bit_fraction() << "%)";
}

// 6. Scheduler ablation ordering.
void ac6(Outcome& o) {
  using sim::Strategy;
  auto run = [](Strategy s, const std::vector<sim::TileTask>& tasks, const sim::SimConfig& base = {}) {
    return sim::simulate(tasks, sim::strategy_config(s, base));
  };
  const auto example = sim::alternating_workload(18);
  const auto naive = run(Strategy::kNaive, example);
  const auto fin = run(Strategy::kFinalBarrier, example);
  const auto remap = run(Strategy::kRemap, example);
  const auto steal = run(Strategy::kStealing, example);
  o.require(naive.makespan == 10, "naive != 10");
  o.require(steal.makespan == 7, "stealing != 7");
  o.require(naive.makespan >= fin.makespan && fin.makespan >= remap.makespan &&
                remap.makespan >= steal.makespan,
            "18-tile ordering");
  // hand trace: tile i on SM i mod 4, wave i / 4 of two units
  for (const auto& e : naive.timeline) {
    o.require(e.sm == e.task % 4 && e.start == 2 * static_cast<std::int64_t>(e.task / 4) &&
                  e.end - e.start == (e.task % 2 == 0 ? 2 : 1),
              "naive trace event for tile " + std::to_string(e.task));
  }
  // 27 units on 4 SMs: ceil(27 / 4) = 7 with a single idle slot
  std::int64_t busy = 0;
  for (auto b : steal.busy_time) busy += b;
  o.require(busy == 27 && 4 * steal.makespan - busy == 1, "stealing trace");

  Rng rng(6);
  int ordered = 0;
  for (int t = 0; t < 100; ++t) {
    sim::SimConfig base;
    base.num_sms = 1 + rng.below(12);
    std::vector<sim::TileTask> tasks;
    const double frac8 = rng.uniform();
    for (std::size_t i = 1 + rng.below(100); i > 0; --i) {
      const bool eight = rng.uniform() < frac8;
      tasks.push_back({0, 0, 0, eight ? sim::TilePrecision::kW4A8 : sim::TilePrecision::kW4A4, eight ? 2u : 1u});
    }
    const auto a = run(Strategy::kNaive, tasks, base).makespan;
    const auto b = run(Strategy::kFinalBarrier, tasks, base).makespan;
    const auto c = run(Strategy::kRemap, tasks, base).makespan;
    const auto d = run(Strategy::kStealing, tasks, base).makespan;
    std::int64_t total = 0;
    for (const auto& x : tasks) total += base.cost_of(x);
    const std::int64_t S = static_cast<std::int64_t>(base.num_sms);
    const std::int64_t lower = (total + S - 1) / S;
    ordered += a >= b && b >= c && c >= d && d >= lower && d <= lower + base.cost8;
  }
  o.require(ordered == 100, "dominance or bound violated");

  double worst = 1e9;
  for (std::size_t n = 8; n <= 256; n += 8) {
    const auto tasks = sim::alternating_workload(n);
    worst = std::min(worst, static_cast<double>(run(Strategy::kNaive, tasks).makespan) /
                                static_cast<double>(run(Strategy::kStealing, tasks).makespan));
  }
  const double example_ratio = static_cast<double>(naive.makespan) / static_cast<double>(steal.makespan);
  o.require(example_ratio >= 1.3 && worst >= 1.3, "naive->full improvement below 1.3x");
  o.detail << "18-tile example naive=" << naive.makespan << " final=" << fin.makespan << " remap=" << remap.makespan
           << " stealing=" << steal.makespan << "; " << ordered
           << "/100 random workloads ordered and within bound; naive/full " << example_ratio
           << "x on the 18-tile example, min " << worst << "x on 50% INT4 alternating workloads of 8..256 tiles";
}

// 7. Round trip <= scale / 2 for every scheme; FMPQ SQNR >= uniform INT4.
void ac7(Outcome& o) {
  Rng rng(7);
  std::size_t checked = 0;
  for (int t = 0; t < 400; ++t) {
    const std::size_t rows = 1 + rng.below(8), cols = 1 + rng.below(64);
    const MatrixD x = oracle::gaussian(rows, cols, rng, 0.1 + 10.0 * rng.uniform());
    const int bits = t % 2 ? 4 : 8;
    const auto scheme = (t / 2) % 2 ? quant::Scheme::kAsymmetric : quant::Scheme::kSymmetric;
    const quant::QuantLayout layout{static_cast<quant::Granularity>((t / 4) % 4), 1 + rng.below(8)};
    const std::size_t np = quant::param_count(layout, rows, cols);
    std::vector<double> lo(np, 1e300), hi(np, -1e300);
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t c = 0; c < cols; ++c) {
        const auto i = quant::param_index(layout, cols, r, c);
        lo[i] = std::min(lo[i], x(r, c));
        hi[i] = std::max(hi[i], x(r, c));
      }
    }
    std::vector<quant::QuantParams> params;
    for (std::size_t i = 0; i < np; ++i) params.push_back(quant::compute_scale(lo[i], hi[i], bits, scheme));
    const auto q = quant::quantize(x, layout, params);
    const MatrixD back = quant::dequantize(q);
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t c = 0; c < cols; ++c) {
        o.require(std::abs(back(r, c) - x(r, c)) <= q.params_at(r, c).scale / 2 * (1 + 1e-12), "round trip");
        ++checked;
      }
    }
  }

  int better = 0;
  double min_gain = 1e9;
  for (int t = 0; t < 1000; ++t) {
    const std::size_t C = 64 + rng.below(512);
    const MatrixD x = outlier_matrix(4 + rng.below(60), C, 1 + rng.below(8), rng, 10.0 + 60.0 * rng.uniform());
    const auto map = fmpq::build_precision_map(stats_of(x), fmpq::kDefaultTheta, 128);
    const MatrixD fq = quant::dequantize(fmpq::quantize_activation_fmpq(x, map));
    const MatrixD xp = fmpq::permute_channels(x, map.permutation, fmpq::Axis::kCols);
    double maxabs = 0.0;
    for (double v : x.data()) maxabs = std::max(maxabs, std::abs(v));
    const double s = maxabs / 7.0;
    std::vector<double> uq;
    for (double v : x.data()) uq.push_back(oracle::quantize(v, s, 0, -7, 7) * s);
    const double gain = oracle::sqnr_db(xp.data(), fq.data()) - oracle::sqnr_db(x.data(), uq);
    better += gain >= 0.0;
    min_gain = std::min(min_gain, gain);
  }
  o.require(better == 1000, "FMPQ SQNR below uniform INT4");
  o.detail << checked << " elements within scale/2 across 2 schemes x 2 widths x 4 granularities; FMPQ >= INT4 SQNR in "
           << better << "/1000 trials (min gain " << min_gain << " dB)";
}

// 8. KV footprint exact and linear, 25% of FP16, phase consistency.
void ac8(Outcome& o) {
  using namespace model;
  const ModelConfig tiny = ModelConfig::tiny();
  const std::size_t per_pos = tiny.layers * 2 * tiny.batch * tiny.hidden / 2;
  for (std::size_t L = 0; L <= 256; ++L) {
    const auto f = kv_memory_footprint(tiny, L);
    o.require(f.payload_bytes == per_pos * L, "payload formula");
    o.require(f.param_bytes == tiny.layers * 2 * tiny.hidden * kKvParamBytes, "param formula");
    o.require(4 * f.payload_bytes == f.fp16_payload_bytes, "payload not 25% of FP16");
  }

  ModelConfig cfg;
  cfg.batch = 2;
  cfg.hidden = 64;
  cfg.heads = 4;
  cfg.prompt_len = 5;
  cfg.max_seq_len = 14;
  const auto w = ModelWeights::random(cfg, 8);
  const std::vector<std::size_t> ch{9, 33};
  std::vector<Tokens> calib;
  for (std::uint64_t i = 0; i < 3; ++i) calib.push_back(synthetic_tokens(cfg.batch, cfg.max_seq_len, cfg.hidden, 80 + i, ch));
  CalibrationOptions opts;
  opts.block_size = opts.group_size = 32;
  const auto qm = quantize_model(w, calib, opts);
  const Tokens seq = synthetic_tokens(cfg.batch, cfg.max_seq_len, cfg.hidden, 90, ch);
  const auto full = prefill(qm, seq);
  int identical = 0;
  for (std::size_t L = 1; L < cfg.max_seq_len; ++L) {
    auto part = prefill(qm, seq.slice(0, L));
    Tokens logits = part.logits;
    for (std::size_t t = L; t < cfg.max_seq_len; ++t) {
      logits = Tokens::concat(logits, generate_step(qm, part.cache, seq.slice(t, 1)));
      const auto f = kv_memory_footprint(cfg, t + 1);
      o.require(part.cache.payload_bytes() == f.payload_bytes && part.cache.param_bytes() == f.param_bytes,
                "measured cache differs from formula");
    }
    identical += logits.x == full.logits.x && part.cache == full.cache;
  }
  o.require(identical == static_cast<int>(cfg.max_seq_len) - 1, "phase mismatch");
  o.detail << "formula exact for L=0..256 (" << per_pos << " B/position, 25% of FP16); prefill vs generate bit-identical for "
           << identical << "/" << cfg.max_seq_len - 1 << " split points";
}

// 9. Tiny model relative error at prefill and after 32 steps.
void ac9(Outcome& o) {
  using namespace model;
  ModelConfig cfg = ModelConfig::tiny();
  const std::size_t steps = 32;
  cfg.max_seq_len = cfg.prompt_len + steps;
  const std::uint64_t seed = 0;
  const auto channels = default_outlier_channels(cfg.hidden, seed + 7);
  const auto w = ModelWeights::random(cfg, seed + 1);
  std::vector<Tokens> calib;
  for (std::uint64_t i = 0; i < 4; ++i) {
    calib.push_back(synthetic_tokens(cfg.batch, cfg.max_seq_len, cfg.hidden, seed + 100 + i, channels));
  }
  const auto qm = quantize_model(w, calib);
  const Tokens seq = synthetic_tokens(cfg.batch, cfg.max_seq_len, cfg.hidden, seed + 5, channels);
  ReferenceModel ref(w);
  const Tokens r0 = ref.prefill(seq.slice(0, cfg.prompt_len));
  auto res = prefill(qm, seq.slice(0, cfg.prompt_len));
  const double e0 = oracle::rel_fro(res.logits.x, r0.x);
  double e = 0.0, worst = 0.0;
  for (std::size_t s = 0; s < steps; ++s) {
    const Tokens tok = seq.slice(cfg.prompt_len + s, 1);
    e = oracle::rel_fro(generate_step(qm, res.cache, tok).x, ref.step(tok).x);
    worst = std::max(worst, e);
  }
  o.require(e0 <= 5e-2, "prefill error above 5e-2");
  o.require(e <= 0.10, "step-32 error above 10%");
  o.detail << "H=256 heads=4 layers=2: prefill rel_err " << e0 << ", step 32 rel_err " << e << " (max over steps "
           << worst << ")";
}

// 10. Golden CMTQ files are byte-identical to the encoder and to bytes
// assembled by hand in little-endian order.
void ac10(Outcome& o) {
  const std::filesystem::path dir = W4AX_GOLDEN_DIR;
  int files = 0;
  for (const auto& c : golden::cmtq_cases()) {
    const auto bytes = io::read_file(dir / c.file);
    o.require(io::encode_cmtq(c.tensor) == bytes, c.file + " differs from encoder");
    o.require(io::decode_cmtq(bytes) == c.tensor, c.file + " decodes differently");
    ++files;
  }
  std::vector<std::uint8_t> x;
  auto put = [&](std::uint64_t v, int n) {
    for (int i = 0; i < n; ++i) x.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  };
  for (char ch : std::string("CMTQ")) x.push_back(static_cast<std::uint8_t>(ch));
  put(1, 2), put(2, 1), put(4, 4), put(8, 4), put(1, 1), put(0, 3), put(0, 1), put(2, 1), put(4, 4), put(8, 4);
  for (int i = 0; i < 8; ++i) put(4, 1);
  for (int i = 0; i < 8; ++i) put(std::bit_cast<std::uint32_t>(static_cast<float>(std::ldexp(1.0, i % 7 - 4))), 4);
  for (int i = 0; i < 8; ++i) put(0, 4);
  put(16, 8);
  const auto codes = golden::codes(32, 5, 3);
  for (std::size_t w = 0; w < 8; ++w) {
    std::uint16_t word = 0;
    for (int j = 0; j < 4; ++j) word |= static_cast<std::uint16_t>((codes[4 * w + j] & 0xF) << oracle::kSwappedShift[j]);
    put(word, 2);
  }
  o.require(io::read_file(dir / "weights_4x8_g4_swapped.cmtq") == x, "hand-assembled bytes differ");
  o.detail << files << " golden CMTQ files byte-identical; hand-assembled little-endian header and payload match";
}

}  // namespace
}  // namespace w4ax

int main() {
  const std::vector<std::pair<const char*, std::function<void(w4ax::Outcome&)>>> criteria{
      {"AC1 fast-conversion exhaustiveness", w4ax::ac1}, {"AC2 scale-fold equivalence", w4ax::ac2},
      {"AC3 GEMM oracle equivalence", w4ax::ac3},        {"AC4 permutation equivalence", w4ax::ac4},
      {"AC5 FMPQ block economy", w4ax::ac5},             {"AC6 scheduler ablation ordering", w4ax::ac6},
      {"AC7 quantization properties", w4ax::ac7},        {"AC8 KV cache", w4ax::ac8},
      {"AC9 toy end-to-end", w4ax::ac9},                 {"AC10 format stability", w4ax::ac10},
  };
  int failed = 0;
  for (const auto& [name, fn] : criteria) {
    w4ax::Outcome o;
    try {
      fn(o);
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail << "exception: " << e.what();
    }
    std::printf("%s %s: %s\n", o.pass ? "PASS" : "FAIL", name, o.detail.str().c_str());
    failed += !o.pass;
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
