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

#include "cli.hpp"

#include <bit>
#include <charconv>
#include <cmath>
#include <chrono>
#include <cstdlib>
#include <iomanip>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <CLI11.hpp>

#include "w4ax/fmpq.hpp"
#include "w4ax/formats.hpp"
#include "w4ax/model_runtime.hpp"
#include "w4ax/mp_gemm.hpp"
#include "w4ax/random.hpp"
#include "w4ax/sched_sim.hpp"

namespace w4ax::cli {
namespace {

using io::json;

struct CalibrateOpts {
  std::vector<std::string> inputs;
  bool synthetic = false;
  std::size_t channels = 512;
  std::size_t outliers = 5;
  std::size_t rows = 256;
  std::uint64_t seed = 0;
  double theta = fmpq::kDefaultTheta;
  std::size_t k = fmpq::kDefaultBlockSize;
  std::string out;
  std::string stats_out;
  std::string manifest;
};

struct QuantizeOpts {
  std::string weights;
  std::string map;
  std::string out;
  bool interleave = false;
  std::size_t group_size = fmpq::kDefaultGroupSize;
  std::string dequantize_out;
  std::string manifest;
};

struct GemmOpts {
  std::size_t m = 256;
  std::size_t n = 256;
  std::size_t k = 384;
  std::size_t workers = 1;
  bool check = false;
  std::uint64_t seed = 0;
  std::size_t outliers = 4;
  double theta = fmpq::kDefaultTheta;
  std::size_t block = fmpq::kDefaultBlockSize;
  std::string manifest;
};

struct SimulateOpts {
  std::size_t sms = 4;
  std::string tiles_spec = "example18";
  std::string strategy = "all";
  bool csv = false;
  std::string timeline;
  std::uint64_t seed = 0;
  std::size_t repeat = 1;
  std::int64_t barrier_overhead = 0;
  double steal_granularity = 0.5;
  std::string manifest;
};

struct DemoOpts {
  std::string config = "tiny";
  std::size_t steps = 32;
  std::size_t prompt_len = 16;
  std::uint64_t seed = 0;
  std::size_t workers = 1;
  std::string manifest;
};

class Failure {
 public:
  Failure(int code, std::string msg) : code_(code), msg_(std::move(msg)) {}
  int code() const noexcept { return code_; }
  const std::string& message() const noexcept { return msg_; }

 private:
  int code_;
  std::string msg_;
};

void write_manifest(const std::string& path, const io::RunManifest& m) {
  if (path.empty()) return;
  try {
    io::write_text(path, io::dump(m.to_json()));
  } catch (const Error& e) {
    throw Failure(kDataError, e.what());
  }
}

io::RunManifest manifest_for(const std::string& command, json config, std::uint64_t seed) {
  io::RunManifest m;
  m.command = command;
  m.config = std::move(config);
  m.seed = seed;
  m.tool_version = io::kToolVersion;
  return m;
}

std::vector<std::uint8_t> read_or_fail(const std::string& path) {
  try {
    return io::read_file(path);
  } catch (const Error& e) {
    throw Failure(kDataError, e.what());
  }
}

void write_or_fail(const std::string& path, std::span<const std::uint8_t> bytes) {
  try {
    io::write_file(path, bytes);
  } catch (const Error& e) {
    throw Failure(kDataError, e.what());
  }
}

std::size_t effective_workers(std::size_t requested) {
  if (const char* env = std::getenv("COMET_WORKERS")) {
    std::size_t v = 0;
    const std::string_view s(env);
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || p != s.data() + s.size() || v == 0) {
      throw Failure(kUsage, "COMET_WORKERS must be a positive integer");
    }
    return v;
  }
  if (requested == 0) throw Failure(kUsage, "--workers must be positive");
  return requested;
}

// ---------------------------------------------------------------------------

int cmd_calibrate(const CalibrateOpts& o, std::ostream& out) {
  if (o.inputs.empty() == !o.synthetic) {
    throw Failure(kUsage, "give exactly one of --input or --synthetic");
  }
  if (!(o.theta > 1.0)) throw Failure(kUsage, "--theta must exceed 1");
  if (o.k == 0) throw Failure(kUsage, "--k must be positive");

  std::vector<MatrixD> batches;
  if (o.synthetic) {
    if (o.channels == 0 || o.rows == 0) throw Failure(kUsage, "--channels and --rows must be positive");
    if (o.outliers > o.channels) throw Failure(kUsage, "--outliers exceeds --channels");
    batches.push_back(io::synthetic_activations(o.rows, o.channels, o.outliers, o.seed).values);
  } else {
    for (const auto& path : o.inputs) {
      const auto bytes = read_or_fail(path);
      if (bytes.empty()) continue;
      MatrixD m;
      try {
        m = io::to_matrix(io::decode_cmta(bytes));
      } catch (const Error& e) {
        throw Failure(kDataError, path + ": " + e.what());
      }
      if (m.rows() > 0 && m.cols() > 0) batches.push_back(std::move(m));
    }
  }
  if (batches.empty()) throw Failure(kDataError, "no samples");

  quant::CalibStats stats;
  try {
    stats = quant::collect_calib_stats(batches);
  } catch (const Error& e) {
    throw Failure(kDataError, e.what());
  }
  const auto report = fmpq::detect_outliers(stats, o.theta);
  const auto perm = fmpq::build_permutation(report, o.k);
  const auto map = fmpq::assign_block_precision(stats, perm, report, o.k);

  try {
    io::write_text(o.out, io::dump(io::precision_map_to_json(map, &report)));
    if (!o.stats_out.empty()) io::write_text(o.stats_out, io::dump(io::calib_stats_to_json(stats)));
  } catch (const Error& e) {
    throw Failure(kDataError, e.what());
  }

  out << "channels=" << stats.num_channels << '\n'
      << "samples=" << stats.sample_count << '\n'
      << "median_score=" << report.median_score << '\n'
      << "outliers=" << report.outlier_count() << '\n'
      << "blocks=" << map.num_blocks() << '\n'
      << "eight_bit_blocks=" << map.eight_bit_blocks() << '\n'
      << "eight_bit_fraction=" << map.eight_bit_fraction() << '\n';

  json cfg{{"theta", o.theta}, {"k", o.k}, {"synthetic", o.synthetic}};
  if (o.synthetic) {
    cfg["channels"] = o.channels;
    cfg["outliers"] = o.outliers;
    cfg["rows"] = o.rows;
  }
  auto m = manifest_for("calibrate", cfg, o.seed);
  m.inputs = o.inputs;
  m.outputs = {o.out};
  if (!o.stats_out.empty()) m.outputs.push_back(o.stats_out);
  write_manifest(o.manifest, m);
  return kOk;
}

int cmd_quantize(const QuantizeOpts& o, std::ostream& out) {
  if (o.group_size == 0) throw Failure(kUsage, "--group-size must be positive");
  MatrixD w;
  try {
    const auto t = io::decode_cmta(read_or_fail(o.weights));
    if (t.dims.size() != 2) throw Failure(kSchemaMismatch, "weights must be a rank-2 [K, N] tensor");
    w = io::to_matrix(t);
  } catch (const Error& e) {
    throw Failure(kDataError, o.weights + ": " + e.what());
  }
  if (w.size() == 0) throw Failure(kDataError, "no samples");

  fmpq::BlockPrecisionMap map;
  {
    const auto bytes = read_or_fail(o.map);
    json j;
    try {
      j = json::parse(bytes.begin(), bytes.end());
    } catch (const json::parse_error& e) {
      throw Failure(kDataError, o.map + ": " + e.what());
    }
    try {
      map = io::precision_map_from_json(j);
    } catch (const Error& e) {
      throw Failure(kSchemaMismatch, o.map + ": " + e.what());
    }
  }
  if (map.num_channels != w.rows()) {
    throw Failure(kSchemaMismatch, "precision map covers " + std::to_string(map.num_channels) +
                                       " channels but the weights have K = " +
                                       std::to_string(w.rows()));
  }
  if (o.interleave && w.rows() % layout::kFragmentInterleave.span != 0) {
    throw Failure(kSchemaMismatch, "interleave needs K divisible by " +
                                       std::to_string(layout::kFragmentInterleave.span));
  }

  const auto qw = gemm::quantize_weights_for_map(w, map, o.group_size);
  const auto cmtq =
      io::cmtq_from_weights(qw, o.interleave ? layout::kFragmentInterleave : layout::kNoInterleave);
  const auto bytes = io::encode_cmtq(cmtq);
  write_or_fail(o.out, bytes);

  const std::size_t elems = w.size();
  const std::size_t payload = cmtq.payload.bytes().size();
  out << "elements=" << elems << '\n'
      << "payload_bytes=" << payload << '\n'
      << "file_bytes=" << bytes.size() << '\n'
      << std::fixed << std::setprecision(3)
      << "compression_vs_f32=" << static_cast<double>(4 * elems) / static_cast<double>(payload)
      << '\n'
      << "compression_vs_f16=" << static_cast<double>(2 * elems) / static_cast<double>(payload)
      << '\n';

  std::vector<std::string> outputs{o.out};
  if (!o.dequantize_out.empty()) {
    // read back from the encoded bytes so the round trip covers the container
    const auto back = io::weights_from_cmtq(io::decode_cmtq(bytes));
    const MatrixD permuted = gemm::dequantize_weights(back);
    const MatrixD restored =
        fmpq::permute_channels(permuted, map.permutation.inverted(), fmpq::Axis::kRows);
    write_or_fail(o.dequantize_out, io::encode_cmta(io::from_matrix(restored)));
    outputs.push_back(o.dequantize_out);
  }

  auto m = manifest_for(
      "quantize", {{"interleave", o.interleave}, {"group_size", o.group_size}}, 0);
  m.inputs = {o.weights, o.map};
  m.outputs = outputs;
  write_manifest(o.manifest, m);
  return kOk;
}

int cmd_gemm(const GemmOpts& o, std::ostream& out) {
  if (o.m == 0 || o.n == 0 || o.k == 0) throw Failure(kUsage, "--m, --n and --k must be positive");
  if (!(o.theta > 1.0)) throw Failure(kUsage, "--theta must exceed 1");
  if (o.block == 0) throw Failure(kUsage, "--block must be positive");
  const std::size_t workers = effective_workers(o.workers);

  const MatrixD act =
      io::synthetic_activations(o.m, o.k, std::min(o.outliers, o.k), o.seed).values;
  Rng rng(o.seed + 1);
  MatrixD w(o.k, o.n);
  const double sd = 1.0 / std::sqrt(static_cast<double>(o.k));
  for (double& v : w.data()) v = sd * rng.normal();

  const auto map = fmpq::build_precision_map(quant::collect_calib_stats(std::span(&act, 1)),
                                             o.theta, o.block);
  const auto qw = gemm::quantize_weights_for_map(w, map);
  const auto a = fmpq::quantize_activation_fmpq(act, map);
  gemm::TileConfig tiles;
  if (o.block % tiles.tile_k != 0 && tiles.tile_k % o.block != 0) tiles.tile_k = o.block;
  const auto plan = gemm::plan_gemm(o.m, o.n, o.k, map, tiles);

  const auto t0 = std::chrono::steady_clock::now();
  const MatrixD result = gemm::execute_plan(plan, a, qw, {workers, true});
  const auto t1 = std::chrono::steady_clock::now();
  const auto wall_ns = std::chrono::duration_cast<std::chrono::nanoseconds>(t1 - t0).count();

  std::optional<double> rel;
  if (o.check) {
    const MatrixD oracle = gemm::matmul(quant::dequantize(a), gemm::dequantize_weights(qw));
    rel = gemm::relative_frobenius_error(result, oracle);
  }
  const bool passed = rel && *rel <= 1e-6;

  out << "M,N,K,workers,wall_ns,checks_passed\n"
      << o.m << ',' << o.n << ',' << o.k << ',' << workers << ',' << wall_ns << ','
      << (rel ? (passed ? "1" : "0") : "skipped") << '\n';
  if (rel) {
    std::ostringstream e;
    e << std::scientific << std::setprecision(3) << *rel;
    out << (passed ? "OK" : "FAIL") << " rel_err=" << e.str() << '\n';
  }
  out << "eight_bit_blocks=" << map.eight_bit_blocks() << '/' << map.num_blocks() << '\n';
  out << "output_hash=" << std::hex << std::setw(16) << std::setfill('0')
      << hash_doubles(result.data()) << std::dec << std::setfill(' ') << '\n';

  write_manifest(o.manifest, manifest_for("gemm",
                                          {{"m", o.m},
                                           {"n", o.n},
                                           {"k", o.k},
                                           {"workers", workers},
                                           {"check", o.check},
                                           {"outliers", o.outliers},
                                           {"theta", o.theta},
                                           {"block", o.block}},
                                          o.seed));
  return rel && !passed ? kCheckFailed : kOk;
}

std::optional<std::size_t> parse_size(std::string_view s) {
  std::size_t v = 0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || p != s.data() + s.size()) return std::nullopt;
  return v;
}

std::optional<double> parse_fraction(std::string_view s) {
  try {
    std::size_t used = 0;
    const double v = std::stod(std::string(s), &used);
    if (used != s.size() || !(v >= 0.0 && v <= 1.0)) return std::nullopt;
    return v;
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

gemm::TileTask make_task(std::size_t i, bool w8) {
  return {0, 0, i, w8 ? gemm::TilePrecision::kW4A8 : gemm::TilePrecision::kW4A4, w8 ? 2u : 1u};
}

// example18 | alt:N | list:8,4,... | random:N:FRAC8
std::optional<std::vector<gemm::TileTask>> parse_tiles_spec(std::string_view spec,
                                                            std::uint64_t seed) {
  if (spec == "example18") return sim::alternating_workload(18);
  const auto colon = spec.find(':');
  if (colon == std::string_view::npos) return std::nullopt;
  const auto kind = spec.substr(0, colon);
  const auto rest = spec.substr(colon + 1);
  if (kind == "alt") {
    const auto n = parse_size(rest);
    if (!n || *n == 0) return std::nullopt;
    return sim::alternating_workload(*n);
  }
  if (kind == "list") {
    std::vector<gemm::TileTask> tasks;
    std::size_t pos = 0;
    while (pos <= rest.size()) {
      const auto comma = std::min(rest.find(',', pos), rest.size());
      const auto item = rest.substr(pos, comma - pos);
      if (item != "4" && item != "8") return std::nullopt;
      tasks.push_back(make_task(tasks.size(), item == "8"));
      pos = comma + 1;
    }
    return tasks;
  }
  if (kind == "random") {
    const auto colon2 = rest.find(':');
    if (colon2 == std::string_view::npos) return std::nullopt;
    const auto n = parse_size(rest.substr(0, colon2));
    const auto frac = parse_fraction(rest.substr(colon2 + 1));
    if (!n || *n == 0 || !frac) return std::nullopt;
    Rng rng(seed);
    std::vector<gemm::TileTask> tasks;
    for (std::size_t i = 0; i < *n; ++i) tasks.push_back(make_task(i, rng.uniform() < *frac));
    return tasks;
  }
  return std::nullopt;
}

std::optional<sim::Strategy> parse_strategy(std::string_view s) {
  for (auto st : {sim::Strategy::kW4A8Uniform, sim::Strategy::kNaive, sim::Strategy::kFinalBarrier,
                  sim::Strategy::kRemap, sim::Strategy::kStealing}) {
    if (s == sim::to_string(st)) return st;
  }
  return std::nullopt;
}

bool ordered(const std::vector<sim::StrategyRow>& rows) {
  // rows: uniform, naive, final-barrier, remap, stealing
  return rows[1].makespan >= rows[2].makespan && rows[2].makespan >= rows[3].makespan &&
         rows[3].makespan >= rows[4].makespan;
}

int cmd_simulate(const SimulateOpts& o, std::ostream& out) {
  if (o.sms == 0) throw Failure(kUsage, "--sms must be positive");
  if (o.repeat == 0) throw Failure(kUsage, "--repeat must be positive");
  std::optional<sim::Strategy> only;
  if (o.strategy != "all") {
    only = parse_strategy(o.strategy);
    if (!only) throw Failure(kUsage, "unknown strategy \"" + o.strategy + "\"");
  }
  sim::SimConfig base;
  base.num_sms = o.sms;
  base.barrier_overhead = o.barrier_overhead;
  base.steal_granularity = o.steal_granularity;
  try {
    base.validate();
  } catch (const Error& e) {
    throw Failure(kUsage, e.what());
  }
  if (!parse_tiles_spec(o.tiles_spec, o.seed)) {
    throw Failure(kUsage, "malformed --tiles-spec \"" + o.tiles_spec +
                              "\" (expected example18, alt:N, list:8,4,... or random:N:FRAC8)");
  }

  auto select = [&](const std::vector<sim::StrategyRow>& rows) {
    std::vector<sim::StrategyRow> keep;
    for (const auto& r : rows) {
      if (!only || r.strategy == *only) keep.push_back(r);
    }
    return keep;
  };

  int code = kOk;
  if (o.repeat == 1) {
    const auto tasks = *parse_tiles_spec(o.tiles_spec, o.seed);
    const auto rows = sim::compare_strategies(tasks, base);
    out << (o.csv ? sim::format_csv(select(rows)) : sim::format_table(select(rows)));
    if (!o.timeline.empty()) {
      json tl = json::object();
      auto uniform = tasks;
      for (auto& t : uniform) t.precision = gemm::TilePrecision::kW4A8;
      for (const auto& r : select(rows)) {
        const auto cfg = sim::strategy_config(r.strategy, base);
        const auto rep =
            sim::simulate(r.strategy == sim::Strategy::kW4A8Uniform ? uniform : tasks, cfg);
        json events = json::array();
        for (const auto& e : rep.timeline) {
          events.push_back(
              {{"sm", e.sm}, {"task", e.task}, {"start", e.start}, {"end", e.end}, {"stolen", e.stolen}});
        }
        tl[sim::to_string(r.strategy)] = {{"makespan", rep.makespan}, {"events", events}};
      }
      try {
        io::write_text(o.timeline, io::dump(tl));
      } catch (const Error& e) {
        throw Failure(kDataError, e.what());
      }
    }
  } else {
    std::size_t ok = 0;
    out << "seed,naive,final-barrier,remap,stealing,ordered\n";
    for (std::size_t r = 0; r < o.repeat; ++r) {
      const auto tasks = *parse_tiles_spec(o.tiles_spec, o.seed + r);
      const auto rows = sim::compare_strategies(tasks, base);
      const bool good = ordered(rows);
      ok += good ? 1 : 0;
      out << o.seed + r << ',' << rows[1].makespan << ',' << rows[2].makespan << ','
          << rows[3].makespan << ',' << rows[4].makespan << ',' << (good ? "yes" : "no") << '\n';
    }
    out << "dominance_ok=" << ok << '/' << o.repeat << '\n';
    if (ok != o.repeat) code = kCheckFailed;
  }

  write_manifest(o.manifest, manifest_for("simulate",
                                          {{"sms", o.sms},
                                           {"tiles_spec", o.tiles_spec},
                                           {"strategy", o.strategy},
                                           {"repeat", o.repeat},
                                           {"barrier_overhead", o.barrier_overhead},
                                           {"steal_granularity", o.steal_granularity}},
                                          o.seed));
  return code;
}

int cmd_demo_forward(const DemoOpts& o, std::ostream& out) {
  if (o.config != "tiny") throw Failure(kUsage, "unknown --config \"" + o.config + "\"");
  if (o.prompt_len == 0) throw Failure(kUsage, "--prompt-len must be positive");
  const std::size_t workers = effective_workers(o.workers);
  model::ModelConfig cfg = model::ModelConfig::tiny();
  cfg.prompt_len = o.prompt_len;
  cfg.max_seq_len = std::max(cfg.max_seq_len, o.prompt_len + o.steps);

  const std::size_t total = o.prompt_len + o.steps;
  const auto channels = model::default_outlier_channels(cfg.hidden, o.seed + 7);
  const auto weights = model::ModelWeights::random(cfg, o.seed + 1);
  std::vector<model::Tokens> calib;
  for (std::uint64_t i = 0; i < 4; ++i) {
    calib.push_back(model::synthetic_tokens(cfg.batch, total, cfg.hidden, o.seed + 100 + i, channels));
  }
  const auto qm = model::quantize_model(weights, calib);
  const auto seq = model::synthetic_tokens(cfg.batch, total, cfg.hidden, o.seed + 5, channels);
  const auto prompt = seq.slice(0, o.prompt_len);

  model::ReferenceModel ref(weights);
  const auto ref_logits = ref.prefill(prompt);
  auto res = model::prefill(qm, prompt, workers);

  out << "model: H=" << cfg.hidden << " heads=" << cfg.heads << " layers=" << cfg.layers
      << " prompt=" << o.prompt_len << " steps=" << o.steps << '\n';
  out << "eight_bit_blocks:";
  for (const auto& l : qm.layers) {
    out << ' ' << l.qkv.map.eight_bit_blocks() << '/' << l.o.map.eight_bit_blocks() << '/'
        << l.up.map.eight_bit_blocks() << '/' << l.down.map.eight_bit_blocks();
  }
  out << "\nstep,cache_len,rel_err\n" << std::scientific << std::setprecision(4);
  out << "prefill," << res.cache.length(0) << ','
      << gemm::relative_frobenius_error(res.logits.x, ref_logits.x) << '\n';
  for (std::size_t s = 0; s < o.steps; ++s) {
    const auto tok = seq.slice(o.prompt_len + s, 1);
    const auto a = ref.step(tok);
    const auto b = model::generate_step(qm, res.cache, tok, workers);
    out << s + 1 << ',' << res.cache.length(0) << ',' << gemm::relative_frobenius_error(b.x, a.x)
        << '\n';
  }
  out << std::defaultfloat;

  const auto fp_prompt = model::kv_memory_footprint(cfg, o.prompt_len);
  const auto fp_total = model::kv_memory_footprint(cfg, total);
  out << "kv_footprint,seq_len,payload_bytes,param_bytes,total_bytes,fp16_payload_bytes\n";
  out << "prompt," << o.prompt_len << ',' << fp_prompt.payload_bytes << ',' << fp_prompt.param_bytes
      << ',' << fp_prompt.total() << ',' << fp_prompt.fp16_payload_bytes << '\n';
  out << "generated," << o.steps << ',' << fp_total.payload_bytes - fp_prompt.payload_bytes << ",0,"
      << fp_total.payload_bytes - fp_prompt.payload_bytes << ','
      << fp_total.fp16_payload_bytes - fp_prompt.fp16_payload_bytes << '\n';
  out << "total," << total << ',' << fp_total.payload_bytes << ',' << fp_total.param_bytes << ','
      << fp_total.total() << ',' << fp_total.fp16_payload_bytes << '\n';
  out << "measured," << res.cache.length(0) << ',' << res.cache.payload_bytes() << ','
      << res.cache.param_bytes() << ',' << res.cache.payload_bytes() + res.cache.param_bytes()
      << ",-\n";

  write_manifest(o.manifest, manifest_for("demo-forward",
                                          {{"config", o.config},
                                           {"steps", o.steps},
                                           {"prompt_len", o.prompt_len},
                                           {"workers", workers}},
                                          o.seed));
  return kOk;
}

}  // namespace

std::uint64_t hash_doubles(std::span<const double> values) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (double v : values) {
    const auto bits = std::bit_cast<std::uint64_t>(v);
    for (int i = 0; i < 8; ++i) {
      h ^= (bits >> (8 * i)) & 0xFF;
      h *= 0x100000001b3ULL;
    }
  }
  return h;
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"w4ax: mixed-precision INT4 quantization toolkit"};
  app.require_subcommand(1);
  app.set_version_flag("--version", io::kToolVersion);

  CalibrateOpts co;
  auto* cal = app.add_subcommand("calibrate", "Build an FMPQ precision map from activations");
  cal->add_option("--input", co.inputs, "CMTA activation files [rows, channels]");
  cal->add_flag("--synthetic", co.synthetic, "Use the seeded synthetic generator");
  cal->add_option("--channels", co.channels, "Synthetic channel count");
  cal->add_option("--outliers", co.outliers, "Synthetic outlier channel count");
  cal->add_option("--rows", co.rows, "Synthetic sample rows");
  cal->add_option("--seed", co.seed, "Generator seed");
  cal->add_option("--theta", co.theta, "Outlier threshold over the median score");
  cal->add_option("--k", co.k, "Block size");
  cal->add_option("--out", co.out, "Precision-map JSON output")->required();
  cal->add_option("--stats-out", co.stats_out, "Calibration statistics JSON output");
  cal->add_option("--manifest", co.manifest, "Write a run manifest");

  QuantizeOpts qo;
  auto* qz = app.add_subcommand("quantize", "Quantize and pack weights to CMTQ");
  qz->add_option("--weights", qo.weights, "CMTA weights [K, N]")->required();
  qz->add_option("--map", qo.map, "Precision-map JSON")->required();
  qz->add_option("--out", qo.out, "CMTQ output")->required();
  qz->add_flag("--interleave", qo.interleave, "Apply the 4/16 fragment interleave");
  qz->add_option("--group-size", qo.group_size, "Weight group size along K");
  qz->add_option("--dequantize-out", qo.dequantize_out, "Write dequantized weights as CMTA");
  qz->add_option("--manifest", qo.manifest, "Write a run manifest");

  GemmOpts go;
  auto* gm = app.add_subcommand("gemm", "Run the mixed-precision GEMM on synthetic operands");
  gm->add_option("--m", go.m, "Rows of the activation");
  gm->add_option("--n", go.n, "Output channels");
  gm->add_option("--k", go.k, "Reduction length");
  gm->add_option("--workers", go.workers, "Worker threads (COMET_WORKERS overrides)");
  gm->add_flag("--check", go.check, "Verify against the f64 oracle");
  gm->add_option("--seed", go.seed, "Generator seed");
  gm->add_option("--outliers", go.outliers, "Planted outlier channels");
  gm->add_option("--theta", go.theta, "Outlier threshold");
  gm->add_option("--block", go.block, "FMPQ block size");
  gm->add_option("--manifest", go.manifest, "Write a run manifest");

  SimulateOpts so;
  auto* sm = app.add_subcommand("simulate", "Compare tile scheduling strategies");
  sm->add_option("--sms", so.sms, "Simulated SM count");
  sm->add_option("--tiles-spec", so.tiles_spec, "example18 | alt:N | list:8,4,... | random:N:FRAC8");
  sm->add_option("--strategy", so.strategy,
                 "all | w4a8-uniform | naive | final-barrier | remap | stealing");
  sm->add_flag("--csv", so.csv, "CSV instead of an aligned table");
  sm->add_option("--timeline", so.timeline, "Write the event timeline as JSON");
  sm->add_option("--seed", so.seed, "Seed for random tile specs");
  sm->add_option("--repeat", so.repeat, "Sweep seeds and check the dominance ordering");
  sm->add_option("--barrier-overhead", so.barrier_overhead, "Cost of one barrier");
  sm->add_option("--steal-granularity", so.steal_granularity, "Fraction of a tile a thief takes");
  sm->add_option("--manifest", so.manifest, "Write a run manifest");

  DemoOpts dopt;
  auto* demo = app.add_subcommand("demo-forward", "Toy model prefill + decode vs reference");
  demo->add_option("--config", dopt.config, "Model config (tiny)");
  demo->add_option("--steps", dopt.steps, "Generation steps");
  demo->add_option("--prompt-len", dopt.prompt_len, "Prompt length");
  demo->add_option("--seed", dopt.seed, "Seed");
  demo->add_option("--workers", dopt.workers, "Worker threads (COMET_WORKERS overrides)");
  demo->add_option("--manifest", dopt.manifest, "Write a run manifest");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*cal) return cmd_calibrate(co, out);
    if (*qz) return cmd_quantize(qo, out);
    if (*gm) return cmd_gemm(go, out);
    if (*sm) return cmd_simulate(so, out);
    if (*demo) return cmd_demo_forward(dopt, out);
  } catch (const Failure& f) {
    err << "error: " << f.message() << '\n';
    return f.code();
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kDataError;
  }
  return kUsage;
}

}  // namespace w4ax::cli
