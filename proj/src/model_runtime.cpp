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

#include "w4ax/model_runtime.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>

#include "w4ax/random.hpp"

namespace w4ax::model {

using quant::QuantParams;

void ModelConfig::validate() const {
  if (batch == 0 || prompt_len == 0 || hidden == 0 || heads == 0 || layers == 0 ||
      ffn_mult == 0 || max_seq_len == 0) {
    throw InputError("model config sizes must be positive");
  }
  if (hidden % heads != 0) throw InputError("hidden size must be divisible by the head count");
  if (hidden % 2 != 0) throw InputError("hidden size must be even for nibble packing");
  if (prompt_len > max_seq_len) throw InputError("prompt length exceeds max_seq_len");
}

ModelConfig ModelConfig::tiny() {
  ModelConfig cfg;
  cfg.batch = 1;
  cfg.prompt_len = 16;
  cfg.hidden = 256;
  cfg.heads = 4;
  cfg.layers = 2;
  cfg.ffn_mult = 2;
  cfg.max_seq_len = 64;
  return cfg;
}

Tokens Tokens::slice(std::size_t begin, std::size_t count) const {
  if (begin + count > length) throw DimensionError("token slice out of range");
  Tokens out(batch, count, hidden());
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t t = 0; t < count; ++t) {
      std::ranges::copy(row(b, begin + t), out.row(b, t).begin());
    }
  }
  return out;
}

Tokens Tokens::concat(const Tokens& a, const Tokens& b) {
  if (a.batch != b.batch || a.hidden() != b.hidden()) {
    throw DimensionError("cannot concatenate token batches of different shape");
  }
  Tokens out(a.batch, a.length + b.length, a.hidden());
  for (std::size_t s = 0; s < a.batch; ++s) {
    for (std::size_t t = 0; t < a.length; ++t) std::ranges::copy(a.row(s, t), out.row(s, t).begin());
    for (std::size_t t = 0; t < b.length; ++t) {
      std::ranges::copy(b.row(s, t), out.row(s, a.length + t).begin());
    }
  }
  return out;
}

namespace {

MatrixD gaussian_matrix(std::size_t rows, std::size_t cols, double stddev, Rng& rng) {
  MatrixD m(rows, cols);
  for (double& v : m.data()) v = stddev * rng.normal();
  return m;
}

double silu(double x) { return x / (1.0 + std::exp(-x)); }

void check_tokens(const ModelConfig& cfg, const Tokens& t) {
  if (t.batch != cfg.batch || t.hidden() != cfg.hidden || t.x.rows() != t.batch * t.length) {
    throw DimensionError("expected tokens of shape [" + std::to_string(cfg.batch) + ", T, " +
                         std::to_string(cfg.hidden) + "]");
  }
  if (t.length == 0) throw DimensionError("token batch is empty");
}

enum class Site { kQkv, kO, kUp, kDown };

// The per-token forward shared by the quantized runtime and the reference.
// Ops supplies linear(layer, site, x), append(layer, b, k, v),
// keys(layer, b), values(layer, b) and observe(layer, site, x).
template <typename Ops>
Tokens run_forward(const ModelConfig& cfg, const Tokens& in, Ops& ops) {
  const std::size_t H = cfg.hidden;
  Tokens h = in;
  for (std::size_t l = 0; l < cfg.layers; ++l) {
    MatrixD xn = rms_norm(h.x);
    ops.observe(l, Site::kQkv, xn);
    const MatrixD qkv = ops.linear(l, Site::kQkv, xn);

    MatrixD attn(h.x.rows(), H);
    for (std::size_t b = 0; b < h.batch; ++b) {
      for (std::size_t t = 0; t < h.length; ++t) {
        const auto r = qkv.row(b * h.length + t);
        ops.append(l, b, r.subspan(H, H), r.subspan(2 * H, H));
        const auto out = attend(r.subspan(0, H), ops.keys(l, b), ops.values(l, b), cfg.heads);
        std::ranges::copy(out, attn.row(b * h.length + t).begin());
      }
    }
    ops.observe(l, Site::kO, attn);
    const MatrixD o = ops.linear(l, Site::kO, attn);
    for (std::size_t i = 0; i < h.x.size(); ++i) h.x.data()[i] += o.data()[i];

    xn = rms_norm(h.x);
    ops.observe(l, Site::kUp, xn);
    MatrixD u = ops.linear(l, Site::kUp, xn);
    for (double& v : u.data()) v = silu(v);
    ops.observe(l, Site::kDown, u);
    const MatrixD d = ops.linear(l, Site::kDown, u);
    for (std::size_t i = 0; i < h.x.size(); ++i) h.x.data()[i] += d.data()[i];
  }
  return h;
}

const MatrixD& weight_of(const LayerWeights& w, Site s) {
  switch (s) {
    case Site::kQkv:
      return w.wqkv;
    case Site::kO:
      return w.wo;
    case Site::kUp:
      return w.w1;
    case Site::kDown:
      return w.w2;
  }
  return w.wqkv;
}

const QuantLinear& linear_of(const QuantLayer& q, Site s) {
  switch (s) {
    case Site::kQkv:
      return q.qkv;
    case Site::kO:
      return q.o;
    case Site::kUp:
      return q.up;
    case Site::kDown:
      return q.down;
  }
  return q.qkv;
}

struct QuantOps {
  const QuantizedModel& model;
  QuantKVCache& cache;
  std::size_t workers;

  MatrixD linear(std::size_t l, Site s, const MatrixD& x) {
    const QuantLinear& q = linear_of(model.layers[l], s);
    return gemm::mixed_gemm(x, q.weights, q.map, {}, workers);
  }
  void append(std::size_t l, std::size_t b, std::span<const double> k,
              std::span<const double> v) {
    cache.append(l, b, k, v);
  }
  MatrixD keys(std::size_t l, std::size_t b) { return cache.keys(l, b); }
  MatrixD values(std::size_t l, std::size_t b) { return cache.values(l, b); }
  void observe(std::size_t, Site, const MatrixD&) {}
};

MatrixD rows_to_matrix(const std::vector<std::vector<double>>& rows, std::size_t cols) {
  MatrixD m(rows.size(), cols);
  for (std::size_t r = 0; r < rows.size(); ++r) std::ranges::copy(rows[r], m.row(r).begin());
  return m;
}

}  // namespace

ModelWeights ModelWeights::random(const ModelConfig& cfg, std::uint64_t seed,
                                  double residual_gain) {
  cfg.validate();
  if (residual_gain < 0.0) throw InputError("residual gain must be non-negative");
  if (residual_gain == 0.0) residual_gain = 1.0 / std::sqrt(2.0 * static_cast<double>(cfg.layers));
  Rng rng(seed);
  const std::size_t H = cfg.hidden;
  const std::size_t F = cfg.ffn_dim();
  const double sh = 1.0 / std::sqrt(static_cast<double>(H));
  const double sf = 1.0 / std::sqrt(static_cast<double>(F));
  ModelWeights w;
  w.cfg = cfg;
  for (std::size_t l = 0; l < cfg.layers; ++l) {
    LayerWeights lw;
    lw.wqkv = gaussian_matrix(H, 3 * H, sh, rng);
    lw.wo = gaussian_matrix(H, H, residual_gain * sh, rng);
    lw.w1 = gaussian_matrix(H, F, sh, rng);
    lw.w2 = gaussian_matrix(F, H, residual_gain * sf, rng);
    w.layers.push_back(std::move(lw));
  }
  return w;
}

ModelWeights ModelWeights::zeros(const ModelConfig& cfg) {
  cfg.validate();
  const std::size_t H = cfg.hidden;
  const std::size_t F = cfg.ffn_dim();
  ModelWeights w;
  w.cfg = cfg;
  for (std::size_t l = 0; l < cfg.layers; ++l) {
    w.layers.push_back({MatrixD(H, 3 * H), MatrixD(H, H), MatrixD(H, F), MatrixD(F, H)});
  }
  return w;
}

Tokens synthetic_tokens(std::size_t batch, std::size_t length, std::size_t hidden,
                        std::uint64_t seed, std::span<const std::size_t> outlier_channels,
                        double outlier_scale) {
  Rng rng(seed);
  Tokens t(batch, length, hidden);
  for (std::size_t r = 0; r < t.x.rows(); ++r) {
    auto row = t.x.row(r);
    for (double& v : row) v = rng.normal();
    for (std::size_t c : outlier_channels) {
      if (c >= hidden) throw InputError("outlier channel out of range");
      const double sign = rng.uniform() < 0.5 ? -1.0 : 1.0;
      row[c] = sign * outlier_scale * (1.0 + rng.uniform());
    }
  }
  return t;
}

std::vector<std::size_t> default_outlier_channels(std::size_t hidden, std::uint64_t seed,
                                                  std::size_t count) {
  if (count > hidden) throw InputError("more outlier channels than channels");
  std::vector<std::size_t> all(hidden);
  std::iota(all.begin(), all.end(), std::size_t{0});
  Rng rng(seed);
  // partial Fisher-Yates
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.below(hidden - i));
    std::swap(all[i], all[j]);
  }
  all.resize(count);
  std::ranges::sort(all);
  return all;
}

MatrixD rms_norm(const MatrixD& x, double eps) {
  MatrixD out(x.rows(), x.cols());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    const auto in = x.row(r);
    double ss = 0.0;
    for (double v : in) ss += v * v;
    const double inv = 1.0 / std::sqrt(ss / static_cast<double>(x.cols()) + eps);
    auto o = out.row(r);
    for (std::size_t c = 0; c < x.cols(); ++c) o[c] = in[c] * inv;
  }
  return out;
}

std::vector<double> attend(std::span<const double> q, const MatrixD& keys, const MatrixD& values,
                           std::size_t heads, std::vector<double>* weights) {
  const std::size_t H = q.size();
  if (heads == 0 || H % heads != 0) throw InputError("hidden size not divisible by heads");
  if (keys.cols() != H || values.cols() != H || keys.rows() != values.rows()) {
    throw DimensionError("attention operands disagree in shape");
  }
  const std::size_t n = keys.rows();
  if (n == 0) throw DimensionError("attention over an empty cache");
  const std::size_t d = H / heads;
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(d));
  std::vector<double> out(H, 0.0);
  std::vector<double> p(n);
  if (weights) weights->assign(heads * n, 0.0);
  for (std::size_t h = 0; h < heads; ++h) {
    const std::size_t off = h * d;
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::size_t i = 0; i < d; ++i) s += q[off + i] * keys(j, off + i);
      p[j] = s * inv_sqrt_d;
      mx = std::max(mx, p[j]);
    }
    double sum = 0.0;
    for (double& v : p) {
      v = std::exp(v - mx);
      sum += v;
    }
    for (double& v : p) v /= sum;
    for (std::size_t j = 0; j < n; ++j) {
      for (std::size_t i = 0; i < d; ++i) out[off + i] += p[j] * values(j, off + i);
    }
    if (weights) std::ranges::copy(p, weights->begin() + static_cast<std::ptrdiff_t>(h * n));
  }
  return out;
}

// ---------------------------------------------------------------------------
// KV cache

QuantKVCache::QuantKVCache(const ModelConfig& cfg, std::vector<std::vector<QuantParams>> k_params,
                           std::vector<std::vector<QuantParams>> v_params)
    : cfg_(cfg), k_params_(std::move(k_params)), v_params_(std::move(v_params)) {
  cfg_.validate();
  if (k_params_.size() != cfg_.layers || v_params_.size() != cfg_.layers) {
    throw DimensionError("KV parameters must cover every layer");
  }
  for (std::size_t l = 0; l < cfg_.layers; ++l) {
    for (const auto* set : {&k_params_[l], &v_params_[l]}) {
      if (set->size() != cfg_.hidden) throw DimensionError("KV parameters must cover every channel");
      for (const QuantParams& p : *set) {
        quant::validate(p);
        if (p.bit_width != 4 || p.scheme != quant::Scheme::kAsymmetric) {
          throw InputError("KV cache parameters must be asymmetric INT4");
        }
      }
    }
  }
  stores_.resize(cfg_.layers * cfg_.batch * 2);
}

QuantKVCache::Store& QuantKVCache::store(std::size_t layer, std::size_t b, bool value) {
  if (layer >= cfg_.layers || b >= cfg_.batch) throw InputError("KV cache index out of range");
  return stores_[(layer * cfg_.batch + b) * 2 + (value ? 1 : 0)];
}

const QuantKVCache::Store& QuantKVCache::store(std::size_t layer, std::size_t b,
                                               bool value) const {
  if (layer >= cfg_.layers || b >= cfg_.batch) throw InputError("KV cache index out of range");
  return stores_[(layer * cfg_.batch + b) * 2 + (value ? 1 : 0)];
}

std::size_t QuantKVCache::length(std::size_t layer, std::size_t b) const {
  return store(layer, b, false).length;
}

std::size_t QuantKVCache::length(std::size_t b) const { return length(cfg_.layers - 1, b); }

void QuantKVCache::append(std::size_t layer, std::size_t b, std::span<const double> k,
                          std::span<const double> v) {
  if (k.size() != cfg_.hidden || v.size() != cfg_.hidden) {
    throw DimensionError("KV row length must equal the hidden size");
  }
  Store& ks = store(layer, b, false);
  Store& vs = store(layer, b, true);
  if (ks.length >= cfg_.max_seq_len) {
    throw CapacityError("KV cache full at " + std::to_string(cfg_.max_seq_len) + " positions");
  }
  auto put = [&](Store& s, std::span<const double> row, const std::vector<QuantParams>& params) {
    std::vector<std::int8_t> codes(row.size());
    for (std::size_t c = 0; c < row.size(); ++c) {
      codes[c] = static_cast<std::int8_t>(quant::quantize_value(row[c], params[c]) - 8);
    }
    const auto packed = layout::pack_nibbles(codes, layout::NibbleOrder::kLinear);
    s.bytes.insert(s.bytes.end(), packed.bytes().begin(), packed.bytes().end());
    ++s.length;
  };
  put(ks, k, k_params_[layer]);
  put(vs, v, v_params_[layer]);
}

MatrixD QuantKVCache::dequantize_store(const Store& s,
                                       const std::vector<QuantParams>& params) const {
  const std::size_t H = cfg_.hidden;
  const layout::PackedNibbleBuffer buf(s.bytes, s.length * H, layout::NibbleOrder::kLinear);
  MatrixD out(s.length, H);
  for (std::size_t r = 0; r < s.length; ++r) {
    for (std::size_t c = 0; c < H; ++c) {
      out(r, c) = quant::dequantize_value(buf.nibble_at(r * H + c) + 8, params[c]);
    }
  }
  return out;
}

MatrixD QuantKVCache::keys(std::size_t layer, std::size_t b) const {
  return dequantize_store(store(layer, b, false), k_params_.at(layer));
}

MatrixD QuantKVCache::values(std::size_t layer, std::size_t b) const {
  return dequantize_store(store(layer, b, true), v_params_.at(layer));
}

layout::PackedNibbleBuffer QuantKVCache::packed_keys(std::size_t layer, std::size_t b) const {
  const Store& s = store(layer, b, false);
  return {s.bytes, s.length * cfg_.hidden, layout::NibbleOrder::kLinear};
}

layout::PackedNibbleBuffer QuantKVCache::packed_values(std::size_t layer, std::size_t b) const {
  const Store& s = store(layer, b, true);
  return {s.bytes, s.length * cfg_.hidden, layout::NibbleOrder::kLinear};
}

std::size_t QuantKVCache::payload_bytes() const {
  std::size_t n = 0;
  for (const Store& s : stores_) n += s.bytes.size();
  return n;
}

std::size_t QuantKVCache::param_bytes() const {
  std::size_t n = 0;
  for (std::size_t l = 0; l < k_params_.size(); ++l) {
    n += (k_params_[l].size() + v_params_[l].size()) * kKvParamBytes;
  }
  return n;
}

KvFootprint kv_memory_footprint(const ModelConfig& cfg, std::size_t seq_len) {
  cfg.validate();
  const std::size_t elems = cfg.layers * 2 * cfg.batch * seq_len * cfg.hidden;
  KvFootprint f;
  f.payload_bytes = elems / 2;
  f.param_bytes = cfg.layers * 2 * cfg.hidden * kKvParamBytes;
  f.fp16_payload_bytes = elems * 2;
  return f;
}

// ---------------------------------------------------------------------------
// Quantized forward

ForwardResult prefill(const QuantizedModel& model, const Tokens& prompt, std::size_t workers) {
  const ModelConfig& cfg = model.cfg;
  check_tokens(cfg, prompt);
  if (prompt.length > cfg.max_seq_len) {
    throw CapacityError("prompt of " + std::to_string(prompt.length) + " tokens exceeds max_seq_len " +
                        std::to_string(cfg.max_seq_len));
  }
  std::vector<std::vector<QuantParams>> kp, vp;
  for (const QuantLayer& l : model.layers) {
    kp.push_back(l.k_params);
    vp.push_back(l.v_params);
  }
  ForwardResult res{Tokens{}, QuantKVCache(cfg, std::move(kp), std::move(vp))};
  QuantOps ops{model, res.cache, workers};
  res.logits = run_forward(cfg, prompt, ops);
  return res;
}

Tokens generate_step(const QuantizedModel& model, QuantKVCache& cache, const Tokens& token,
                     std::size_t workers) {
  const ModelConfig& cfg = model.cfg;
  check_tokens(cfg, token);
  if (token.length != 1) throw DimensionError("generate_step takes exactly one token per sequence");
  if (!(cache.config() == cfg)) throw InputError("cache belongs to a different model config");
  for (std::size_t b = 0; b < cfg.batch; ++b) {
    for (std::size_t l = 0; l < cfg.layers; ++l) {
      if (cache.length(l, b) != cache.length(b)) {
        throw ConsistencyError("KV cache layers hold different lengths");
      }
    }
    if (cache.length(b) >= cfg.max_seq_len) {
      throw CapacityError("KV cache full at " + std::to_string(cfg.max_seq_len) + " positions");
    }
  }
  QuantOps ops{model, cache, workers};
  return run_forward(cfg, token, ops);
}

// ---------------------------------------------------------------------------
// Reference and calibration

struct ReferenceModel::Observer {
  // [layer][site]
  std::vector<std::array<std::optional<quant::CalibStats>, 4>> sites;
  std::vector<std::optional<quant::CalibStats>> k, v;
};

ReferenceModel::ReferenceModel(ModelWeights weights) : w_(std::move(weights)) {
  const ModelConfig& cfg = w_.cfg;
  cfg.validate();
  if (w_.layers.size() != cfg.layers) throw DimensionError("weights do not match layer count");
  keys_.resize(cfg.layers * cfg.batch);
  values_.resize(cfg.layers * cfg.batch);
  lengths_.assign(cfg.batch, 0);
}

Tokens ReferenceModel::forward(const Tokens& in, Observer* obs) {
  const ModelConfig& cfg = w_.cfg;
  check_tokens(cfg, in);
  for (std::size_t b = 0; b < cfg.batch; ++b) {
    if (lengths_[b] + in.length > cfg.max_seq_len) {
      throw CapacityError("reference cache full at " + std::to_string(cfg.max_seq_len) +
                          " positions");
    }
  }
  struct RefOps {
    ReferenceModel& self;
    Observer* obs;

    MatrixD linear(std::size_t l, Site s, const MatrixD& x) {
      return gemm::matmul(x, weight_of(self.w_.layers[l], s));
    }
    void append(std::size_t l, std::size_t b, std::span<const double> k,
                std::span<const double> v) {
      const std::size_t i = l * self.w_.cfg.batch + b;
      self.keys_[i].emplace_back(k.begin(), k.end());
      self.values_[i].emplace_back(v.begin(), v.end());
      if (obs) {
        const MatrixD km(1, k.size(), std::vector<double>(k.begin(), k.end()));
        const MatrixD vm(1, v.size(), std::vector<double>(v.begin(), v.end()));
        obs->k[l] = quant::collect_calib_stats(std::span(&km, 1), obs->k[l]);
        obs->v[l] = quant::collect_calib_stats(std::span(&vm, 1), obs->v[l]);
      }
    }
    MatrixD keys(std::size_t l, std::size_t b) {
      return rows_to_matrix(self.keys_[l * self.w_.cfg.batch + b], self.w_.cfg.hidden);
    }
    MatrixD values(std::size_t l, std::size_t b) {
      return rows_to_matrix(self.values_[l * self.w_.cfg.batch + b], self.w_.cfg.hidden);
    }
    void observe(std::size_t l, Site s, const MatrixD& x) {
      if (!obs) return;
      auto& slot = obs->sites[l][static_cast<std::size_t>(s)];
      slot = quant::collect_calib_stats(std::span(&x, 1), slot);
    }
  };
  RefOps ops{*this, obs};
  Tokens out = run_forward(cfg, in, ops);
  for (std::size_t& len : lengths_) len += in.length;
  return out;
}

Tokens ReferenceModel::prefill(const Tokens& prompt) {
  for (auto& rows : keys_) rows.clear();
  for (auto& rows : values_) rows.clear();
  std::ranges::fill(lengths_, std::size_t{0});
  return forward(prompt, nullptr);
}

Tokens ReferenceModel::step(const Tokens& token) {
  if (token.length != 1) throw DimensionError("step takes exactly one token per sequence");
  return forward(token, nullptr);
}

QuantizedModel quantize_model(const ModelWeights& weights, std::span<const Tokens> calibration,
                              const CalibrationOptions& opts) {
  if (calibration.empty()) throw InputError("calibration needs at least one sequence");
  const ModelConfig& cfg = weights.cfg;
  ReferenceModel::Observer obs;
  obs.sites.resize(cfg.layers);
  obs.k.resize(cfg.layers);
  obs.v.resize(cfg.layers);
  for (const Tokens& seq : calibration) {
    ReferenceModel ref(weights);
    ref.forward(seq, &obs);
  }

  QuantizedModel qm;
  qm.cfg = cfg;
  for (std::size_t l = 0; l < cfg.layers; ++l) {
    QuantLayer ql;
    auto make = [&](Site s) {
      const auto& stats = *obs.sites[l][static_cast<std::size_t>(s)];
      QuantLinear q;
      q.map = fmpq::build_precision_map(stats, opts.theta, opts.block_size);
      q.weights =
          gemm::quantize_weights_for_map(weight_of(weights.layers[l], s), q.map, opts.group_size);
      return q;
    };
    ql.qkv = make(Site::kQkv);
    ql.o = make(Site::kO);
    ql.up = make(Site::kUp);
    ql.down = make(Site::kDown);
    ql.k_params = fmpq::kv_channel_params(*obs.k[l]);
    ql.v_params = fmpq::kv_channel_params(*obs.v[l]);
    qm.layers.push_back(std::move(ql));
  }
  return qm;
}

}  // namespace w4ax::model
