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

// Fixed tensors behind the committed golden files. Every value is an
// integer code or a power-of-two scale, so the encoded bytes do not depend
// on floating-point rounding anywhere.

#pragma once

#include <string>
#include <vector>

#include "w4ax/formats.hpp"

namespace w4ax::golden {

struct Case {
  std::string file;
  io::CmtqTensor tensor;
};

inline std::vector<std::int8_t> codes(std::size_t n, int mul, int add) {
  std::vector<std::int8_t> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = static_cast<std::int8_t>(static_cast<int>((i * mul + add) % 16) - 8);
  return v;
}

inline std::vector<quant::QuantParams> sym_params(std::size_t n) {
  std::vector<quant::QuantParams> p;
  for (std::size_t i = 0; i < n; ++i) p.push_back({std::ldexp(1.0, static_cast<int>(i % 7) - 4), 0, 4, quant::Scheme::kSymmetric});
  return p;
}

inline std::vector<Case> cmtq_cases() {
  std::vector<Case> out;
  {
    // grouped weights [N = 4, K = 8], group 4, swapped order
    io::CmtqTensor t;
    t.dims = {4, 8};
    t.payload = layout::pack_nibbles(codes(32, 5, 3), layout::NibbleOrder::kSwapped);
    t.layout = {quant::Granularity::kPerGroup, 4};
    t.params = sym_params(8);
    out.push_back({"weights_4x8_g4_swapped.cmtq", t});
  }
  {
    // grouped weights [N = 3, K = 32] with the 4/16 fragment interleave
    io::CmtqTensor t;
    t.dims = {3, 32};
    t.payload = layout::interleave_weights(codes(96, 7, 1), 32);
    t.layout = {quant::Granularity::kPerGroup, 16};
    t.params = sym_params(6);
    out.push_back({"weights_3x32_g16_interleaved.cmtq", t});
  }
  {
    // KV-style [T = 5, H = 6], per-channel asymmetric, linear order
    io::CmtqTensor t;
    t.dims = {5, 6};
    std::vector<std::int8_t> c = codes(30, 3, 2);
    t.payload = layout::pack_nibbles(c, layout::NibbleOrder::kLinear);
    t.layout = {quant::Granularity::kPerChannel, 0};
    for (int ch = 0; ch < 6; ++ch) t.params.push_back({std::ldexp(1.0, -ch), ch + 5, 4, quant::Scheme::kAsymmetric});
    out.push_back({"kv_5x6_channel_asym_linear.cmtq", t});
  }
  {
    // rank 3 [2, 3, 3] per-tensor, odd element count
    io::CmtqTensor t;
    t.dims = {2, 3, 3};
    t.payload = layout::pack_nibbles(codes(18, 11, 0), layout::NibbleOrder::kLinear);
    t.layout = {quant::Granularity::kPerTensor, 0};
    t.params = {{0.125, 0, 4, quant::Scheme::kSymmetric}};
    out.push_back({"act_2x3x3_tensor_linear.cmtq", t});
  }
  return out;
}

inline io::DenseTensor cmta_case() {
  io::DenseTensor t;
  t.dims = {3, 4};
  for (int i = 0; i < 12; ++i) t.data.push_back(static_cast<float>(i - 6) * 0.5f);
  return t;
}

inline const char* kCmtaFile = "dense_3x4.cmta";

}  // namespace w4ax::golden
