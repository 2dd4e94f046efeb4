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

#include <algorithm>
#include <cmath>
#include <cstring>

#include "w4ax/kernels/kernels.hpp"

namespace w4ax::kernels {
namespace {

inline std::uint16_t load_word(const std::uint8_t* p) noexcept {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

void convert_i4_to_i8_scalar(const std::uint8_t* words, std::size_t num_words, std::int8_t* out) {
  for (std::size_t i = 0; i < num_words; ++i) {
    const std::uint32_t packed = convert_word_i4_to_i8(load_word(words + 2 * i));
    for (int b = 0; b < 4; ++b) {
      out[4 * i + b] = static_cast<std::int8_t>(static_cast<std::uint8_t>(packed >> (8 * b)));
    }
  }
}

void unpack_i4_swapped_scalar(const std::uint8_t* words, std::size_t num_words, std::int8_t* out) {
  convert_i4_to_i8_scalar(words, num_words, out);
  for (std::size_t i = 0; i < 4 * num_words; ++i) {
    out[i] = static_cast<std::int8_t>(out[i] >> 4);
  }
}

std::int32_t dot_i8_scalar(const std::int8_t* a, const std::int8_t* b, std::size_t n) {
  std::int32_t acc = 0;
  for (std::size_t i = 0; i < n; ++i) {
    acc += static_cast<std::int32_t>(a[i]) * static_cast<std::int32_t>(b[i]);
  }
  return acc;
}

void quantize_f64_scalar(const double* x, std::size_t n, double scale, std::int32_t zero_point,
                         std::int32_t qmin, std::int32_t qmax, std::int8_t* out) {
  const double lo = qmin;
  const double hi = qmax;
  for (std::size_t i = 0; i < n; ++i) {
    // std::round is round-half-away-from-zero.
    const double q = std::clamp(std::round(x[i] / scale) + zero_point, lo, hi);
    out[i] = static_cast<std::int8_t>(q);
  }
}

constexpr KernelTable kScalar{
    "scalar",
    convert_i4_to_i8_scalar,
    unpack_i4_swapped_scalar,
    dot_i8_scalar,
    quantize_f64_scalar,
};

}  // namespace

const KernelTable& scalar_table() noexcept { return kScalar; }

}  // namespace w4ax::kernels
