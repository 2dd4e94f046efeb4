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

// Data-parallel inner loops. Each kernel has a scalar reference version and
// optional AVX2 (x86-64) and NEON (aarch64) versions. The active table is
// chosen once at startup from CPU features; every variant must produce
// bit-identical results to the scalar reference.

#pragma once

#include <cstddef>
#include <cstdint>
#include <string_view>
#include <vector>

namespace w4ax::kernels {

// Converts one 16-bit word holding four int4 values in swapped nibble order
// (bits [0-3]=w0, [4-7]=w2, [8-11]=w1, [12-15]=w3) into four int8 bytes
// holding 16*w0, 16*w1, 16*w2, 16*w3. Exactly two mask-and-shift word
// operations; the 16x factor is folded into the scale by the caller.
constexpr std::uint32_t convert_word_i4_to_i8(std::uint16_t word) noexcept {
  const auto lo = static_cast<std::uint16_t>((word << 4) & 0xF0F0u);  // (16*w0, 16*w1)
  const auto hi = static_cast<std::uint16_t>(word & 0xF0F0u);         // (16*w2, 16*w3)
  return static_cast<std::uint32_t>(lo) | (static_cast<std::uint32_t>(hi) << 16);
}

struct KernelTable {
  std::string_view name;

  // `words` little-endian 16-bit words in swapped order; writes 4*num_words
  // int8 values, each 16x the stored nibble.
  void (*convert_i4_to_i8)(const std::uint8_t* words, std::size_t num_words, std::int8_t* out);

  // Same input; writes the sign-extended nibble values (16x result >> 4).
  void (*unpack_i4_swapped)(const std::uint8_t* words, std::size_t num_words, std::int8_t* out);

  // Exact int8 dot product with 32-bit accumulation.
  std::int32_t (*dot_i8)(const std::int8_t* a, const std::int8_t* b, std::size_t n);

  // q = clamp(round_half_away(x / scale) + zero_point, qmin, qmax).
  // Inputs must be finite; callers validate.
  void (*quantize_f64)(const double* x, std::size_t n, double scale, std::int32_t zero_point,
                       std::int32_t qmin, std::int32_t qmax, std::int8_t* out);
};

const KernelTable& scalar_table() noexcept;

// nullptr when the variant is not compiled in or the CPU lacks the feature.
const KernelTable* avx2_table() noexcept;
const KernelTable* neon_table() noexcept;

// All tables usable on this machine, scalar first.
std::vector<const KernelTable*> available_tables();

// Table used by the engine. Defaults to the widest available variant; the
// W4AX_KERNELS environment variable ("scalar", "avx2", "neon") overrides.
const KernelTable& active() noexcept;

// Forces a variant by name; returns false if unavailable.
bool select(std::string_view name) noexcept;

}  // namespace w4ax::kernels
