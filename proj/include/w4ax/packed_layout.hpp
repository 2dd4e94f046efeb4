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

// Sub-byte storage for int4 values.
//
// Values are grouped four at a time into little-endian 16-bit words. In
// linear order element j of a group sits at bits [4j, 4j+4). In swapped
// order the two middle slots are exchanged:
//
//   bits   15..12  11..8   7..4   3..0
//   slot     w3     w1      w2     w0
//
// so that (word << 4) & 0xF0F0 yields the bytes (16*w0, 16*w1) and
// word & 0xF0F0 yields (16*w2, 16*w3): a two-operation widening to int8
// where every value comes out multiplied by 16. Folding 1/16 into the scale
// restores the original magnitude.
//
// Optional fragment interleave permutes positions inside spans of `s`
// elements. A span holds s/f fragments; consumer h reads fragments h and
// h + s/(2f). Storing the fragments in the order 0, s/(2f), 1, s/(2f)+1, ...
// turns each consumer's pair into one contiguous run. For f = 4, s = 16 the
// stored order is [0,4) [8,12) [4,8) [12,16).

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "w4ax/quant_core.hpp"

namespace w4ax::layout {

enum class NibbleOrder : std::uint8_t { kLinear = 0, kSwapped = 1 };

struct Interleave {
  std::size_t fragment = 0;  // 0 = no interleave
  std::size_t span = 0;

  bool enabled() const noexcept { return fragment != 0; }
  bool operator==(const Interleave&) const = default;
};

inline constexpr Interleave kNoInterleave{};
inline constexpr Interleave kFragmentInterleave{4, 16};

class PackedNibbleBuffer {
 public:
  PackedNibbleBuffer() = default;
  PackedNibbleBuffer(std::vector<std::uint8_t> bytes, std::size_t num_elements, NibbleOrder order,
                     Interleave interleave = kNoInterleave);

  std::span<const std::uint8_t> bytes() const noexcept { return bytes_; }
  std::size_t num_elements() const noexcept { return num_elements_; }
  NibbleOrder order() const noexcept { return order_; }
  const Interleave& interleave() const noexcept { return interleave_; }

  /// Raw two's-complement nibble stored at physical slot `i`.
  std::int8_t nibble_at(std::size_t i) const noexcept;

  bool operator==(const PackedNibbleBuffer&) const = default;

 private:
  std::vector<std::uint8_t> bytes_;
  std::size_t num_elements_ = 0;
  NibbleOrder order_ = NibbleOrder::kLinear;
  Interleave interleave_;
};

/// Bit offset of logical element j within its 16-bit word.
constexpr unsigned nibble_shift(std::size_t j, NibbleOrder order) noexcept {
  const unsigned slot = static_cast<unsigned>(j & 3u);
  if (order == NibbleOrder::kSwapped && (slot == 1 || slot == 2)) return 4u * (3u - slot);
  return 4u * slot;
}

/// Packs int4 values; throws RangeError for values outside [-8, 7]. Linear
/// order takes ceil(n / 2) bytes, swapped order whole 16-bit words
/// (2 * ceil(n / 4) bytes). Tails are padded with zero nibbles.
PackedNibbleBuffer pack_nibbles(std::span<const std::int8_t> values, NibbleOrder order);

/// Exact inverse of pack_nibbles (and of interleave_weights), sign-extending
/// every nibble.
std::vector<std::int8_t> unpack_nibbles(const PackedNibbleBuffer& buf);

/// out[i] = 16 * w_i as int8 via two word operations per four values.
/// Requires swapped order without interleave (LayoutError otherwise).
std::vector<std::int8_t> fast_convert_i4_to_i8(const PackedNibbleBuffer& buf);

/// Scale folded for the 16x produced by fast_convert_i4_to_i8. Symmetric
/// parameters only (InputError otherwise); the power-of-two divide is exact.
quant::QuantParams fold_conversion_scale(const quant::QuantParams& params);

/// Physical slot of logical position `i` under fragment interleave (f, s).
std::size_t interleaved_position(std::size_t i, std::size_t fragment, std::size_t span) noexcept;

/// Permutes positions within each span; DimensionError unless the length is
/// divisible by `span` and `span` is a multiple of 2 * fragment.
std::vector<std::int8_t> interleave(std::span<const std::int8_t> values, std::size_t fragment = 4,
                                    std::size_t span = 16);
std::vector<std::int8_t> deinterleave(std::span<const std::int8_t> values,
                                      std::size_t fragment = 4, std::size_t span = 16);

/// Interleaves a row-major int4 matrix along its rows (the reduction axis)
/// and packs it. `cols` must be divisible by `span`.
PackedNibbleBuffer interleave_weights(std::span<const std::int8_t> values, std::size_t cols,
                                      std::size_t fragment = 4, std::size_t span = 16,
                                      NibbleOrder order = NibbleOrder::kSwapped);

}  // namespace w4ax::layout
