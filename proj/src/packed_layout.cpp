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

#include "w4ax/packed_layout.hpp"

#include <string>

#include "w4ax/kernels/kernels.hpp"

namespace w4ax::layout {
namespace {

// Swapped order places w1 in the high byte of its word, so swapped buffers
// always occupy whole words; linear buffers use ceil(n / 2) bytes.
std::size_t byte_length(std::size_t n, NibbleOrder order) {
  if (order == NibbleOrder::kSwapped) return 2 * ceil_div(n, 4);
  return ceil_div(n, 2);
}

void check_interleave(std::size_t length, std::size_t fragment, std::size_t span) {
  if (fragment == 0 || span == 0 || span % (2 * fragment) != 0) {
    throw DimensionError("interleave span " + std::to_string(span) +
                         " must be a positive multiple of 2 * fragment (" +
                         std::to_string(fragment) + ")");
  }
  if (length % span != 0) {
    throw DimensionError("length " + std::to_string(length) + " is not divisible by span " +
                         std::to_string(span));
  }
}

}  // namespace

PackedNibbleBuffer::PackedNibbleBuffer(std::vector<std::uint8_t> bytes, std::size_t num_elements,
                                       NibbleOrder order, Interleave interleave)
    : bytes_(std::move(bytes)), num_elements_(num_elements), order_(order), interleave_(interleave) {
  if (bytes_.size() != byte_length(num_elements_, order_)) {
    throw DimensionError("packed buffer of " + std::to_string(num_elements_) + " elements needs " +
                         std::to_string(byte_length(num_elements_, order_)) + " bytes, got " +
                         std::to_string(bytes_.size()));
  }
  if (interleave_.enabled()) check_interleave(num_elements_, interleave_.fragment, interleave_.span);
}

std::int8_t PackedNibbleBuffer::nibble_at(std::size_t i) const noexcept {
  const std::size_t word = i / 4;
  const unsigned shift = nibble_shift(i, order_);
  const unsigned w = bytes_[2 * word] | (2 * word + 1 < bytes_.size() ? bytes_[2 * word + 1] << 8 : 0);
  const int nib = static_cast<int>((w >> shift) & 0xFu);
  return static_cast<std::int8_t>(nib >= 8 ? nib - 16 : nib);
}

PackedNibbleBuffer pack_nibbles(std::span<const std::int8_t> values, NibbleOrder order) {
  std::vector<std::uint8_t> bytes(byte_length(values.size(), order), 0);
  for (std::size_t i = 0; i < values.size(); ++i) {
    const int v = values[i];
    if (v < -8 || v > 7) {
      throw RangeError("value " + std::to_string(v) + " at index " + std::to_string(i) +
                       " is outside int4 range [-8, 7]");
    }
    const unsigned bit = 16u * static_cast<unsigned>(i / 4) + nibble_shift(i, order);
    bytes[bit / 8] |= static_cast<std::uint8_t>((static_cast<unsigned>(v) & 0xFu) << (bit % 8));
  }
  return PackedNibbleBuffer(std::move(bytes), values.size(), order);
}

std::vector<std::int8_t> unpack_nibbles(const PackedNibbleBuffer& buf) {
  std::vector<std::int8_t> out(buf.num_elements());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = buf.nibble_at(i);
  if (buf.interleave().enabled()) {
    return deinterleave(out, buf.interleave().fragment, buf.interleave().span);
  }
  return out;
}

std::vector<std::int8_t> fast_convert_i4_to_i8(const PackedNibbleBuffer& buf) {
  if (buf.order() != NibbleOrder::kSwapped) {
    throw LayoutError("fast INT4->INT8 conversion requires swapped nibble order");
  }
  if (buf.interleave().enabled()) {
    throw LayoutError("fast INT4->INT8 conversion requires a non-interleaved buffer");
  }
  const std::size_t words = buf.bytes().size() / 2;
  std::vector<std::int8_t> out(4 * words);
  kernels::active().convert_i4_to_i8(buf.bytes().data(), words, out.data());
  out.resize(buf.num_elements());
  return out;
}

quant::QuantParams fold_conversion_scale(const quant::QuantParams& params) {
  if (params.scheme != quant::Scheme::kSymmetric) {
    throw InputError("scale folding requires symmetric parameters");
  }
  quant::QuantParams folded = params;
  folded.scale = params.scale / 16.0;
  return folded;
}

std::size_t interleaved_position(std::size_t i, std::size_t fragment, std::size_t span) noexcept {
  const std::size_t base = i - i % span;
  const std::size_t j = (i % span) / fragment;  // logical fragment
  const std::size_t half = span / (2 * fragment);
  const std::size_t physical = j < half ? 2 * j : 2 * (j - half) + 1;
  return base + physical * fragment + i % fragment;
}

std::vector<std::int8_t> interleave(std::span<const std::int8_t> values, std::size_t fragment,
                                    std::size_t span) {
  check_interleave(values.size(), fragment, span);
  std::vector<std::int8_t> out(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    out[interleaved_position(i, fragment, span)] = values[i];
  }
  return out;
}

std::vector<std::int8_t> deinterleave(std::span<const std::int8_t> values, std::size_t fragment,
                                      std::size_t span) {
  check_interleave(values.size(), fragment, span);
  std::vector<std::int8_t> out(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    out[i] = values[interleaved_position(i, fragment, span)];
  }
  return out;
}

PackedNibbleBuffer interleave_weights(std::span<const std::int8_t> values, std::size_t cols,
                                      std::size_t fragment, std::size_t span, NibbleOrder order) {
  if (cols == 0 || values.size() % cols != 0) {
    throw DimensionError("weight matrix length is not a multiple of its row length");
  }
  if (cols % span != 0) {
    throw DimensionError("reduction length " + std::to_string(cols) +
                         " is not divisible by span " + std::to_string(span));
  }
  // spans never cross rows since cols % span == 0
  const auto shuffled = interleave(values, fragment, span);
  const PackedNibbleBuffer packed = pack_nibbles(shuffled, order);
  return PackedNibbleBuffer(std::vector<std::uint8_t>(packed.bytes().begin(), packed.bytes().end()),
                            values.size(), order, Interleave{fragment, span});
}

}  // namespace w4ax::layout
