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

#include "w4ax/kernels/kernels.hpp"

#if defined(W4AX_HAVE_NEON) && defined(__aarch64__)

#include <arm_neon.h>

namespace w4ax::kernels {
namespace {

// 8 words in -> 32 int8 out.
inline void convert8(const std::uint8_t* in, std::int8_t* out) {
  const uint16x8_t mask = vdupq_n_u16(0xF0F0);
  const uint16x8_t v = vreinterpretq_u16_u8(vld1q_u8(in));
  const uint16x8_t lo = vandq_u16(vshlq_n_u16(v, 4), mask);
  const uint16x8_t hi = vandq_u16(v, mask);
  const uint16x8x2_t z = vzipq_u16(lo, hi);
  vst1q_s8(out, vreinterpretq_s8_u16(z.val[0]));
  vst1q_s8(out + 16, vreinterpretq_s8_u16(z.val[1]));
}

void convert_i4_to_i8_neon(const std::uint8_t* words, std::size_t num_words, std::int8_t* out) {
  std::size_t i = 0;
  for (; i + 8 <= num_words; i += 8) {
    convert8(words + 2 * i, out + 4 * i);
  }
  if (i < num_words) {
    scalar_table().convert_i4_to_i8(words + 2 * i, num_words - i, out + 4 * i);
  }
}

void unpack_i4_swapped_neon(const std::uint8_t* words, std::size_t num_words, std::int8_t* out) {
  std::size_t i = 0;
  for (; i + 8 <= num_words; i += 8) {
    convert8(words + 2 * i, out + 4 * i);
    vst1q_s8(out + 4 * i, vshrq_n_s8(vld1q_s8(out + 4 * i), 4));
    vst1q_s8(out + 4 * i + 16, vshrq_n_s8(vld1q_s8(out + 4 * i + 16), 4));
  }
  if (i < num_words) {
    scalar_table().unpack_i4_swapped(words + 2 * i, num_words - i, out + 4 * i);
  }
}

std::int32_t dot_i8_neon(const std::int8_t* a, const std::int8_t* b, std::size_t n) {
  int32x4_t acc = vdupq_n_s32(0);
  std::size_t i = 0;
  for (; i + 16 <= n; i += 16) {
    const int8x16_t va = vld1q_s8(a + i);
    const int8x16_t vb = vld1q_s8(b + i);
    acc = vpadalq_s16(acc, vmull_s8(vget_low_s8(va), vget_low_s8(vb)));
    acc = vpadalq_s16(acc, vmull_high_s8(va, vb));
  }
  std::int32_t total = vaddvq_s32(acc);
  for (; i < n; ++i) {
    total += static_cast<std::int32_t>(a[i]) * static_cast<std::int32_t>(b[i]);
  }
  return total;
}

void quantize_f64_neon(const double* x, std::size_t n, double scale, std::int32_t zero_point,
                       std::int32_t qmin, std::int32_t qmax, std::int8_t* out) {
  const float64x2_t vscale = vdupq_n_f64(scale);
  const float64x2_t vzp = vdupq_n_f64(static_cast<double>(zero_point));
  const float64x2_t vlo = vdupq_n_f64(static_cast<double>(qmin));
  const float64x2_t vhi = vdupq_n_f64(static_cast<double>(qmax));
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    // vrndaq rounds to nearest with ties away from zero.
    float64x2_t q = vaddq_f64(vrndaq_f64(vdivq_f64(vld1q_f64(x + i), vscale)), vzp);
    q = vminq_f64(vmaxq_f64(q, vlo), vhi);
    const int64x2_t qi = vcvtq_s64_f64(q);
    out[i] = static_cast<std::int8_t>(vgetq_lane_s64(qi, 0));
    out[i + 1] = static_cast<std::int8_t>(vgetq_lane_s64(qi, 1));
  }
  if (i < n) {
    scalar_table().quantize_f64(x + i, n - i, scale, zero_point, qmin, qmax, out + i);
  }
}

constexpr KernelTable kNeon{
    "neon",
    convert_i4_to_i8_neon,
    unpack_i4_swapped_neon,
    dot_i8_neon,
    quantize_f64_neon,
};

}  // namespace

const KernelTable* neon_table() noexcept { return &kNeon; }

}  // namespace w4ax::kernels

#else

namespace w4ax::kernels {
const KernelTable* neon_table() noexcept { return nullptr; }
}  // namespace w4ax::kernels

#endif
