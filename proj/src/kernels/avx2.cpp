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

// AVX2 variants. This translation unit is compiled with -mavx2; nothing here
// may run before avx2_table() has confirmed CPU support.

#include "w4ax/kernels/kernels.hpp"

#if defined(W4AX_HAVE_AVX2)

#include <immintrin.h>

#include <algorithm>
#include <cmath>

namespace w4ax::kernels {
namespace {

// 16 words in -> 64 int8 out. Per 16-bit lane: lo = (v << 4) & 0xF0F0,
// hi = v & 0xF0F0; the output dword for word i is lo_i | hi_i << 16.
inline void convert16(const std::uint8_t* in, std::int8_t* out) {
  const __m256i mask = _mm256_set1_epi16(static_cast<short>(0xF0F0));
  const __m256i v = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(in));
  const __m256i lo = _mm256_and_si256(_mm256_slli_epi16(v, 4), mask);
  const __m256i hi = _mm256_and_si256(v, mask);
  // unpack works per 128-bit lane: r0 = words {0-3, 8-11}, r1 = {4-7, 12-15}
  const __m256i r0 = _mm256_unpacklo_epi16(lo, hi);
  const __m256i r1 = _mm256_unpackhi_epi16(lo, hi);
  _mm256_storeu_si256(reinterpret_cast<__m256i*>(out), _mm256_permute2x128_si256(r0, r1, 0x20));
  _mm256_storeu_si256(reinterpret_cast<__m256i*>(out + 32),
                      _mm256_permute2x128_si256(r0, r1, 0x31));
}

void convert_i4_to_i8_avx2(const std::uint8_t* words, std::size_t num_words, std::int8_t* out) {
  std::size_t i = 0;
  for (; i + 16 <= num_words; i += 16) {
    convert16(words + 2 * i, out + 4 * i);
  }
  if (i < num_words) {
    scalar_table().convert_i4_to_i8(words + 2 * i, num_words - i, out + 4 * i);
  }
}

void unpack_i4_swapped_avx2(const std::uint8_t* words, std::size_t num_words, std::int8_t* out) {
  const __m256i nib = _mm256_set1_epi8(0x0F);
  const __m256i bias = _mm256_set1_epi8(0x08);
  std::size_t i = 0;
  for (; i + 16 <= num_words; i += 16) {
    convert16(words + 2 * i, out + 4 * i);
    for (int half = 0; half < 2; ++half) {
      auto* p = reinterpret_cast<__m256i*>(out + 4 * i + 32 * half);
      // every byte is 16*w with a zero low nibble; shift the nibble down,
      // then sign-extend it via (u ^ 8) - 8
      __m256i u = _mm256_and_si256(_mm256_srli_epi16(_mm256_loadu_si256(p), 4), nib);
      u = _mm256_sub_epi8(_mm256_xor_si256(u, bias), bias);
      _mm256_storeu_si256(p, u);
    }
  }
  if (i < num_words) {
    scalar_table().unpack_i4_swapped(words + 2 * i, num_words - i, out + 4 * i);
  }
}

std::int32_t dot_i8_avx2(const std::int8_t* a, const std::int8_t* b, std::size_t n) {
  __m256i acc = _mm256_setzero_si256();
  std::size_t i = 0;
  for (; i + 16 <= n; i += 16) {
    const __m256i va = _mm256_cvtepi8_epi16(_mm_loadu_si128(reinterpret_cast<const __m128i*>(a + i)));
    const __m256i vb = _mm256_cvtepi8_epi16(_mm_loadu_si128(reinterpret_cast<const __m128i*>(b + i)));
    acc = _mm256_add_epi32(acc, _mm256_madd_epi16(va, vb));
  }
  __m128i s = _mm_add_epi32(_mm256_castsi256_si128(acc), _mm256_extracti128_si256(acc, 1));
  s = _mm_add_epi32(s, _mm_shuffle_epi32(s, _MM_SHUFFLE(1, 0, 3, 2)));
  s = _mm_add_epi32(s, _mm_shuffle_epi32(s, _MM_SHUFFLE(2, 3, 0, 1)));
  std::int32_t total = _mm_cvtsi128_si32(s);
  for (; i < n; ++i) {
    total += static_cast<std::int32_t>(a[i]) * static_cast<std::int32_t>(b[i]);
  }
  return total;
}

void quantize_f64_avx2(const double* x, std::size_t n, double scale, std::int32_t zero_point,
                       std::int32_t qmin, std::int32_t qmax, std::int8_t* out) {
  const __m256d vscale = _mm256_set1_pd(scale);
  const __m256d vzp = _mm256_set1_pd(static_cast<double>(zero_point));
  const __m256d vlo = _mm256_set1_pd(static_cast<double>(qmin));
  const __m256d vhi = _mm256_set1_pd(static_cast<double>(qmax));
  const __m256d half = _mm256_set1_pd(0.5);
  const __m256d one = _mm256_set1_pd(1.0);
  const __m256d sign_bit = _mm256_set1_pd(-0.0);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d v = _mm256_div_pd(_mm256_loadu_pd(x + i), vscale);
    // round half away from zero without the x + 0.5 double-rounding trap:
    // t = trunc(v); bump by sign(v) when |v - t| >= 0.5 (v - t is exact)
    const __m256d t = _mm256_round_pd(v, _MM_FROUND_TO_ZERO | _MM_FROUND_NO_EXC);
    const __m256d frac = _mm256_andnot_pd(sign_bit, _mm256_sub_pd(v, t));
    const __m256d bump = _mm256_and_pd(_mm256_cmp_pd(frac, half, _CMP_GE_OQ),
                                       _mm256_or_pd(_mm256_and_pd(v, sign_bit), one));
    __m256d q = _mm256_add_pd(_mm256_add_pd(t, bump), vzp);
    q = _mm256_min_pd(_mm256_max_pd(q, vlo), vhi);
    const __m128i q32 = _mm256_cvttpd_epi32(q);
    const __m128i q8 = _mm_packs_epi16(_mm_packs_epi32(q32, q32), _mm_setzero_si128());
    const int packed = _mm_cvtsi128_si32(q8);
    for (int b = 0; b < 4; ++b) {
      out[i + b] = static_cast<std::int8_t>(static_cast<std::uint8_t>(packed >> (8 * b)));
    }
  }
  if (i < n) {
    scalar_table().quantize_f64(x + i, n - i, scale, zero_point, qmin, qmax, out + i);
  }
}

constexpr KernelTable kAvx2{
    "avx2",
    convert_i4_to_i8_avx2,
    unpack_i4_swapped_avx2,
    dot_i8_avx2,
    quantize_f64_avx2,
};

}  // namespace

const KernelTable* avx2_table() noexcept {
  static const bool supported = __builtin_cpu_supports("avx2");
  return supported ? &kAvx2 : nullptr;
}

}  // namespace w4ax::kernels

#else

namespace w4ax::kernels {
const KernelTable* avx2_table() noexcept { return nullptr; }
}  // namespace w4ax::kernels

#endif
