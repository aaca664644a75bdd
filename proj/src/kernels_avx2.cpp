// Copyright 2026 The qf Authors
// SPDX-License-Identifier: Apache-2.0

// AVX2 + F16C + FMA kernels. This translation unit is built with
// -mavx2 -mfma -mf16c; nothing here may run before avx2::supported().

#include <immintrin.h>

#include <cmath>
#include <cstring>

#include "kernels_internal.hpp"
#include "qf/instrument.hpp"

namespace qf::avx2 {
namespace {

inline float hsum(__m256 v) {
  __m128 s = _mm_add_ps(_mm256_castps256_ps128(v), _mm256_extractf128_ps(v, 1));
  s = _mm_add_ps(s, _mm_movehl_ps(s, s));
  s = _mm_add_ss(s, _mm_movehdup_ps(s));
  return _mm_cvtss_f32(s);
}

inline double hsum(__m256d v) {
  __m128d s = _mm_add_pd(_mm256_castpd256_pd128(v), _mm256_extractf128_pd(v, 1));
  s = _mm_add_sd(s, _mm_unpackhi_pd(s, s));
  return _mm_cvtsd_f64(s);
}

inline std::int32_t hsum(__m256i v) {
  __m128i s = _mm_add_epi32(_mm256_castsi256_si128(v), _mm256_extracti128_si256(v, 1));
  s = _mm_add_epi32(s, _mm_unpackhi_epi64(s, s));
  s = _mm_add_epi32(s, _mm_shuffle_epi32(s, 0b01));
  return _mm_cvtsi128_si32(s);
}

// Widen 8 floats to two double vectors and add their squares into acc.
inline void accumulate_squares(__m256 v, __m256d& acc_lo, __m256d& acc_hi) {
  const __m256d lo = _mm256_cvtps_pd(_mm256_castps256_ps128(v));
  const __m256d hi = _mm256_cvtps_pd(_mm256_extractf128_ps(v, 1));
  acc_lo = _mm256_fmadd_pd(lo, lo, acc_lo);
  acc_hi = _mm256_fmadd_pd(hi, hi, acc_hi);
}

inline __m256 f16x8_to_f32(const F16Bits* p) {
  return _mm256_cvtph_ps(_mm_loadu_si128(reinterpret_cast<const __m128i*>(p)));
}

// NaN lanes are replaced by sign|0x7FC00000, which converts to the canonical
// binary16 quiet NaN.
inline __m128i f32x8_to_f16(__m256 v) {
  const __m256 nan_mask = _mm256_cmp_ps(v, v, _CMP_UNORD_Q);
  const __m256 sign = _mm256_and_ps(v, _mm256_castsi256_ps(_mm256_set1_epi32(INT32_MIN)));
  const __m256 canon = _mm256_or_ps(sign, _mm256_castsi256_ps(_mm256_set1_epi32(0x7FC00000)));
  return _mm256_cvtps_ph(_mm256_blendv_ps(v, canon, nan_mask),
                         _MM_FROUND_TO_NEAREST_INT | _MM_FROUND_NO_EXC);
}

inline float scale_of(const BlockQ8F32S& b) { return b.scale; }

inline float scale_of(const BlockQ8F16S& b) {
  instrument::count_f16_scale_decode();
  return _cvtsh_ss(b.scale.bits);
}

// Eight int32 lanes whose total is sum_i qa_i * qb_i. Quants are in
// [-127, 127] so |a| * sign(b, a) pairs never saturate the int16 madd.
inline __m256i block_dot_lanes(const std::int8_t* qa, const std::int8_t* qb) {
  const __m256i a = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(qa));
  const __m256i b = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(qb));
  const __m256i abs_a = _mm256_sign_epi8(a, a);
  const __m256i signed_b = _mm256_sign_epi8(b, a);
  const __m256i pairs = _mm256_maddubs_epi16(abs_a, signed_b);
  return _mm256_madd_epi16(pairs, _mm256_set1_epi16(1));
}

}  // namespace

bool supported() {
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma") &&
         __builtin_cpu_supports("f16c");
}

void f16_to_f32_row(std::span<const F16Bits> src, std::span<float> dst) {
  const std::size_t n = src.size();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) _mm256_storeu_ps(dst.data() + i, f16x8_to_f32(src.data() + i));
  if (i < n) {
    F16Bits in[8] = {};
    float out[8];
    std::memcpy(in, src.data() + i, (n - i) * sizeof(F16Bits));
    _mm256_storeu_ps(out, f16x8_to_f32(in));
    std::memcpy(dst.data() + i, out, (n - i) * sizeof(float));
  }
}

void f32_to_f16_row(std::span<const float> src, std::span<F16Bits> dst) {
  const std::size_t n = src.size();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    _mm_storeu_si128(reinterpret_cast<__m128i*>(dst.data() + i),
                     f32x8_to_f16(_mm256_loadu_ps(src.data() + i)));
  }
  if (i < n) {
    float in[8] = {};
    F16Bits out[8];
    std::memcpy(in, src.data() + i, (n - i) * sizeof(float));
    _mm_storeu_si128(reinterpret_cast<__m128i*>(out), f32x8_to_f16(_mm256_loadu_ps(in)));
    std::memcpy(dst.data() + i, out, (n - i) * sizeof(F16Bits));
  }
}

void norm_f32(std::span<const float> x, std::span<float> y, float eps) {
  const std::size_t n = x.size();
  const float* xp = x.data();
  float* yp = y.data();

  __m256d s_lo = _mm256_setzero_pd();
  __m256d s_hi = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256 v = _mm256_loadu_ps(xp + i);
    s_lo = _mm256_add_pd(s_lo, _mm256_cvtps_pd(_mm256_castps256_ps128(v)));
    s_hi = _mm256_add_pd(s_hi, _mm256_cvtps_pd(_mm256_extractf128_ps(v, 1)));
  }
  double sum = hsum(_mm256_add_pd(s_lo, s_hi));
  for (; i < n; ++i) sum += xp[i];
  const float mean = static_cast<float>(sum / static_cast<double>(n));

  const __m256 vmean = _mm256_set1_ps(mean);
  __m256d q_lo = _mm256_setzero_pd();
  __m256d q_hi = _mm256_setzero_pd();
  i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256 v = _mm256_sub_ps(_mm256_loadu_ps(xp + i), vmean);
    _mm256_storeu_ps(yp + i, v);
    accumulate_squares(v, q_lo, q_hi);
  }
  double sum2 = hsum(_mm256_add_pd(q_lo, q_hi));
  for (; i < n; ++i) {
    const float v = xp[i] - mean;
    yp[i] = v;
    sum2 += static_cast<double>(v) * v;
  }

  const float variance = static_cast<float>(sum2 / static_cast<double>(n));
  const float scale = 1.0f / std::sqrt(variance + eps);
  const __m256 vscale = _mm256_set1_ps(scale);
  i = 0;
  for (; i + 8 <= n; i += 8) _mm256_storeu_ps(yp + i, _mm256_mul_ps(_mm256_loadu_ps(yp + i), vscale));
  for (; i < n; ++i) yp[i] *= scale;
}

void rms_norm_f32(std::span<const float> x, std::span<float> y, float eps) {
  const std::size_t n = x.size();
  const float* xp = x.data();
  float* yp = y.data();

  __m256d q_lo = _mm256_setzero_pd();
  __m256d q_hi = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) accumulate_squares(_mm256_loadu_ps(xp + i), q_lo, q_hi);
  double sum2 = hsum(_mm256_add_pd(q_lo, q_hi));
  for (; i < n; ++i) sum2 += static_cast<double>(xp[i]) * xp[i];

  const float mean_sq = static_cast<float>(sum2 / static_cast<double>(n));
  const float scale = 1.0f / std::sqrt(mean_sq + eps);
  const __m256 vscale = _mm256_set1_ps(scale);
  i = 0;
  for (; i + 8 <= n; i += 8) _mm256_storeu_ps(yp + i, _mm256_mul_ps(_mm256_loadu_ps(xp + i), vscale));
  for (; i < n; ++i) yp[i] = xp[i] * scale;
}

template <QuantBlock Block>
float vec_dot_q8(std::span<const Block> a, std::span<const Block> b) {
  __m256 acc = _mm256_setzero_ps();
  for (std::size_t k = 0; k < a.size(); ++k) {
    const __m256 d = _mm256_set1_ps(scale_of(a[k]) * scale_of(b[k]));
    const __m256i lanes = block_dot_lanes(a[k].quants.data(), b[k].quants.data());
    acc = _mm256_fmadd_ps(d, _mm256_cvtepi32_ps(lanes), acc);
  }
  return hsum(acc);
}

template <QuantBlock Block>
void block_sums_q8(std::span<const Block> a, std::span<const Block> b,
                   std::span<std::int32_t> sums) {
  for (std::size_t k = 0; k < a.size(); ++k) {
    sums[k] = hsum(block_dot_lanes(a[k].quants.data(), b[k].quants.data()));
  }
}

template float vec_dot_q8(std::span<const BlockQ8F16S>, std::span<const BlockQ8F16S>);
template float vec_dot_q8(std::span<const BlockQ8F32S>, std::span<const BlockQ8F32S>);
template void block_sums_q8(std::span<const BlockQ8F16S>, std::span<const BlockQ8F16S>,
                            std::span<std::int32_t>);
template void block_sums_q8(std::span<const BlockQ8F32S>, std::span<const BlockQ8F32S>,
                            std::span<std::int32_t>);

}  // namespace qf::avx2
