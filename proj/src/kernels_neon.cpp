// Copyright 2026 The qf Authors
// SPDX-License-Identifier: Apache-2.0

// AArch64 NEON kernels. Advanced SIMD is mandatory on AArch64, so these bind
// unconditionally there. The int8 dot uses SDOT when the build targets a core
// with the dot-product extension (e.g. -mcpu=neoverse-n2), otherwise a
// widening multiply + pairwise accumulate.

#if defined(__aarch64__)

#include <arm_neon.h>

#include <cmath>
#include <cstring>

#include "kernels_internal.hpp"
#include "qf/instrument.hpp"

namespace qf::neon {
namespace {

inline float32x4_t f16x4_to_f32(const F16Bits* p) {
  return vcvt_f32_f16(vreinterpret_f16_u16(vld1_u16(reinterpret_cast<const std::uint16_t*>(p))));
}

// NaN lanes become sign|0x7FC00000 first so they narrow to the canonical
// binary16 quiet NaN.
inline uint16x4_t f32x4_to_f16(float32x4_t v) {
  const uint32x4_t is_num = vceqq_f32(v, v);
  const uint32x4_t sign = vandq_u32(vreinterpretq_u32_f32(v), vdupq_n_u32(0x80000000u));
  const uint32x4_t canon = vorrq_u32(sign, vdupq_n_u32(0x7FC00000u));
  const float32x4_t fixed = vbslq_f32(is_num, v, vreinterpretq_f32_u32(canon));
  return vreinterpret_u16_f16(vcvt_f16_f32(fixed));
}

inline void accumulate_squares(float32x4_t v, float64x2_t& acc_lo, float64x2_t& acc_hi) {
  const float64x2_t lo = vcvt_f64_f32(vget_low_f32(v));
  const float64x2_t hi = vcvt_high_f64_f32(v);
  acc_lo = vfmaq_f64(acc_lo, lo, lo);
  acc_hi = vfmaq_f64(acc_hi, hi, hi);
}

inline float scale_of(const BlockQ8F32S& b) { return b.scale; }

inline float scale_of(const BlockQ8F16S& b) {
  instrument::count_f16_scale_decode();
  return vgetq_lane_f32(vcvt_f32_f16(vreinterpret_f16_u16(vdup_n_u16(b.scale.bits))), 0);
}

// Four int32 lanes whose total is sum_i qa_i * qb_i.
inline int32x4_t block_dot_lanes(const std::int8_t* qa, const std::int8_t* qb) {
  const int8x16_t a0 = vld1q_s8(qa);
  const int8x16_t a1 = vld1q_s8(qa + 16);
  const int8x16_t b0 = vld1q_s8(qb);
  const int8x16_t b1 = vld1q_s8(qb + 16);
#if defined(__ARM_FEATURE_DOTPROD)
  int32x4_t acc = vdotq_s32(vdupq_n_s32(0), a0, b0);
  return vdotq_s32(acc, a1, b1);
#else
  int16x8_t p0 = vmull_s8(vget_low_s8(a0), vget_low_s8(b0));
  int16x8_t p1 = vmull_high_s8(a0, b0);
  int16x8_t p2 = vmull_s8(vget_low_s8(a1), vget_low_s8(b1));
  int16x8_t p3 = vmull_high_s8(a1, b1);
  int32x4_t acc = vpaddlq_s16(p0);
  acc = vpadalq_s16(acc, p1);
  acc = vpadalq_s16(acc, p2);
  return vpadalq_s16(acc, p3);
#endif
}

}  // namespace

std::string_view dot_feature() {
#if defined(__ARM_FEATURE_DOTPROD)
  return "neon-dotprod";
#else
  return "neon";
#endif
}

void f16_to_f32_row(std::span<const F16Bits> src, std::span<float> dst) {
  const std::size_t n = src.size();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) vst1q_f32(dst.data() + i, f16x4_to_f32(src.data() + i));
  if (i < n) {
    F16Bits in[4] = {};
    float out[4];
    std::memcpy(in, src.data() + i, (n - i) * sizeof(F16Bits));
    vst1q_f32(out, f16x4_to_f32(in));
    std::memcpy(dst.data() + i, out, (n - i) * sizeof(float));
  }
}

void f32_to_f16_row(std::span<const float> src, std::span<F16Bits> dst) {
  const std::size_t n = src.size();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    vst1_u16(reinterpret_cast<std::uint16_t*>(dst.data() + i), f32x4_to_f16(vld1q_f32(src.data() + i)));
  }
  if (i < n) {
    float in[4] = {};
    F16Bits out[4];
    std::memcpy(in, src.data() + i, (n - i) * sizeof(float));
    vst1_u16(reinterpret_cast<std::uint16_t*>(out), f32x4_to_f16(vld1q_f32(in)));
    std::memcpy(dst.data() + i, out, (n - i) * sizeof(F16Bits));
  }
}

void norm_f32(std::span<const float> x, std::span<float> y, float eps) {
  const std::size_t n = x.size();
  const float* xp = x.data();
  float* yp = y.data();

  float64x2_t s_lo = vdupq_n_f64(0.0);
  float64x2_t s_hi = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const float32x4_t v = vld1q_f32(xp + i);
    s_lo = vaddq_f64(s_lo, vcvt_f64_f32(vget_low_f32(v)));
    s_hi = vaddq_f64(s_hi, vcvt_high_f64_f32(v));
  }
  double sum = vaddvq_f64(vaddq_f64(s_lo, s_hi));
  for (; i < n; ++i) sum += xp[i];
  const float mean = static_cast<float>(sum / static_cast<double>(n));

  const float32x4_t vmean = vdupq_n_f32(mean);
  float64x2_t q_lo = vdupq_n_f64(0.0);
  float64x2_t q_hi = vdupq_n_f64(0.0);
  i = 0;
  for (; i + 4 <= n; i += 4) {
    const float32x4_t v = vsubq_f32(vld1q_f32(xp + i), vmean);
    vst1q_f32(yp + i, v);
    accumulate_squares(v, q_lo, q_hi);
  }
  double sum2 = vaddvq_f64(vaddq_f64(q_lo, q_hi));
  for (; i < n; ++i) {
    const float v = xp[i] - mean;
    yp[i] = v;
    sum2 += static_cast<double>(v) * v;
  }

  const float variance = static_cast<float>(sum2 / static_cast<double>(n));
  const float scale = 1.0f / std::sqrt(variance + eps);
  i = 0;
  for (; i + 4 <= n; i += 4) vst1q_f32(yp + i, vmulq_n_f32(vld1q_f32(yp + i), scale));
  for (; i < n; ++i) yp[i] *= scale;
}

void rms_norm_f32(std::span<const float> x, std::span<float> y, float eps) {
  const std::size_t n = x.size();
  const float* xp = x.data();
  float* yp = y.data();

  float64x2_t q_lo = vdupq_n_f64(0.0);
  float64x2_t q_hi = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) accumulate_squares(vld1q_f32(xp + i), q_lo, q_hi);
  double sum2 = vaddvq_f64(vaddq_f64(q_lo, q_hi));
  for (; i < n; ++i) sum2 += static_cast<double>(xp[i]) * xp[i];

  const float mean_sq = static_cast<float>(sum2 / static_cast<double>(n));
  const float scale = 1.0f / std::sqrt(mean_sq + eps);
  i = 0;
  for (; i + 4 <= n; i += 4) vst1q_f32(yp + i, vmulq_n_f32(vld1q_f32(xp + i), scale));
  for (; i < n; ++i) yp[i] = xp[i] * scale;
}

template <QuantBlock Block>
float vec_dot_q8(std::span<const Block> a, std::span<const Block> b) {
  float32x4_t acc = vdupq_n_f32(0.0f);
  for (std::size_t k = 0; k < a.size(); ++k) {
    const float d = scale_of(a[k]) * scale_of(b[k]);
    const int32x4_t lanes = block_dot_lanes(a[k].quants.data(), b[k].quants.data());
    acc = vmlaq_n_f32(acc, vcvtq_f32_s32(lanes), d);
  }
  return vaddvq_f32(acc);
}

template <QuantBlock Block>
void block_sums_q8(std::span<const Block> a, std::span<const Block> b,
                   std::span<std::int32_t> sums) {
  for (std::size_t k = 0; k < a.size(); ++k) {
    sums[k] = vaddvq_s32(block_dot_lanes(a[k].quants.data(), b[k].quants.data()));
  }
}

template float vec_dot_q8(std::span<const BlockQ8F16S>, std::span<const BlockQ8F16S>);
template float vec_dot_q8(std::span<const BlockQ8F32S>, std::span<const BlockQ8F32S>);
template void block_sums_q8(std::span<const BlockQ8F16S>, std::span<const BlockQ8F16S>,
                            std::span<std::int32_t>);
template void block_sums_q8(std::span<const BlockQ8F32S>, std::span<const BlockQ8F32S>,
                            std::span<std::int32_t>);

}  // namespace qf::neon

#endif  // __aarch64__
