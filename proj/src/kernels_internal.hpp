// Copyright 2026 The qf Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "qf/kernels.hpp"

namespace qf {

#if defined(__x86_64__) || defined(_M_X64)
#define QF_HAVE_AVX2_KERNELS 1
// Compiled with -mavx2 -mfma -mf16c; only call after avx2::supported().
namespace avx2 {
bool supported();
void f16_to_f32_row(std::span<const F16Bits> src, std::span<float> dst);
void f32_to_f16_row(std::span<const float> src, std::span<F16Bits> dst);
void norm_f32(std::span<const float> x, std::span<float> y, float eps);
void rms_norm_f32(std::span<const float> x, std::span<float> y, float eps);
template <QuantBlock Block>
float vec_dot_q8(std::span<const Block> a, std::span<const Block> b);
template <QuantBlock Block>
void block_sums_q8(std::span<const Block> a, std::span<const Block> b, std::span<std::int32_t> sums);
}  // namespace avx2
#endif

#if defined(__aarch64__)
#define QF_HAVE_NEON_KERNELS 1
namespace neon {
// Feature tag of the integer dot path: "neon-dotprod" when built with
// __ARM_FEATURE_DOTPROD, otherwise "neon".
std::string_view dot_feature();
void f16_to_f32_row(std::span<const F16Bits> src, std::span<float> dst);
void f32_to_f16_row(std::span<const float> src, std::span<F16Bits> dst);
void norm_f32(std::span<const float> x, std::span<float> y, float eps);
void rms_norm_f32(std::span<const float> x, std::span<float> y, float eps);
template <QuantBlock Block>
float vec_dot_q8(std::span<const Block> a, std::span<const Block> b);
template <QuantBlock Block>
void block_sums_q8(std::span<const Block> a, std::span<const Block> b, std::span<std::int32_t> sums);
}  // namespace neon
#endif

}  // namespace qf
