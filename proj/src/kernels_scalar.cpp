// Copyright 2026 The qf Authors
// SPDX-License-Identifier: Apache-2.0

// Scalar reference implementations. These define the results the vectorized
// paths are checked against: element order, block-major accumulation, and
// double-precision reductions in the norms.

#include <cmath>

#include "qf/kernels.hpp"

namespace qf::scalar {

void f16_to_f32_row(std::span<const F16Bits> src, std::span<float> dst) {
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = f16_decode(src[i]);
}

void f32_to_f16_row(std::span<const float> src, std::span<F16Bits> dst) {
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = f16_encode(src[i]);
}

void norm_f32(std::span<const float> x, std::span<float> y, float eps) {
  const std::size_t n = x.size();
  double sum = 0.0;
  for (float v : x) sum += v;
  const float mean = static_cast<float>(sum / static_cast<double>(n));

  double sum2 = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const float v = x[i] - mean;
    y[i] = v;
    sum2 += static_cast<double>(v) * v;
  }
  const float variance = static_cast<float>(sum2 / static_cast<double>(n));
  const float scale = 1.0f / std::sqrt(variance + eps);
  for (std::size_t i = 0; i < n; ++i) y[i] *= scale;
}

void rms_norm_f32(std::span<const float> x, std::span<float> y, float eps) {
  const std::size_t n = x.size();
  double sum2 = 0.0;
  for (float v : x) sum2 += static_cast<double>(v) * v;
  const float mean_sq = static_cast<float>(sum2 / static_cast<double>(n));
  const float scale = 1.0f / std::sqrt(mean_sq + eps);
  for (std::size_t i = 0; i < n; ++i) y[i] = x[i] * scale;
}

namespace {

std::int32_t block_sum(const std::array<std::int8_t, kBlockSize>& a,
                       const std::array<std::int8_t, kBlockSize>& b) {
  std::int32_t s = 0;
  for (std::size_t i = 0; i < kBlockSize; ++i) s += std::int32_t{a[i]} * std::int32_t{b[i]};
  return s;
}

}  // namespace

template <QuantBlock Block>
float vec_dot_q8(std::span<const Block> a, std::span<const Block> b) {
  float acc = 0.0f;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const float d = decoded_scale(a[k]) * decoded_scale(b[k]);
    acc += d * static_cast<float>(block_sum(a[k].quants, b[k].quants));
  }
  return acc;
}

template <QuantBlock Block>
void block_sums_q8(std::span<const Block> a, std::span<const Block> b,
                   std::span<std::int32_t> sums) {
  for (std::size_t k = 0; k < a.size(); ++k) sums[k] = block_sum(a[k].quants, b[k].quants);
}

template float vec_dot_q8(std::span<const BlockQ8F16S>, std::span<const BlockQ8F16S>);
template float vec_dot_q8(std::span<const BlockQ8F32S>, std::span<const BlockQ8F32S>);
template void block_sums_q8(std::span<const BlockQ8F16S>, std::span<const BlockQ8F16S>,
                            std::span<std::int32_t>);
template void block_sums_q8(std::span<const BlockQ8F32S>, std::span<const BlockQ8F32S>,
                            std::span<std::int32_t>);

}  // namespace qf::scalar
