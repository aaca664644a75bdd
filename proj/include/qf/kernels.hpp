// Copyright 2026 The qf Authors
// SPDX-License-Identifier: Apache-2.0

// Compute operators with runtime dispatch.
//
// Every operator has a portable scalar reference and, where the host CPU
// supports it, a vectorized implementation (AVX2/F16C/FMA on x86-64, NEON on
// AArch64). The binding is resolved once per process by detect_features();
// QF_FORCE_SCALAR=1 in the environment pins every operator to its reference.

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "qf/halffloat.hpp"
#include "qf/quant.hpp"

namespace qf {

struct NormConfig {
  float eps = 1e-5f;
};

using F16ToF32RowFn = void (*)(std::span<const F16Bits> src, std::span<float> dst);
using F32ToF16RowFn = void (*)(std::span<const float> src, std::span<F16Bits> dst);
using NormFn = void (*)(std::span<const float> x, std::span<float> y, float eps);
template <QuantBlock Block>
using VecDotFn = float (*)(std::span<const Block> a, std::span<const Block> b);
// Per-block exact integer sums sum_i qa_i * qb_i, one per block pair.
template <QuantBlock Block>
using BlockSumsFn = void (*)(std::span<const Block> a, std::span<const Block> b,
                             std::span<std::int32_t> sums);

template <class Fn>
struct KernelBinding {
  Fn reference = nullptr;
  Fn active = nullptr;
  std::string_view feature = "scalar";

  bool vectorized() const { return active != reference; }
  bool operator==(const KernelBinding&) const = default;
};

struct KernelSet {
  KernelBinding<F16ToF32RowFn> f16_to_f32_row;
  KernelBinding<F32ToF16RowFn> f32_to_f16_row;
  KernelBinding<NormFn> norm_f32;
  KernelBinding<NormFn> rms_norm_f32;
  KernelBinding<VecDotFn<BlockQ8F16S>> vec_dot_q8_f16s;
  KernelBinding<VecDotFn<BlockQ8F32S>> vec_dot_q8_f32s;
  KernelBinding<BlockSumsFn<BlockQ8F16S>> block_sums_f16s;
  KernelBinding<BlockSumsFn<BlockQ8F32S>> block_sums_f32s;

  struct Entry {
    std::string_view name;
    std::string_view feature;
    bool vectorized;
  };
  std::vector<Entry> summary() const;

  // "scalar" when nothing is vectorized, otherwise the distinct feature tags
  // joined with '+'.
  std::string dispatch_name() const;

  bool operator==(const KernelSet&) const = default;
};

enum class Dispatch { kAuto, kForceScalar };

// Probes the CPU and binds the best supported implementation per operator.
// With Dispatch::kAuto, QF_FORCE_SCALAR=1 in the environment forces scalar.
KernelSet detect_features(Dispatch mode = Dispatch::kAuto);

// Process-wide set, resolved on first use and immutable afterwards.
const KernelSet& active_kernels();

// Throws std::invalid_argument for an empty row or y.size() != x.size().
void norm_f32(std::span<const float> x, std::span<float> y, NormConfig cfg = {},
              const KernelSet& ks = active_kernels());
void rms_norm_f32(std::span<const float> x, std::span<float> y, NormConfig cfg = {},
                  const KernelSet& ks = active_kernels());

// Throws std::invalid_argument when the block counts differ.
template <QuantBlock Block>
float vec_dot_q8(std::span<const Block> a, std::span<const Block> b,
                 const KernelSet& ks = active_kernels());

template <QuantBlock Block>
void block_sums_q8(std::span<const Block> a, std::span<const Block> b,
                   std::span<std::int32_t> sums, const KernelSet& ks = active_kernels());

template <QuantBlock Block>
constexpr auto kernel_binding(const KernelSet& ks) {
  if constexpr (std::same_as<Block, BlockQ8F16S>) {
    return ks.vec_dot_q8_f16s;
  } else {
    return ks.vec_dot_q8_f32s;
  }
}

namespace scalar {
void f16_to_f32_row(std::span<const F16Bits> src, std::span<float> dst);
void f32_to_f16_row(std::span<const float> src, std::span<F16Bits> dst);
void norm_f32(std::span<const float> x, std::span<float> y, float eps);
void rms_norm_f32(std::span<const float> x, std::span<float> y, float eps);
template <QuantBlock Block>
float vec_dot_q8(std::span<const Block> a, std::span<const Block> b);
template <QuantBlock Block>
void block_sums_q8(std::span<const Block> a, std::span<const Block> b, std::span<std::int32_t> sums);
}  // namespace scalar

}  // namespace qf
