// Copyright 2026 The qf Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>

namespace qf {

/// IEEE 754 binary16 bit pattern: 1 sign bit, 5 exponent bits, 10 mantissa bits.
struct F16Bits {
  std::uint16_t bits = 0;

  friend constexpr bool operator==(F16Bits, F16Bits) = default;
};
static_assert(sizeof(F16Bits) == 2);

inline constexpr F16Bits kF16QuietNaN{0x7E00};
inline constexpr F16Bits kF16PosInf{0x7C00};
inline constexpr float kF16Max = 65504.0f;

constexpr bool f16_is_nan(F16Bits h) {
  return (h.bits & 0x7C00u) == 0x7C00u && (h.bits & 0x03FFu) != 0;
}

/// Exact decode of any of the 65536 patterns. NaNs keep their payload and
/// come out quiet (the same result hardware half->single conversion gives).
float f16_decode(F16Bits h);

/// Round-to-nearest-even encode. Overflow goes to +-Inf, signed zeros are
/// kept, and every NaN becomes the canonical quiet NaN 0x7E00 with the
/// input's sign.
F16Bits f16_encode(float x);

// Bulk conversions. Both go through the process-wide kernel dispatch, so the
// active implementation may be vectorized; results are bit-identical to the
// element-wise codec either way. dst must hold at least src.size() elements.
void f16_to_f32_row(std::span<const F16Bits> src, std::span<float> dst);
void f32_to_f16_row(std::span<const float> src, std::span<F16Bits> dst);

}  // namespace qf
