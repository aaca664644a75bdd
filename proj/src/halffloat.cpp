// Copyright 2026 The qf Authors
// SPDX-License-Identifier: Apache-2.0

#include "qf/halffloat.hpp"

#include <bit>
#include <stdexcept>

#include "qf/kernels.hpp"

namespace qf {

float f16_decode(F16Bits h) {
  const std::uint32_t sign = static_cast<std::uint32_t>(h.bits & 0x8000u) << 16;
  const std::uint32_t exp = (h.bits >> 10) & 0x1Fu;
  std::uint32_t mant = h.bits & 0x3FFu;

  std::uint32_t out;
  if (exp == 0x1F) {
    out = sign | 0x7F800000u | (mant << 13);
    if (mant != 0) out |= 0x00400000u;
  } else if (exp != 0) {
    out = sign | ((exp + (127 - 15)) << 23) | (mant << 13);
  } else if (mant == 0) {
    out = sign;
  } else {
    // Subnormal: mant * 2^-24. Shift the leading one up to the implicit bit.
    const int shift = std::countl_zero(mant) - 21;  // 1..10
    mant = (mant << shift) & 0x3FFu;
    const std::uint32_t e = static_cast<std::uint32_t>(127 - 14 - shift);
    out = sign | (e << 23) | (mant << 13);
  }
  return std::bit_cast<float>(out);
}

F16Bits f16_encode(float x) {
  const std::uint32_t bits = std::bit_cast<std::uint32_t>(x);
  const auto sign = static_cast<std::uint16_t>((bits >> 16) & 0x8000u);
  const std::uint32_t abs = bits & 0x7FFFFFFFu;

  if (abs > 0x7F800000u) return F16Bits{static_cast<std::uint16_t>(sign | kF16QuietNaN.bits)};
  // 65520 is the midpoint between 65504 and 2^16; ties go to the even (Inf) side.
  if (abs >= 0x477FF000u) return F16Bits{static_cast<std::uint16_t>(sign | kF16PosInf.bits)};

  if (abs >= 0x38800000u) {  // normal binary16 range, |x| >= 2^-14
    std::uint32_t h = (abs >> 13) - ((127u - 15u) << 10);
    const std::uint32_t rem = abs & 0x1FFFu;
    if (rem > 0x1000u || (rem == 0x1000u && (h & 1u))) ++h;
    return F16Bits{static_cast<std::uint16_t>(sign | h)};
  }

  // Anything at or below 2^-25 rounds to zero (2^-25 itself is a tie to even).
  if (abs <= 0x33000000u) return F16Bits{sign};

  // Subnormal result in units of 2^-24.
  const std::uint32_t e = abs >> 23;
  const std::uint32_t mant = (abs & 0x7FFFFFu) | 0x800000u;
  const std::uint32_t shift = 126u - e;  // 14..24
  std::uint32_t q = mant >> shift;
  const std::uint32_t rem = mant & ((1u << shift) - 1u);
  const std::uint32_t half = 1u << (shift - 1u);
  if (rem > half || (rem == half && (q & 1u))) ++q;
  return F16Bits{static_cast<std::uint16_t>(sign | q)};
}

void f16_to_f32_row(std::span<const F16Bits> src, std::span<float> dst) {
  if (dst.size() < src.size()) throw std::invalid_argument("f16_to_f32_row: destination too short");
  active_kernels().f16_to_f32_row.active(src, dst);
}

void f32_to_f16_row(std::span<const float> src, std::span<F16Bits> dst) {
  if (dst.size() < src.size()) throw std::invalid_argument("f32_to_f16_row: destination too short");
  active_kernels().f32_to_f16_row.active(src, dst);
}

}  // namespace qf
