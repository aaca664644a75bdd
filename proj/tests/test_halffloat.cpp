// Copyright 2026 The qf Authors
// SPDX-License-Identifier: Apache-2.0

#include "qf/halffloat.hpp"

#include <gtest/gtest.h>

#include <bit>
#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "oracles.hpp"
#include "qf/kernels.hpp"

namespace qf {
namespace {

TEST(F16Decode, KnownPatterns) {
  EXPECT_EQ(std::bit_cast<std::uint32_t>(f16_decode(F16Bits{0x0000})), 0u);
  EXPECT_EQ(f16_decode(F16Bits{0x3C00}), 1.0f);
  EXPECT_EQ(f16_decode(F16Bits{0x7BFF}), 65504.0f);
  EXPECT_EQ(f16_decode(F16Bits{0x0001}), std::ldexp(1.0f, -24));
  EXPECT_TRUE(std::signbit(f16_decode(F16Bits{0x8000})));
  EXPECT_EQ(f16_decode(F16Bits{0x7C00}), std::numeric_limits<float>::infinity());
  EXPECT_EQ(f16_decode(F16Bits{0xFC00}), -std::numeric_limits<float>::infinity());
  EXPECT_TRUE(std::isnan(f16_decode(F16Bits{0x7E00})));
  EXPECT_TRUE(std::isnan(f16_decode(F16Bits{0x7C01})));
}

TEST(F16Decode, MatchesBitFieldFormulaForAllPatterns) {
  for (std::uint32_t b = 0; b < 65536; ++b) {
    const F16Bits h{static_cast<std::uint16_t>(b)};
    const double expect = oracle::f16_value(h.bits);
    const float got = f16_decode(h);
    if (std::isnan(expect)) {
      ASSERT_TRUE(std::isnan(got)) << std::hex << b;
    } else {
      ASSERT_EQ(static_cast<double>(got), expect) << std::hex << b;
      ASSERT_EQ(std::signbit(got), std::signbit(expect)) << std::hex << b;
    }
  }
}

TEST(F16Encode, KnownValues) {
  EXPECT_EQ(f16_encode(1.0f).bits, 0x3C00);
  EXPECT_EQ(f16_encode(0.0f).bits, 0x0000);
  EXPECT_EQ(f16_encode(-0.0f).bits, 0x8000);
  EXPECT_EQ(f16_encode(65504.0f).bits, 0x7BFF);
  EXPECT_EQ(f16_encode(1e9f).bits, 0x7C00);
  EXPECT_EQ(f16_encode(-1e9f).bits, 0xFC00);
  // Just below the overflow midpoint stays finite; the midpoint itself ties to Inf.
  EXPECT_EQ(f16_encode(65519.0f).bits, 0x7BFF);
  EXPECT_EQ(f16_encode(65520.0f).bits, 0x7C00);
  EXPECT_EQ(f16_encode(std::numeric_limits<float>::infinity()).bits, 0x7C00);
}

TEST(F16Encode, NaNIsCanonicalAndKeepsSign) {
  const float qnan = std::numeric_limits<float>::quiet_NaN();
  EXPECT_EQ(f16_encode(qnan).bits, 0x7E00);
  EXPECT_EQ(f16_encode(-qnan).bits, 0xFE00);
  EXPECT_EQ(f16_encode(std::bit_cast<float>(0x7F800001u)).bits, 0x7E00);
  EXPECT_EQ(f16_encode(std::bit_cast<float>(0xFFBFFFFFu)).bits, 0xFE00);
}

TEST(F16Encode, TiesRoundToEven) {
  // 1 + 2^-11 sits halfway between 0x3C00 and 0x3C01: even wins.
  EXPECT_EQ(f16_encode(1.0f + std::ldexp(1.0f, -11)).bits, 0x3C00);
  // 1 + 3*2^-11 sits halfway between 0x3C01 and 0x3C02.
  EXPECT_EQ(f16_encode(1.0f + 3 * std::ldexp(1.0f, -11)).bits, 0x3C02);
  // Subnormal tie: 2^-25 -> 0, 3*2^-25 -> 2*2^-24.
  EXPECT_EQ(f16_encode(std::ldexp(1.0f, -25)).bits, 0x0000);
  EXPECT_EQ(f16_encode(3 * std::ldexp(1.0f, -25)).bits, 0x0002);
  // Largest subnormal rounding up into the smallest normal.
  EXPECT_EQ(f16_encode(std::ldexp(1.0f, -14) - std::ldexp(1.0f, -26)).bits, 0x0400);
}

TEST(F16Codec, ExhaustiveRoundTrip) {
  for (std::uint32_t b = 0; b < 65536; ++b) {
    const F16Bits h{static_cast<std::uint16_t>(b)};
    const F16Bits back = f16_encode(f16_decode(h));
    if (f16_is_nan(h)) {
      ASSERT_TRUE(f16_is_nan(back)) << std::hex << b;
    } else {
      ASSERT_EQ(back.bits, h.bits) << std::hex << b;
    }
  }
}

TEST(F16Encode, MatchesNearestSearchOnRandomFloats) {
  std::mt19937_64 rng(7);
  std::uniform_int_distribution<std::uint32_t> bits;
  std::uniform_real_distribution<float> small(-70000.0f, 70000.0f);
  for (int i = 0; i < 200000; ++i) {
    // Half the draws are arbitrary bit patterns (most overflow or underflow),
    // half land inside the binary16 range.
    const float x = (i & 1) ? std::bit_cast<float>(bits(rng)) : small(rng) * std::ldexp(1.0f, -(i % 40));
    ASSERT_EQ(f16_encode(x).bits, oracle::f16_nearest(x)) << std::hexfloat << x;
  }
}

TEST(F16Encode, MonotoneOverFiniteRange) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<float> dist(-65504.0f, 65504.0f);
  for (int i = 0; i < 100000; ++i) {
    float x = dist(rng) * std::ldexp(1.0f, -(i % 30));
    float y = dist(rng) * std::ldexp(1.0f, -(i % 30));
    if (y < x) std::swap(x, y);
    ASSERT_LE(f16_decode(f16_encode(x)), f16_decode(f16_encode(y))) << x << " " << y;
  }
}

TEST(F16Rows, SmallExamples) {
  const std::vector<F16Bits> src{{0x3C00}, {0x4000}, {0xC000}};
  std::vector<float> dst(3);
  f16_to_f32_row(src, dst);
  EXPECT_EQ(dst, (std::vector<float>{1.0f, 2.0f, -2.0f}));

  std::vector<F16Bits> h(2);
  f32_to_f16_row(std::vector<float>{1.0f, -2.0f}, h);
  EXPECT_EQ(h[0].bits, 0x3C00);
  EXPECT_EQ(h[1].bits, 0xC000);

  std::vector<F16Bits> one(1);
  f32_to_f16_row(std::vector<float>{65504.0f}, one);
  EXPECT_EQ(one[0].bits, 0x7BFF);

  std::vector<float> none;
  f16_to_f32_row({}, none);
  EXPECT_TRUE(none.empty());
}

TEST(F16Rows, ShortDestinationRejected) {
  std::vector<F16Bits> src(4);
  std::vector<float> dst(3);
  EXPECT_THROW(f16_to_f32_row(src, dst), std::invalid_argument);
}

// Every binding (reference and active) must agree bit-for-bit with the
// element-wise codec, including NaN payloads and tails of any length.
TEST(F16Rows, EveryImplementationMatchesElementwise) {
  const KernelSet sets[] = {detect_features(Dispatch::kAuto), detect_features(Dispatch::kForceScalar)};
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<std::size_t> len(0, 4096);
  std::uniform_int_distribution<std::uint32_t> bits;
  for (int iter = 0; iter < 300; ++iter) {
    const std::size_t n = len(rng);
    std::vector<F16Bits> h(n);
    std::vector<float> f(n);
    for (std::size_t i = 0; i < n; ++i) {
      h[i].bits = static_cast<std::uint16_t>(bits(rng));
      f[i] = (i % 3 == 0) ? std::bit_cast<float>(bits(rng))
                          : std::uniform_real_distribution<float>(-4.0f, 4.0f)(rng);
    }
    for (const KernelSet& ks : sets) {
      for (auto fn : {ks.f16_to_f32_row.reference, ks.f16_to_f32_row.active}) {
        std::vector<float> out(n);
        fn(h, out);
        for (std::size_t i = 0; i < n; ++i) {
          ASSERT_EQ(std::bit_cast<std::uint32_t>(out[i]), std::bit_cast<std::uint32_t>(f16_decode(h[i])))
              << "n=" << n << " i=" << i << " bits=" << std::hex << h[i].bits;
        }
      }
      for (auto fn : {ks.f32_to_f16_row.reference, ks.f32_to_f16_row.active}) {
        std::vector<F16Bits> out(n);
        fn(f, out);
        for (std::size_t i = 0; i < n; ++i) {
          ASSERT_EQ(out[i].bits, f16_encode(f[i]).bits) << "n=" << n << " i=" << i;
        }
      }
    }
  }
}

TEST(F16Rows, AllPatternsThroughActiveRow) {
  std::vector<F16Bits> all(65536);
  for (std::uint32_t b = 0; b < 65536; ++b) all[b].bits = static_cast<std::uint16_t>(b);
  std::vector<float> f(all.size());
  f16_to_f32_row(all, f);
  std::vector<F16Bits> back(all.size());
  f32_to_f16_row(f, back);
  for (std::uint32_t b = 0; b < 65536; ++b) {
    ASSERT_EQ(std::bit_cast<std::uint32_t>(f[b]), std::bit_cast<std::uint32_t>(f16_decode(all[b])));
    if (!f16_is_nan(all[b])) {
      ASSERT_EQ(back[b].bits, all[b].bits);
    }
  }
}

}  // namespace
}  // namespace qf
