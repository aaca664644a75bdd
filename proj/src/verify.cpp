// Copyright 2026 The qf Authors
// SPDX-License-Identifier: Apache-2.0

#include "qf/verify.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <limits>
#include <random>
#include <stdexcept>

#include "qf/halffloat.hpp"
#include "qf/quant.hpp"

namespace qf {
namespace {

constexpr std::size_t kDiffCases = 10000;

std::string failure(std::string_view op, std::uint64_t seed, std::size_t index, const std::string& detail) {
  return std::string(op) + " seed=" + std::to_string(seed) + " index=" + std::to_string(index) + ": " + detail;
}

std::string hex(std::uint32_t v) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "0x%08x", v);
  return buf;
}

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

std::uint64_t case_seed(std::uint64_t seed, std::uint64_t i) { return seed * 1000003ull + i; }

double ulp_of(float v) {
  const float a = std::fabs(v);
  return static_cast<double>(std::nextafter(a, std::numeric_limits<float>::infinity())) - a;
}

VerifyResult verify_f16(const KernelSet& ks, std::uint64_t seed) {
  VerifyResult r;
  r.suite = "f16";
  std::vector<F16Bits> all(65536);
  for (std::uint32_t b = 0; b < all.size(); ++b) all[b].bits = static_cast<std::uint16_t>(b);
  std::vector<float> dec(all.size());
  std::vector<F16Bits> enc(all.size());

  for (auto [op, fn] : {std::pair{"f16_to_f32_row.reference", ks.f16_to_f32_row.reference},
                        std::pair{"f16_to_f32_row", ks.f16_to_f32_row.active}}) {
    fn(all, dec);
    for (std::uint32_t b = 0; b < all.size(); ++b) {
      const std::uint32_t got = std::bit_cast<std::uint32_t>(dec[b]);
      const std::uint32_t want = std::bit_cast<std::uint32_t>(f16_decode(all[b]));
      if (got != want) {
        r.passed = false;
        r.failure = failure(op, seed, b, "decoded " + hex(got) + ", expected " + hex(want));
        return r;
      }
    }
    r.cases += all.size();
  }

  // Round trip of every non-NaN pattern through the active encoder.
  ks.f32_to_f16_row.active(dec, enc);
  for (std::uint32_t b = 0; b < all.size(); ++b) {
    const bool nan = f16_is_nan(all[b]);
    if ((nan && !f16_is_nan(enc[b])) || (!nan && enc[b].bits != all[b].bits)) {
      r.passed = false;
      r.failure = failure("f32_to_f16_row", seed, b, "pattern " + hex(b) + " round-tripped to " + hex(enc[b].bits));
      return r;
    }
  }
  r.cases += all.size();

  std::uniform_int_distribution<std::uint32_t> bits;
  std::uniform_int_distribution<std::size_t> len(1, 1024);
  std::uniform_real_distribution<float> wide(-70000.0f, 70000.0f);
  std::uniform_int_distribution<int> shift(0, 39);
  for (std::uint64_t c = 0; c < 1000; ++c) {
    const std::uint64_t cs = case_seed(seed, c);
    std::mt19937_64 rng(cs);
    std::vector<float> x(len(rng));
    // Mostly binary16-range values at varied exponents, every 7th an arbitrary bit pattern.
    for (float& v : x) v = std::ldexp(wide(rng), -shift(rng));
    for (std::size_t i = 0; i < x.size(); i += 7) x[i] = std::bit_cast<float>(bits(rng));
    std::vector<F16Bits> h(x.size());
    for (auto [op, fn] : {std::pair{"f32_to_f16_row.reference", ks.f32_to_f16_row.reference},
                          std::pair{"f32_to_f16_row", ks.f32_to_f16_row.active}}) {
      fn(x, h);
      for (std::size_t i = 0; i < x.size(); ++i) {
        const std::uint16_t want = f16_encode(x[i]).bits;
        if (h[i].bits != want) {
          r.passed = false;
          r.failure = failure(op, cs, i, "encoded " + hex(h[i].bits) + ", expected " + hex(want));
          return r;
        }
      }
    }
    r.cases += 2 * x.size();
  }
  return r;
}

template <QuantBlock Block>
bool verify_quant_format(VerifyResult& r, std::uint64_t seed, const char* op) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> log_mag(std::log(1e-2), std::log(1e2));
  std::uniform_real_distribution<float> unit(-1.0f, 1.0f);
  std::array<float, kBlockSize> x;
  std::array<float, kBlockSize> y;
  for (std::size_t k = 0; k < 100000; ++k) {
    const float mag = static_cast<float>(std::exp(log_mag(rng)));
    for (float& v : x) v = unit(rng) * mag;
    const Block b = quantize_block<Block>(x);
    dequantize_block(b, std::span<float, kBlockSize>(y));
    const double d = decoded_scale(b);
    for (std::size_t i = 0; i < kBlockSize; ++i) {
      const int q = b.quants[i];
      const double err = std::fabs(static_cast<double>(x[i]) - y[i]);
      if (q < -kQuantMax || q > kQuantMax || err > d / 2 + ulp_of(y[i])) {
        r.passed = false;
        r.failure = failure(op, seed, k * kBlockSize + i,
                            "|x - x_hat| = " + num(err) + " exceeds d/2 + ulp with d = " + num(d) +
                                ", q = " + std::to_string(q));
        return false;
      }
    }
    r.cases += kBlockSize;
  }
  return true;
}

VerifyResult verify_quant(std::uint64_t seed) {
  VerifyResult r;
  r.suite = "quant";
  verify_quant_format<BlockQ8F16S>(r, seed, "quantize_block<Q8_F16S>") &&
      verify_quant_format<BlockQ8F32S>(r, seed + 1, "quantize_block<Q8_F32S>");
  return r;
}

bool verify_norm(VerifyResult& r, const KernelBinding<NormFn>& b, const char* op, std::uint64_t seed) {
  std::uniform_int_distribution<std::size_t> len(1, 4096);
  std::uniform_real_distribution<float> mag(0.01f, 100.0f);
  std::vector<float> x, ref, act;
  for (std::uint64_t c = 0; c < kDiffCases; ++c) {
    const std::uint64_t cs = case_seed(seed, c);
    std::mt19937_64 rng(cs);
    const std::size_t n = std::max<std::size_t>(1, len(rng) >> (c % 4 * 3));
    const float m = mag(rng);
    std::uniform_real_distribution<float> dist(-m, m);
    x.resize(n);
    ref.resize(n);
    act.resize(n);
    for (float& v : x) v = dist(rng);
    b.reference(x, ref, 1e-5f);
    b.active(x, act, 1e-5f);
    for (std::size_t i = 0; i < n; ++i) {
      const double tol = 1e-5 * std::max(std::fabs(static_cast<double>(ref[i])), 1.0);
      if (!(std::fabs(static_cast<double>(act[i]) - ref[i]) <= tol)) {
        r.passed = false;
        r.failure = failure(op, cs, i, "active " + num(act[i]) + " vs reference " + num(ref[i]));
        return false;
      }
    }
    ++r.cases;
  }
  return true;
}

template <QuantBlock Block>
void random_blocks(std::mt19937_64& rng, std::span<Block> out) {
  std::uniform_int_distribution<int> quant(-127, 127);
  std::uniform_real_distribution<float> scale(0.0f, 0.05f);
  for (Block& b : out) {
    if constexpr (std::same_as<Block, BlockQ8F16S>) {
      b.scale = f16_encode(scale(rng));
    } else {
      b.scale = scale(rng);
    }
    for (auto& q : b.quants) q = static_cast<std::int8_t>(quant(rng));
  }
}

template <QuantBlock Block>
bool verify_dot(VerifyResult& r, const KernelBinding<VecDotFn<Block>>& dot,
                const KernelBinding<BlockSumsFn<Block>>& sums, const char* dot_op, const char* sums_op,
                std::uint64_t seed) {
  std::uniform_int_distribution<std::size_t> blocks(1, 128);
  for (std::uint64_t c = 0; c < kDiffCases; ++c) {
    const std::uint64_t cs = case_seed(seed, c);
    std::mt19937_64 rng(cs);
    const std::size_t nb = blocks(rng);
    std::vector<Block> a(nb), b(nb);
    random_blocks<Block>(rng, a);
    random_blocks<Block>(rng, b);

    std::vector<std::int32_t> rs(nb), as(nb);
    sums.reference(a, b, rs);
    sums.active(a, b, as);
    double magnitude = 0.0;
    for (std::size_t k = 0; k < nb; ++k) {
      std::int32_t exact = 0;
      for (std::size_t i = 0; i < kBlockSize; ++i) exact += std::int32_t{a[k].quants[i]} * b[k].quants[i];
      if (rs[k] != exact || as[k] != exact) {
        r.passed = false;
        r.failure = failure(rs[k] != exact ? std::string(sums_op) + ".reference" : std::string(sums_op), cs, k,
                            "block sum " + std::to_string(rs[k] != exact ? rs[k] : as[k]) + ", expected " +
                                std::to_string(exact));
        return false;
      }
      magnitude += std::fabs(static_cast<double>(decoded_scale(a[k])) * decoded_scale(b[k]) * exact);
    }
    const double ref = dot.reference(a, b);
    const double act = dot.active(a, b);
    if (!(std::fabs(act - ref) <= 1e-4 * std::max(std::fabs(ref), magnitude))) {
      r.passed = false;
      r.failure = failure(dot_op, cs, 0, "active " + num(act) + " vs reference " + num(ref));
      return false;
    }
    r.cases += 2;
  }
  return true;
}

VerifyResult verify_kernels(const KernelSet& ks, std::uint64_t seed) {
  VerifyResult r;
  r.suite = "kernels";
  verify_norm(r, ks.norm_f32, "norm_f32", seed) && verify_norm(r, ks.rms_norm_f32, "rms_norm_f32", seed + 1) &&
      verify_dot<BlockQ8F16S>(r, ks.vec_dot_q8_f16s, ks.block_sums_f16s, "vec_dot_q8_f16s", "block_sums_q8_f16s",
                              seed + 2) &&
      verify_dot<BlockQ8F32S>(r, ks.vec_dot_q8_f32s, ks.block_sums_f32s, "vec_dot_q8_f32s", "block_sums_q8_f32s",
                              seed + 3);
  return r;
}

}  // namespace

VerifyResult run_verify_suite(std::string_view suite, const KernelSet& ks, std::uint64_t seed) {
  if (suite == "f16") return verify_f16(ks, seed);
  if (suite == "quant") return verify_quant(seed);
  if (suite == "kernels") return verify_kernels(ks, seed);
  throw std::invalid_argument("unknown verify suite '" + std::string(suite) + "' (expected f16, quant or kernels)");
}

}  // namespace qf
