// Copyright 2026 The qf Authors
// SPDX-License-Identifier: Apache-2.0

#include "qf/quant.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <stdexcept>
#include <string>

#include "qf/instrument.hpp"

namespace qf {
namespace {

// Bit test so that -ffinite-math-only builds keep rejecting NaN/Inf.
bool is_finite(float v) {
  return (std::bit_cast<std::uint32_t>(v) & 0x7F800000u) != 0x7F800000u;
}

float absmax_checked(std::span<const float, kBlockSize> x) {
  float amax = 0.0f;
  for (float v : x) {
    if (!is_finite(v)) throw std::domain_error("quantize_block: non-finite input");
    amax = std::max(amax, std::fabs(v));
  }
  return amax;
}

// q = round_half_even(x / d), clamped to the symmetric range. d > 0.
void fill_quants(std::span<const float, kBlockSize> x, float d,
                 std::array<std::int8_t, kBlockSize>& quants) {
  for (std::size_t i = 0; i < kBlockSize; ++i) {
    const float q = std::nearbyint(x[i] / d);
    quants[i] = static_cast<std::int8_t>(
        std::clamp(q, static_cast<float>(-kQuantMax), static_cast<float>(kQuantMax)));
  }
}

}  // namespace

std::string_view to_string(ScaleFormat f) { return f == ScaleFormat::kF16 ? "f16" : "f32"; }

std::string_view to_string(TensorFormat f) {
  switch (f) {
    case TensorFormat::kF32: return "F32";
    case TensorFormat::kF16: return "F16";
    case TensorFormat::kQ8F16S: return "Q8_F16S";
    case TensorFormat::kQ8F32S: return "Q8_F32S";
  }
  return "?";
}

TensorFormat tensor_format_of(ScaleFormat f) {
  return f == ScaleFormat::kF16 ? TensorFormat::kQ8F16S : TensorFormat::kQ8F32S;
}

template <>
BlockQ8F32S quantize_block<BlockQ8F32S>(std::span<const float, kBlockSize> x) {
  BlockQ8F32S b{};
  const float d = absmax_checked(x) / static_cast<float>(kQuantMax);
  b.scale = d;
  if (d != 0.0f) fill_quants(x, d, b.quants);
  return b;
}

template <>
BlockQ8F16S quantize_block<BlockQ8F16S>(std::span<const float, kBlockSize> x) {
  BlockQ8F16S b{};
  b.scale = f16_encode(absmax_checked(x) / static_cast<float>(kQuantMax));
  if ((b.scale.bits & 0x7C00u) == 0x7C00u) {
    throw std::domain_error("quantize_block: block scale overflows binary16");
  }
  // Quants are taken against the scale that is actually stored.
  const float d = f16_decode(b.scale);
  if (d != 0.0f) fill_quants(x, d, b.quants);
  return b;
}

std::variant<BlockQ8F16S, BlockQ8F32S> quantize_block(std::span<const float, kBlockSize> x,
                                                      ScaleFormat format) {
  if (format == ScaleFormat::kF16) return quantize_block<BlockQ8F16S>(x);
  return quantize_block<BlockQ8F32S>(x);
}

float decoded_scale(const BlockQ8F16S& b) {
  instrument::count_f16_scale_decode();
  return f16_decode(b.scale);
}

template <QuantBlock Block>
void dequantize_block(const Block& b, std::span<float, kBlockSize> out) {
  const float d = decoded_scale(b);
  for (std::size_t i = 0; i < kBlockSize; ++i) out[i] = d * static_cast<float>(b.quants[i]);
}

template <QuantBlock Block>
QuantStats quantize_row(std::span<const float> x, std::span<Block> out) {
  if (x.empty() || x.size() % kBlockSize != 0) {
    throw std::invalid_argument("quantize_row: length " + std::to_string(x.size()) +
                                " is not a positive multiple of 32");
  }
  if (out.size() != x.size() / kBlockSize) {
    throw std::invalid_argument("quantize_row: output block count mismatch");
  }

  double max_err = 0.0;
  double sum_sq = 0.0;
  std::array<float, kBlockSize> back{};
  for (std::size_t k = 0; k < out.size(); ++k) {
    const auto src = x.subspan(k * kBlockSize).template first<kBlockSize>();
    out[k] = quantize_block<Block>(src);
    dequantize_block(out[k], std::span<float, kBlockSize>(back));
    for (std::size_t i = 0; i < kBlockSize; ++i) {
      const double err = std::fabs(static_cast<double>(src[i]) - static_cast<double>(back[i]));
      max_err = std::max(max_err, err);
      sum_sq += err * err;
    }
  }
  return QuantStats{static_cast<float>(max_err),
                    static_cast<float>(std::sqrt(sum_sq / static_cast<double>(x.size()))),
                    x.size()};
}

template <QuantBlock Block>
void dequantize_row(std::span<const Block> blocks, std::span<float> out) {
  if (out.size() != blocks.size() * kBlockSize) {
    throw std::invalid_argument("dequantize_row: output length mismatch");
  }
  for (std::size_t k = 0; k < blocks.size(); ++k) {
    dequantize_block(blocks[k], out.subspan(k * kBlockSize).template first<kBlockSize>());
  }
}

QuantizedRow quantize_row(std::span<const float> x, ScaleFormat format) {
  QuantizedRow row;
  auto run = [&](auto tag) {
    using Block = decltype(tag);
    std::vector<Block> blocks(x.size() / kBlockSize);
    row.stats = quantize_row<Block>(x, blocks);
    row.blocks = std::move(blocks);
  };
  if (format == ScaleFormat::kF16) {
    run(BlockQ8F16S{});
  } else {
    run(BlockQ8F32S{});
  }
  return row;
}

std::uint64_t container_bytes(std::uint64_t n, TensorFormat format) {
  const bool q8 = format == TensorFormat::kQ8F16S || format == TensorFormat::kQ8F32S;
  if (q8 && n % kBlockSize != 0) {
    throw std::invalid_argument("container_bytes: " + std::to_string(n) +
                                " elements is not a multiple of 32");
  }
  switch (format) {
    case TensorFormat::kF32: return 4 * n;
    case TensorFormat::kF16: return 2 * n;
    case TensorFormat::kQ8F16S: return kBlockBytesF16S * (n / kBlockSize);
    case TensorFormat::kQ8F32S: return kBlockBytesF32S * (n / kBlockSize);
  }
  throw std::invalid_argument("container_bytes: unknown format");
}

namespace {

template <QuantBlock Block>
constexpr std::size_t kWireBytes =
    std::same_as<Block, BlockQ8F16S> ? kBlockBytesF16S : kBlockBytesF32S;

template <QuantBlock Block>
std::uint32_t scale_bits(const Block& b) {
  if constexpr (std::same_as<Block, BlockQ8F16S>) {
    return b.scale.bits;
  } else {
    return std::bit_cast<std::uint32_t>(b.scale);
  }
}

}  // namespace

template <QuantBlock Block>
void write_blocks(std::span<const Block> blocks, std::span<std::byte> out) {
  constexpr std::size_t kScaleBytes = kWireBytes<Block> - kBlockSize;
  if (out.size() != blocks.size() * kWireBytes<Block>) {
    throw std::invalid_argument("write_blocks: buffer size mismatch");
  }
  std::byte* p = out.data();
  for (const Block& b : blocks) {
    const std::uint32_t s = scale_bits(b);
    for (std::size_t i = 0; i < kScaleBytes; ++i) p[i] = static_cast<std::byte>(s >> (8 * i));
    std::memcpy(p + kScaleBytes, b.quants.data(), kBlockSize);
    p += kWireBytes<Block>;
  }
}

template <QuantBlock Block>
void read_blocks(std::span<const std::byte> in, std::span<Block> blocks) {
  constexpr std::size_t kScaleBytes = kWireBytes<Block> - kBlockSize;
  if (in.size() != blocks.size() * kWireBytes<Block>) {
    throw std::invalid_argument("read_blocks: buffer size mismatch");
  }
  const std::byte* p = in.data();
  for (Block& b : blocks) {
    std::uint32_t s = 0;
    for (std::size_t i = 0; i < kScaleBytes; ++i) s |= std::to_integer<std::uint32_t>(p[i]) << (8 * i);
    if constexpr (std::same_as<Block, BlockQ8F16S>) {
      b.scale = F16Bits{static_cast<std::uint16_t>(s)};
    } else {
      b.scale = std::bit_cast<float>(s);
    }
    std::memcpy(b.quants.data(), p + kScaleBytes, kBlockSize);
    p += kWireBytes<Block>;
  }
}

template void dequantize_block(const BlockQ8F16S&, std::span<float, kBlockSize>);
template void dequantize_block(const BlockQ8F32S&, std::span<float, kBlockSize>);
template QuantStats quantize_row(std::span<const float>, std::span<BlockQ8F16S>);
template QuantStats quantize_row(std::span<const float>, std::span<BlockQ8F32S>);
template void dequantize_row(std::span<const BlockQ8F16S>, std::span<float>);
template void dequantize_row(std::span<const BlockQ8F32S>, std::span<float>);
template void write_blocks(std::span<const BlockQ8F16S>, std::span<std::byte>);
template void write_blocks(std::span<const BlockQ8F32S>, std::span<std::byte>);
template void read_blocks(std::span<const std::byte>, std::span<BlockQ8F16S>);
template void read_blocks(std::span<const std::byte>, std::span<BlockQ8F32S>);

}  // namespace qf
