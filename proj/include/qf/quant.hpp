// Copyright 2026 The qf Authors
// SPDX-License-Identifier: Apache-2.0

// Group-of-32 symmetric Int8 quantization.
//
// Each block of 32 floats shares one scale d = max|x| / 127 and stores
// q_i = round_half_even(x_i / d) in [-127, 127]. The scale is kept either as
// binary16 (34-byte blocks) or binary32 (36-byte blocks). The binary32 form
// costs 2/34 = 5.88% more memory but never needs a half->single conversion
// when the block is consumed.

#pragma once

#include <array>
#include <concepts>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <variant>
#include <vector>

#include "qf/halffloat.hpp"

namespace qf {

inline constexpr std::size_t kBlockSize = 32;
inline constexpr int kQuantMax = 127;

enum class ScaleFormat : std::uint8_t { kF16, kF32 };

struct BlockQ8F16S {
  F16Bits scale;
  std::array<std::int8_t, kBlockSize> quants;

  bool operator==(const BlockQ8F16S&) const = default;
};

struct BlockQ8F32S {
  float scale;
  std::array<std::int8_t, kBlockSize> quants;

  bool operator==(const BlockQ8F32S&) const = default;
};

static_assert(sizeof(BlockQ8F16S) == 34);
static_assert(sizeof(BlockQ8F32S) == 36);

template <class Block>
concept QuantBlock = std::same_as<Block, BlockQ8F16S> || std::same_as<Block, BlockQ8F32S>;

template <QuantBlock Block>
inline constexpr ScaleFormat kScaleFormatOf =
    std::same_as<Block, BlockQ8F16S> ? ScaleFormat::kF16 : ScaleFormat::kF32;

// Serialized block sizes, identical to the in-memory layout.
inline constexpr std::size_t kBlockBytesF16S = 2 + kBlockSize;
inline constexpr std::size_t kBlockBytesF32S = 4 + kBlockSize;

struct QuantStats {
  float max_abs_err = 0.0f;
  float rmse = 0.0f;
  std::size_t n_elements = 0;
};

enum class TensorFormat : std::uint32_t { kF32 = 0, kF16 = 1, kQ8F16S = 2, kQ8F32S = 3 };

std::string_view to_string(ScaleFormat f);
std::string_view to_string(TensorFormat f);
TensorFormat tensor_format_of(ScaleFormat f);

// Quantizes one block of exactly 32 finite values. Throws std::domain_error on
// NaN/Inf input, and for F16 scales whose absmax/127 overflows binary16.
template <QuantBlock Block>
Block quantize_block(std::span<const float, kBlockSize> x);

std::variant<BlockQ8F16S, BlockQ8F32S> quantize_block(std::span<const float, kBlockSize> x,
                                                      ScaleFormat format);

// The scale the block multiplies its quants by. For F16S this is the
// binary16 decode of the stored scale.
inline float decoded_scale(const BlockQ8F32S& b) { return b.scale; }
float decoded_scale(const BlockQ8F16S& b);

template <QuantBlock Block>
void dequantize_block(const Block& b, std::span<float, kBlockSize> out);

// Quantizes x into x.size()/32 blocks. x.size() must be a positive multiple of
// 32 and out must hold exactly that many blocks. Returns error statistics of
// the round trip, accumulated in double.
template <QuantBlock Block>
QuantStats quantize_row(std::span<const float> x, std::span<Block> out);

template <QuantBlock Block>
void dequantize_row(std::span<const Block> blocks, std::span<float> out);

struct QuantizedRow {
  std::variant<std::vector<BlockQ8F16S>, std::vector<BlockQ8F32S>> blocks;
  QuantStats stats;
};

QuantizedRow quantize_row(std::span<const float> x, ScaleFormat format);

// Payload size of an n-element tensor stored in the given format. Q8 formats
// require n % 32 == 0 and throw std::invalid_argument otherwise.
std::uint64_t container_bytes(std::uint64_t n, TensorFormat format);

// Little-endian block wire layout: [scale][32 two's-complement quants].
template <QuantBlock Block>
void write_blocks(std::span<const Block> blocks, std::span<std::byte> out);

template <QuantBlock Block>
void read_blocks(std::span<const std::byte> in, std::span<Block> blocks);

}  // namespace qf
