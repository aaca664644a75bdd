// Copyright 2026 The qf Authors
// SPDX-License-Identifier: Apache-2.0

// QTC1 tensor container and the model quantizer.
//
// Layout (all fields little-endian, offsets relative to the payload region):
//   header  "QTC1" | version u32 | tensor_count u32 | payload_offset u64
//   entry   name_len u32 | name | n_dims u32 | dims u64[n_dims] | format u32 |
//           offset u64 | nbytes u64
//   payload concatenated tensor payloads (Q8 payloads use the block wire layout)

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "qf/errors.hpp"
#include "qf/quant.hpp"

namespace qf {

inline constexpr char kModelMagic[4] = {'Q', 'T', 'C', '1'};
inline constexpr std::uint32_t kModelVersion = 1;
inline constexpr std::size_t kModelHeaderBytes = 20;
inline constexpr std::size_t kMaxDims = 4;

struct QTensor {
  std::string name;
  std::vector<std::uint64_t> dims;  // outermost first
  TensorFormat format = TensorFormat::kF32;
  std::vector<std::byte> payload;

  std::uint64_t n_elements() const;
  bool operator==(const QTensor&) const = default;
};

// Throws PreconditionError unless t has a non-empty name, 1..4 positive
// extents, a Q8-compatible inner extent, and a payload of container_bytes().
void validate_tensor(const QTensor& t);

QTensor make_f32_tensor(std::string name, std::vector<std::uint64_t> dims, std::span<const float> values);
QTensor make_f16_tensor(std::string name, std::vector<std::uint64_t> dims, std::span<const float> values);

template <QuantBlock Block>
QTensor make_q8_tensor(std::string name, std::vector<std::uint64_t> dims, std::span<const Block> blocks);

// Element values of any format (Q8 payloads are dequantized).
std::vector<float> tensor_values(const QTensor& t);

// Decoded blocks of a Q8 tensor; throws PreconditionError on a format mismatch.
template <QuantBlock Block>
std::vector<Block> tensor_blocks(const QTensor& t);

std::size_t table_entry_bytes(const QTensor& t);

std::vector<std::byte> serialize_model(std::span<const QTensor> tensors);
// Validates every input and throws ParseError for any malformed byte stream.
std::vector<QTensor> parse_model(std::span<const std::byte> bytes);

// I/O failures throw std::runtime_error.
void save_model(std::span<const QTensor> tensors, const std::filesystem::path& path);
std::vector<QTensor> load_model(const std::filesystem::path& path);

struct QuantReport {
  struct Entry {
    std::string name;
    TensorFormat from;
    TensorFormat to;
    std::uint64_t bytes_before;
    std::uint64_t bytes_after;
    std::optional<QuantStats> stats;  // set for quantized tensors only
  };
  ScaleFormat scale_format = ScaleFormat::kF16;
  std::vector<Entry> entries;
  std::uint64_t total_bytes_before = 0;
  std::uint64_t total_bytes_after = 0;
  std::uint64_t quantized_bytes = 0;  // Q8 payload bytes produced
};

// 2-D tensors whose inner extent is a multiple of 32 become Q8; the rest pass
// through unchanged. Sources must be F32 or F16 (PreconditionError otherwise);
// non-finite or out-of-range weights raise PreconditionError naming the tensor.
std::vector<QTensor> quantize_tensors(std::span<const QTensor> src, ScaleFormat format,
                                      QuantReport* report = nullptr);

QuantReport quantize_model(const std::filesystem::path& src, ScaleFormat format,
                           const std::filesystem::path& dst);

}  // namespace qf
