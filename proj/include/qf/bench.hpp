// Copyright 2026 The qf Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "qf/kernels.hpp"
#include "qf/quant.hpp"

namespace qf {

struct BenchConfig {
  std::size_t hidden_dim = 512;
  std::size_t ffn_dim = 1024;
  std::size_t n_layers = 8;
  std::size_t prefill_tokens = 64;
  std::size_t decode_steps = 64;
  std::size_t warmup_iters = 1;
  std::size_t repeat_count = 5;
  ScaleFormat scale_format = ScaleFormat::kF32;
  std::size_t threads = 1;
  std::uint64_t seed = 1;
  bool force_scalar = false;
  bool kernel_timings = true;
};

// Throws PreconditionError unless every count is >= 1 and both dims are
// multiples of 32.
void validate(const BenchConfig& cfg);

struct Summary {
  double median = 0.0;
  double min = 0.0;
  double max = 0.0;
};

// Median of an even count is the mean of the two middle samples.
Summary summarize(std::span<const double> samples);

struct KernelTiming {
  std::string name;
  std::string feature;       // feature tag of the active binding
  std::vector<double> reference_ns;  // per-call, one entry per repeat
  std::vector<double> active_ns;
  Summary reference;
  Summary active;

  double speedup() const { return reference.median / active.median; }
};

struct BenchReport {
  BenchConfig config;
  std::size_t threads = 1;  // after the QF_THREADS cap
  std::string dispatch;
  std::vector<KernelSet::Entry> kernels;

  std::vector<double> prefill_rates;  // tokens/s per repeat
  std::vector<double> decode_rates;
  Summary prefill;
  Summary decode;
  std::vector<KernelTiming> kernel_timings;

  std::uint64_t resident_bytes = 0;  // after model construction
  std::uint64_t peak_resident_bytes = 0;

  std::uint64_t weight_elements = 0;
  std::uint64_t container_f32 = 0;
  std::uint64_t container_f16 = 0;
  std::uint64_t container_q8_f16s = 0;
  std::uint64_t container_q8_f32s = 0;
  std::uint64_t model_payload_bytes = 0;

  std::string prefill_checksum;  // FNV-1a 64 of the output bits, hex
  std::string decode_checksum;
  double prefill_l2 = 0.0;
  double decode_l2 = 0.0;
};

BenchReport run_bench(const BenchConfig& cfg);

inline constexpr std::string_view kCsvHeader = "run_id,metric,value,unit,scale_format,dispatch,threads,seed";

struct CsvRow {
  std::string run_id;  // "1".."N" for samples, "median" for the summary, "static" otherwise
  std::string metric;
  std::string value;
  std::string unit;
};

std::vector<CsvRow> csv_rows(const BenchReport& r);
void write_csv(const BenchReport& r, std::ostream& out);
void write_text(const BenchReport& r, std::ostream& out);

// True for metrics derived only from the computation (sizes, checksums),
// which must be identical across runs with the same seed and dispatch.
bool is_computed_metric(std::string_view metric);

// Resident set size and its high-water mark from /proc/self/status; zero
// where unavailable.
std::uint64_t resident_bytes();
std::uint64_t peak_resident_bytes();

std::string fnv1a_hex(std::span<const float> values);

}  // namespace qf
