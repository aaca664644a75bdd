// Copyright 2026 The qf Authors
// SPDX-License-Identifier: Apache-2.0

// Self-checks behind `qf verify`: exhaustive binary16 round trip,
// quantization error bounds, and reference-vs-active kernel differentials.

#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "qf/kernels.hpp"

namespace qf {

struct VerifyResult {
  std::string suite;
  bool passed = true;
  std::uint64_t cases = 0;
  // On failure: "<operator> seed=<seed> index=<i>: <detail>".
  std::string failure;
};

inline constexpr std::string_view kVerifySuites[] = {"f16", "quant", "kernels"};

// Throws std::invalid_argument for an unknown suite name.
VerifyResult run_verify_suite(std::string_view suite, const KernelSet& ks, std::uint64_t seed = 1);

}  // namespace qf
