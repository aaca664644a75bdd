// Copyright 2026 The qf Authors
// SPDX-License-Identifier: Apache-2.0

// Subcommands behind the `qf` binary. Each returns a process exit status and
// writes its report to `out`, diagnostics to `err`.

#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "qf/bench.hpp"
#include "qf/quant.hpp"

namespace qf::cli {

enum ExitCode : int {
  kOk = 0,
  kVerifyFailed = 1,
  kIoError = 2,       // unreadable/unwritable files, malformed containers
  kPrecondition = 3,  // bad arguments or unacceptable input
};

struct QuantizeArgs {
  std::filesystem::path in;
  std::filesystem::path out;
  ScaleFormat scale_format = ScaleFormat::kF32;
};

int cmd_quantize(const QuantizeArgs& args, std::ostream& out, std::ostream& err);

struct BenchArgs {
  BenchConfig config;
  std::optional<std::filesystem::path> csv;
};

int cmd_bench(const BenchArgs& args, std::ostream& out, std::ostream& err);

struct VerifyArgs {
  std::vector<std::string> suites;  // empty runs every suite
  std::uint64_t seed = 1;
};

int cmd_verify(const VerifyArgs& args, std::ostream& out, std::ostream& err);

}  // namespace qf::cli
