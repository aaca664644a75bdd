// Copyright 2026 The qf Authors
// SPDX-License-Identifier: Apache-2.0

#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "qf/cli.hpp"

namespace {

qf::ScaleFormat scale_format(const std::string& name) {
  return name == "f16" ? qf::ScaleFormat::kF16 : qf::ScaleFormat::kF32;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"qf: block-quantized Int8 kernels, container tools and throughput bench"};
  app.require_subcommand(1);

  qf::cli::QuantizeArgs qargs;
  auto* quantize = app.add_subcommand("quantize", "Quantize an F32/F16 container to Q8");
  quantize->add_option("--in", qargs.in, "Source container")->required();
  quantize->add_option("--out", qargs.out, "Destination container")->required();
  std::string qscale = "f32";
  quantize->add_option("--scale-format", qscale, "Block scale storage: f16 or f32")
      ->check(CLI::IsMember({"f16", "f32"}))
      ->capture_default_str();

  qf::cli::BenchArgs bargs;
  qf::BenchConfig& c = bargs.config;
  std::string csv;
  auto* bench = app.add_subcommand("bench", "Time prefill, decode and individual kernels on a synthetic model");
  bench->add_option("--hidden", c.hidden_dim, "Hidden dimension (multiple of 32)")->capture_default_str();
  bench->add_option("--ffn", c.ffn_dim, "Feed-forward dimension (multiple of 32)")->capture_default_str();
  bench->add_option("--layers", c.n_layers, "Number of layers")->capture_default_str();
  bench->add_option("--prefill-tokens", c.prefill_tokens, "Tokens per prefill batch")->capture_default_str();
  bench->add_option("--decode-steps", c.decode_steps, "Tokens per decode run")->capture_default_str();
  bench->add_option("--warmup", c.warmup_iters, "Untimed warm-up iterations")->capture_default_str();
  bench->add_option("--repeat", c.repeat_count, "Timed repetitions")->capture_default_str();
  std::string bscale = "f32";
  bench->add_option("--scale-format", bscale, "Block scale storage: f16 or f32")
      ->check(CLI::IsMember({"f16", "f32"}))
      ->capture_default_str();
  bench->add_option("--threads", c.threads, "Worker threads, capped by QF_THREADS")->capture_default_str();
  bench->add_option("--seed", c.seed, "Seed for weights and inputs")->capture_default_str();
  bench->add_flag("--force-scalar", c.force_scalar, "Use scalar reference kernels only");
  bench->add_flag("--no-kernel-timings", "Skip the per-kernel micro-benchmarks")
      ->each([&](const std::string&) { c.kernel_timings = false; });
  bench->add_option("--csv", csv, "Write the CSV report to this path");

  qf::cli::VerifyArgs vargs;
  auto* verify = app.add_subcommand("verify", "Run the codec, quantizer and kernel self-checks");
  verify->add_option("--suite", vargs.suites, "Suite to run (f16, quant, kernels); repeatable");
  verify->add_option("--seed", vargs.seed, "Base seed for randomized cases")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : qf::cli::kPrecondition;
  }

  if (*quantize) {
    qargs.scale_format = scale_format(qscale);
    return qf::cli::cmd_quantize(qargs, std::cout, std::cerr);
  }
  if (*bench) {
    c.scale_format = scale_format(bscale);
    if (!csv.empty()) bargs.csv = csv;
    return qf::cli::cmd_bench(bargs, std::cout, std::cerr);
  }
  return qf::cli::cmd_verify(vargs, std::cout, std::cerr);
}
