// Copyright 2026 The qf Authors
// SPDX-License-Identifier: Apache-2.0

#include "qf/bench.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "qf/cli.hpp"
#include "qf/errors.hpp"
#include "qf/tensorio.hpp"
#include "qf/verify.hpp"

namespace qf {
namespace {

BenchConfig small_config() {
  BenchConfig c;
  c.hidden_dim = 64;
  c.ffn_dim = 128;
  c.n_layers = 2;
  c.prefill_tokens = 8;
  c.decode_steps = 8;
  c.repeat_count = 5;
  c.force_scalar = true;
  return c;
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  return out;
}

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string line;
  while (std::getline(ss, line)) out.push_back(line);
  return out;
}

TEST(BenchCsv, GoldenHeader) {
  const BenchReport r = run_bench(small_config());
  std::ostringstream csv;
  write_csv(r, csv);
  const auto rows = lines(csv.str());
  ASSERT_FALSE(rows.empty());
  EXPECT_EQ(rows[0], "run_id,metric,value,unit,scale_format,dispatch,threads,seed");
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto cells = split(rows[i]);
    ASSERT_EQ(cells.size(), 8u) << rows[i];
    EXPECT_EQ(cells[4], "f32");
    EXPECT_EQ(cells[5], "scalar");
    EXPECT_EQ(cells[6], "1");
    EXPECT_EQ(cells[7], "1");
  }
}

TEST(BenchCsv, FiveSamplesAndOneMedianPerTimedMetric) {
  const BenchReport r = run_bench(small_config());
  std::map<std::string, std::vector<std::string>> run_ids;
  for (const CsvRow& row : csv_rows(r)) run_ids[row.metric].push_back(row.run_id);

  const std::vector<std::string> timed_ids = {"1", "2", "3", "4", "5", "median"};
  std::size_t timed = 0;
  for (const auto& [metric, ids] : run_ids) {
    if (ids.size() == 1) {
      EXPECT_EQ(ids[0], "static") << metric;
    } else {
      EXPECT_EQ(ids, timed_ids) << metric;
      ++timed;
    }
  }
  // prefill, decode, and reference + active for six kernels.
  EXPECT_EQ(timed, 2u + 2u * 6u);
  EXPECT_TRUE(run_ids.count("kernel.vec_dot_q8_f32s.speedup"));
  EXPECT_TRUE(run_ids.count("memory.resident"));
}

TEST(BenchCsv, MedianRowMatchesSummary) {
  const BenchReport r = run_bench(small_config());
  for (const CsvRow& row : csv_rows(r)) {
    if (row.metric == "decode_rate" && row.run_id == "median") {
      // Rates are printed to six significant digits.
      EXPECT_NEAR(std::stod(row.value), r.decode.median, 1e-5 * r.decode.median);
    }
  }
  EXPECT_GT(r.prefill.min, 0.0);
  EXPECT_GT(r.decode.min, 0.0);
  EXPECT_LE(r.decode.min, r.decode.median);
  EXPECT_LE(r.decode.median, r.decode.max);
}

TEST(BenchReport, ContainerSizesFollowFormats) {
  const BenchConfig c = small_config();
  const BenchReport r = run_bench(c);
  const std::uint64_t n = 2 * c.n_layers * c.hidden_dim * c.ffn_dim;
  EXPECT_EQ(r.weight_elements, n);
  EXPECT_EQ(r.container_f32, 4 * n);
  EXPECT_EQ(r.container_f16, 2 * n);
  EXPECT_EQ(r.container_q8_f16s, n / 32 * 34);
  EXPECT_EQ(r.container_q8_f32s, n / 32 * 36);
  EXPECT_EQ(r.model_payload_bytes, r.container_q8_f32s);
  EXPECT_GT(r.resident_bytes, 0u);
  EXPECT_GE(r.peak_resident_bytes, r.resident_bytes);
}

TEST(BenchReport, ComputedOutputsAreDeterministic) {
  for (ScaleFormat fmt : {ScaleFormat::kF16, ScaleFormat::kF32}) {
    BenchConfig c = small_config();
    c.scale_format = fmt;
    c.repeat_count = 2;
    c.kernel_timings = false;
    const auto a = csv_rows(run_bench(c));
    const auto b = csv_rows(run_bench(c));
    std::size_t computed = 0;
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
      ASSERT_EQ(a[i].metric, b[i].metric);
      if (!is_computed_metric(a[i].metric)) continue;
      EXPECT_EQ(a[i].value, b[i].value) << a[i].metric;
      ++computed;
    }
    EXPECT_EQ(computed, 9u);
  }
}

TEST(BenchReport, SeedChangesOutputs) {
  BenchConfig c = small_config();
  c.repeat_count = 1;
  c.kernel_timings = false;
  const BenchReport a = run_bench(c);
  c.seed = 2;
  const BenchReport b = run_bench(c);
  EXPECT_NE(a.decode_checksum, b.decode_checksum);
  EXPECT_NE(a.prefill_checksum, b.prefill_checksum);
}

TEST(BenchConfigValidate, RejectsBadCounts) {
  EXPECT_NO_THROW(validate(BenchConfig{}));
  auto bad = [](auto mutate) {
    BenchConfig c;
    mutate(c);
    EXPECT_THROW(validate(c), PreconditionError);
  };
  bad([](BenchConfig& c) { c.hidden_dim = 48; });
  bad([](BenchConfig& c) { c.hidden_dim = 0; });
  bad([](BenchConfig& c) { c.ffn_dim = 100; });
  bad([](BenchConfig& c) { c.n_layers = 0; });
  bad([](BenchConfig& c) { c.prefill_tokens = 0; });
  bad([](BenchConfig& c) { c.decode_steps = 0; });
  bad([](BenchConfig& c) { c.warmup_iters = 0; });
  bad([](BenchConfig& c) { c.repeat_count = 0; });
  bad([](BenchConfig& c) { c.threads = 0; });
}

TEST(Summarize, MedianMinMax) {
  const std::vector<double> odd = {5, 1, 3};
  const Summary s = summarize(odd);
  EXPECT_EQ(s.median, 3);
  EXPECT_EQ(s.min, 1);
  EXPECT_EQ(s.max, 5);
  const std::vector<double> even = {4, 1, 2, 10};
  EXPECT_EQ(summarize(even).median, 3);
  const std::vector<double> one = {7};
  EXPECT_EQ(summarize(one).median, 7);
  EXPECT_THROW(summarize({}), std::invalid_argument);
}

TEST(Fnv1a, MatchesByteWiseDefinition) {
  EXPECT_EQ(fnv1a_hex({}), "cbf29ce484222325");
  const std::vector<float> v = {1.0f, -2.5f, 0.0f};
  std::uint64_t h = 0xcbf29ce484222325ull;
  unsigned char bytes[sizeof(float) * 3];
  std::memcpy(bytes, v.data(), sizeof bytes);
  for (unsigned char b : bytes) {
    h ^= b;
    h *= 0x100000001b3ull;
  }
  char want[17];
  std::snprintf(want, sizeof want, "%016llx", static_cast<unsigned long long>(h));
  EXPECT_EQ(fnv1a_hex(v), want);
}

TEST(Verify, AllSuitesPass) {
  for (Dispatch d : {Dispatch::kAuto, Dispatch::kForceScalar}) {
    const KernelSet ks = detect_features(d);
    for (std::string_view suite : kVerifySuites) {
      const VerifyResult r = run_verify_suite(suite, ks);
      EXPECT_TRUE(r.passed) << suite << ": " << r.failure;
      EXPECT_GT(r.cases, 0u);
    }
  }
  EXPECT_THROW(run_verify_suite("nope", active_kernels()), std::invalid_argument);
}

TEST(Verify, ReportsOperatorSeedAndIndex) {
  KernelSet ks = detect_features(Dispatch::kForceScalar);
  ks.vec_dot_q8_f16s.active = [](std::span<const BlockQ8F16S>, std::span<const BlockQ8F16S>) { return 1e9f; };
  const VerifyResult r = run_verify_suite("kernels", ks, 7);
  ASSERT_FALSE(r.passed);
  EXPECT_EQ(r.failure.rfind("vec_dot_q8_f16s seed=", 0), 0u) << r.failure;
  EXPECT_NE(r.failure.find(" index=0: "), std::string::npos) << r.failure;
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = std::filesystem::temp_directory_path() /
           ("qf_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    std::filesystem::create_directories(dir_);
  }
  void TearDown() override { std::filesystem::remove_all(dir_); }

  std::filesystem::path write_source() {
    std::vector<float> a(4 * 64), b(2 * 96);
    for (std::size_t i = 0; i < a.size(); ++i) a[i] = std::sin(0.1f * static_cast<float>(i));
    for (std::size_t i = 0; i < b.size(); ++i) b[i] = std::cos(0.3f * static_cast<float>(i));
    const std::vector<QTensor> t = {make_f32_tensor("blk.0.w_up", {4, 64}, a),
                                    make_f32_tensor("blk.0.w_down", {2, 96}, b)};
    const auto path = dir_ / "src.qtc";
    save_model(t, path);
    return path;
  }

  std::filesystem::path dir_;
};

TEST_F(CliTest, QuantizeReportsBothFormatRatio) {
  for (ScaleFormat fmt : {ScaleFormat::kF16, ScaleFormat::kF32}) {
    std::ostringstream out, err;
    const cli::QuantizeArgs args{write_source(), dir_ / "q.qtc", fmt};
    ASSERT_EQ(cli::cmd_quantize(args, out, err), cli::kOk) << err.str();
    EXPECT_NE(out.str().find("blk.0.w_up"), std::string::npos);
    EXPECT_NE(out.str().find("blk.0.w_down"), std::string::npos);
    // 14 blocks: 14*36 / 14*34.
    EXPECT_NE(out.str().find("payload ratio: 504/476 = 1.058824 (+5.882%)"), std::string::npos) << out.str();
    const auto q = load_model(dir_ / "q.qtc");
    EXPECT_EQ(q[0].format, fmt == ScaleFormat::kF16 ? TensorFormat::kQ8F16S : TensorFormat::kQ8F32S);
  }
}

TEST_F(CliTest, QuantizeMissingFileIsIoError) {
  std::ostringstream out, err;
  const auto missing = dir_ / "absent.qtc";
  EXPECT_EQ(cli::cmd_quantize({missing, dir_ / "o.qtc", ScaleFormat::kF16}, out, err), cli::kIoError);
  EXPECT_NE(err.str().find(missing.string()), std::string::npos) << err.str();
}

TEST_F(CliTest, QuantizeCorruptFileIsIoError) {
  const auto bad = dir_ / "bad.qtc";
  std::ofstream(bad) << "QTC1 definitely not a container";
  std::ostringstream out, err;
  EXPECT_EQ(cli::cmd_quantize({bad, dir_ / "o.qtc", ScaleFormat::kF16}, out, err), cli::kIoError);
}

TEST_F(CliTest, QuantizeAlreadyQuantizedIsPrecondition) {
  std::ostringstream out, err;
  ASSERT_EQ(cli::cmd_quantize({write_source(), dir_ / "q.qtc", ScaleFormat::kF16}, out, err), cli::kOk);
  EXPECT_EQ(cli::cmd_quantize({dir_ / "q.qtc", dir_ / "qq.qtc", ScaleFormat::kF32}, out, err),
            cli::kPrecondition);
  EXPECT_NE(err.str().find("source must be F32/F16"), std::string::npos) << err.str();
}

TEST_F(CliTest, BenchWritesCsvAndRejectsBadConfig) {
  cli::BenchArgs args{small_config(), dir_ / "out.csv"};
  args.config.repeat_count = 1;
  std::ostringstream out, err;
  ASSERT_EQ(cli::cmd_bench(args, out, err), cli::kOk) << err.str();
  EXPECT_NE(out.str().find("decode:"), std::string::npos);
  std::ifstream f(dir_ / "out.csv");
  std::string header;
  std::getline(f, header);
  EXPECT_EQ(header, kCsvHeader);

  args.config.ffn_dim = 33;
  EXPECT_EQ(cli::cmd_bench(args, out, err), cli::kPrecondition);

  args.config = small_config();
  args.config.repeat_count = 1;
  args.csv = dir_ / "no_such_dir" / "out.csv";
  EXPECT_EQ(cli::cmd_bench(args, out, err), cli::kIoError);
}

TEST_F(CliTest, VerifyExitCodes) {
  std::ostringstream out, err;
  EXPECT_EQ(cli::cmd_verify({{"f16"}, 1}, out, err), cli::kOk);
  EXPECT_NE(out.str().find("dispatch: "), std::string::npos);
  EXPECT_NE(out.str().find("PASS f16"), std::string::npos);
  EXPECT_EQ(cli::cmd_verify({{"bogus"}, 1}, out, err), cli::kPrecondition);
}

}  // namespace
}  // namespace qf
