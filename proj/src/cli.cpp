// Copyright 2026 The qf Authors
// SPDX-License-Identifier: Apache-2.0

#include "qf/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <ostream>
#include <stdexcept>

#include "qf/errors.hpp"
#include "qf/kernels.hpp"
#include "qf/tensorio.hpp"
#include "qf/verify.hpp"

namespace qf::cli {
namespace {

void print_dispatch(const KernelSet& ks, std::ostream& out) {
  out << "dispatch: " << ks.dispatch_name() << '\n';
  for (const KernelSet::Entry& e : ks.summary()) {
    out << "  " << e.name << ": " << e.feature << (e.vectorized ? "" : " (reference)") << '\n';
  }
}

void print_quant_report(const QuantReport& rep, std::ostream& out) {
  char line[256];
  std::snprintf(line, sizeof line, "%-24s %-8s %-8s %12s %12s %12s %12s\n", "tensor", "from", "to", "bytes_in",
                "bytes_out", "rmse", "max_abs_err");
  out << line;
  std::uint64_t f16s = 0;
  std::uint64_t f32s = 0;
  for (const QuantReport::Entry& e : rep.entries) {
    const std::string from(to_string(e.from));
    const std::string to(to_string(e.to));
    if (e.stats) {
      std::snprintf(line, sizeof line, "%-24s %-8s %-8s %12llu %12llu %12.4e %12.4e\n", e.name.c_str(),
                    from.c_str(), to.c_str(), static_cast<unsigned long long>(e.bytes_before),
                    static_cast<unsigned long long>(e.bytes_after), static_cast<double>(e.stats->rmse),
                    static_cast<double>(e.stats->max_abs_err));
      f16s += container_bytes(e.stats->n_elements, TensorFormat::kQ8F16S);
      f32s += container_bytes(e.stats->n_elements, TensorFormat::kQ8F32S);
    } else {
      std::snprintf(line, sizeof line, "%-24s %-8s %-8s %12llu %12llu %12s %12s\n", e.name.c_str(), from.c_str(),
                    to.c_str(), static_cast<unsigned long long>(e.bytes_before),
                    static_cast<unsigned long long>(e.bytes_after), "-", "-");
    }
    out << line;
  }
  std::snprintf(line, sizeof line, "total: %llu -> %llu bytes (scale format %s)\n",
                static_cast<unsigned long long>(rep.total_bytes_before),
                static_cast<unsigned long long>(rep.total_bytes_after), std::string(to_string(rep.scale_format)).c_str());
  out << line;
  if (f16s > 0) {
    const double ratio = static_cast<double>(f32s) / static_cast<double>(f16s);
    std::snprintf(line, sizeof line, "q8_f32s/q8_f16s payload ratio: %llu/%llu = %.6f (%+.3f%%)\n",
                  static_cast<unsigned long long>(f32s), static_cast<unsigned long long>(f16s), ratio,
                  (ratio - 1.0) * 100.0);
    out << line;
  }
}

}  // namespace

int cmd_quantize(const QuantizeArgs& args, std::ostream& out, std::ostream& err) {
  try {
    print_quant_report(quantize_model(args.in, args.scale_format, args.out), out);
    return kOk;
  } catch (const std::invalid_argument& e) {
    err << "qf quantize: " << e.what() << '\n';
    return kPrecondition;
  } catch (const std::exception& e) {
    err << "qf quantize: " << e.what() << '\n';
    return kIoError;
  }
}

int cmd_bench(const BenchArgs& args, std::ostream& out, std::ostream& err) {
  BenchReport report;
  try {
    report = run_bench(args.config);
  } catch (const std::invalid_argument& e) {
    err << "qf bench: " << e.what() << '\n';
    return kPrecondition;
  } catch (const NumericDivergence& e) {
    err << "qf bench: " << e.what() << '\n';
    return kVerifyFailed;
  }
  write_text(report, out);
  if (args.csv) {
    std::ofstream f(*args.csv, std::ios::binary | std::ios::trunc);
    if (f) write_csv(report, f);
    if (!f) {
      err << "qf bench: cannot write '" << args.csv->string() << "'\n";
      return kIoError;
    }
  }
  return kOk;
}

int cmd_verify(const VerifyArgs& args, std::ostream& out, std::ostream& err) {
  std::vector<std::string> suites = args.suites;
  if (suites.empty()) suites.assign(std::begin(kVerifySuites), std::end(kVerifySuites));
  for (const std::string& s : suites) {
    if (std::find(std::begin(kVerifySuites), std::end(kVerifySuites), s) == std::end(kVerifySuites)) {
      err << "qf verify: unknown suite '" << s << "' (expected f16, quant or kernels)\n";
      return kPrecondition;
    }
  }

  const KernelSet& ks = active_kernels();
  print_dispatch(ks, out);
  bool ok = true;
  for (const std::string& s : suites) {
    const auto t0 = std::chrono::steady_clock::now();
    const VerifyResult r = run_verify_suite(s, ks, args.seed);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    char line[128];
    std::snprintf(line, sizeof line, " (%llu cases, %.2f s)", static_cast<unsigned long long>(r.cases), secs);
    if (r.passed) {
      out << "PASS " << r.suite << line << '\n';
    } else {
      ok = false;
      out << "FAIL " << r.suite << line << ": " << r.failure << '\n';
    }
  }
  return ok ? kOk : kVerifyFailed;
}

}  // namespace qf::cli
