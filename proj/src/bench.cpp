// Copyright 2026 The qf Authors
// SPDX-License-Identifier: Apache-2.0

#include "qf/bench.hpp"

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>
#include <ostream>
#include <random>
#include <sstream>

#include "qf/errors.hpp"
#include "qf/halffloat.hpp"
#include "qf/matmul.hpp"
#include "qf/pipeline.hpp"

namespace qf {
namespace {

using Clock = std::chrono::steady_clock;

volatile float g_sink;

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string fmt_rate(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

double l2(std::span<const float> v) {
  double s = 0.0;
  for (float f : v) s += static_cast<double>(f) * f;
  return std::sqrt(s);
}

std::uint64_t status_kib(const char* key) {
  std::ifstream f("/proc/self/status");
  std::string line;
  const std::string prefix = std::string(key) + ":";
  while (std::getline(f, line)) {
    if (line.rfind(prefix, 0) == 0) {
      std::istringstream in(line.substr(prefix.size()));
      std::uint64_t kib = 0;
      in >> kib;
      return kib;
    }
  }
  return 0;
}

// Nanoseconds per call, averaged over about 2^20 elements of work.
template <class Fn>
double time_per_call(std::size_t elements_per_call, Fn&& fn) {
  const std::size_t calls = std::max<std::size_t>(1, (std::size_t{1} << 20) / std::max<std::size_t>(elements_per_call, 1));
  fn();
  const auto t0 = Clock::now();
  for (std::size_t i = 0; i < calls; ++i) fn();
  const double ns = std::chrono::duration<double, std::nano>(Clock::now() - t0).count();
  return ns / static_cast<double>(calls);
}

template <class Fn>
KernelTiming time_kernel(std::string name, const KernelBinding<Fn>& binding, std::size_t repeats,
                         std::size_t elements, auto&& call) {
  KernelTiming t;
  t.name = std::move(name);
  t.feature = std::string(binding.feature);
  for (std::size_t r = 0; r < repeats; ++r) {
    t.reference_ns.push_back(time_per_call(elements, [&] { call(binding.reference); }));
    t.active_ns.push_back(time_per_call(elements, [&] { call(binding.active); }));
  }
  t.reference = summarize(t.reference_ns);
  t.active = summarize(t.active_ns);
  return t;
}

std::vector<KernelTiming> time_kernels(const KernelSet& ks, const BenchConfig& cfg) {
  const std::size_t n = std::max(cfg.hidden_dim, cfg.ffn_dim);
  std::mt19937_64 rng(cfg.seed ^ 0x6b65726e656c73ull);
  std::normal_distribution<float> normal(0.0f, 1.0f);
  std::vector<float> x(n), y(n);
  for (float& v : x) v = normal(rng);
  std::vector<F16Bits> h(n);
  f32_to_f16_row(x, h);

  std::vector<BlockQ8F16S> a16(n / kBlockSize), b16(n / kBlockSize);
  std::vector<BlockQ8F32S> a32(n / kBlockSize), b32(n / kBlockSize);
  quantize_row<BlockQ8F16S>(x, a16);
  quantize_row<BlockQ8F32S>(x, a32);
  std::reverse(x.begin(), x.end());
  quantize_row<BlockQ8F16S>(x, b16);
  quantize_row<BlockQ8F32S>(x, b32);

  const std::size_t reps = cfg.repeat_count;
  std::vector<KernelTiming> out;
  out.push_back(time_kernel("f16_to_f32_row", ks.f16_to_f32_row, reps, n, [&](F16ToF32RowFn fn) {
    fn(h, y);
    g_sink = y[0];
  }));
  out.push_back(time_kernel("f32_to_f16_row", ks.f32_to_f16_row, reps, n, [&](F32ToF16RowFn fn) {
    fn(x, h);
    g_sink = h[0].bits;
  }));
  out.push_back(time_kernel("norm_f32", ks.norm_f32, reps, n, [&](NormFn fn) {
    fn(x, y, 1e-5f);
    g_sink = y[0];
  }));
  out.push_back(time_kernel("rms_norm_f32", ks.rms_norm_f32, reps, n, [&](NormFn fn) {
    fn(x, y, 1e-5f);
    g_sink = y[0];
  }));
  out.push_back(time_kernel("vec_dot_q8_f16s", ks.vec_dot_q8_f16s, reps, n,
                            [&](VecDotFn<BlockQ8F16S> fn) { g_sink = fn(a16, b16); }));
  out.push_back(time_kernel("vec_dot_q8_f32s", ks.vec_dot_q8_f32s, reps, n,
                            [&](VecDotFn<BlockQ8F32S> fn) { g_sink = fn(a32, b32); }));
  return out;
}

}  // namespace

void validate(const BenchConfig& cfg) {
  auto need = [](bool ok, const std::string& what) {
    if (!ok) throw PreconditionError("bench config: " + what);
  };
  need(cfg.hidden_dim >= 1 && cfg.hidden_dim % kBlockSize == 0, "--hidden must be a positive multiple of 32");
  need(cfg.ffn_dim >= 1 && cfg.ffn_dim % kBlockSize == 0, "--ffn must be a positive multiple of 32");
  need(cfg.n_layers >= 1, "--layers must be >= 1");
  need(cfg.prefill_tokens >= 1, "--prefill-tokens must be >= 1");
  need(cfg.decode_steps >= 1, "--decode-steps must be >= 1");
  need(cfg.warmup_iters >= 1, "--warmup must be >= 1");
  need(cfg.repeat_count >= 1, "--repeat must be >= 1");
  need(cfg.threads >= 1, "--threads must be >= 1");
}

Summary summarize(std::span<const double> samples) {
  if (samples.empty()) throw std::invalid_argument("summarize: no samples");
  std::vector<double> s(samples.begin(), samples.end());
  std::sort(s.begin(), s.end());
  const std::size_t n = s.size();
  const double median = n % 2 ? s[n / 2] : 0.5 * (s[n / 2 - 1] + s[n / 2]);
  return {median, s.front(), s.back()};
}

std::uint64_t resident_bytes() { return status_kib("VmRSS") * 1024; }
std::uint64_t peak_resident_bytes() { return status_kib("VmHWM") * 1024; }

std::string fnv1a_hex(std::span<const float> values) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (float v : values) {
    const auto bits = std::bit_cast<std::uint32_t>(v);
    for (int i = 0; i < 4; ++i) {
      h ^= (bits >> (8 * i)) & 0xFF;
      h *= 0x100000001b3ull;
    }
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

BenchReport run_bench(const BenchConfig& cfg) {
  validate(cfg);
  BenchReport r;
  r.config = cfg;
  const KernelSet ks = detect_features(cfg.force_scalar ? Dispatch::kForceScalar : Dispatch::kAuto);
  r.dispatch = ks.dispatch_name();
  r.kernels = ks.summary();
  r.threads = WorkerPool::threads_from_env(cfg.threads);
  std::unique_ptr<WorkerPool> pool;
  if (r.threads > 1) pool = std::make_unique<WorkerPool>(r.threads);

  const ModelConfig mc{cfg.hidden_dim, cfg.ffn_dim, cfg.n_layers, cfg.seed, 1e-5f};
  const ToyModel model = ToyModel::synthetic(mc, cfg.scale_format);
  r.resident_bytes = resident_bytes();

  r.weight_elements = 2ull * cfg.n_layers * cfg.hidden_dim * cfg.ffn_dim;
  r.container_f32 = container_bytes(r.weight_elements, TensorFormat::kF32);
  r.container_f16 = container_bytes(r.weight_elements, TensorFormat::kF16);
  r.container_q8_f16s = container_bytes(r.weight_elements, TensorFormat::kQ8F16S);
  r.container_q8_f32s = container_bytes(r.weight_elements, TensorFormat::kQ8F32S);
  r.model_payload_bytes = model.payload_bytes();

  std::mt19937_64 rng(cfg.seed + 1);
  std::normal_distribution<float> normal(0.0f, 1.0f);
  std::vector<float> x(cfg.prefill_tokens * cfg.hidden_dim);
  for (float& v : x) v = normal(rng);
  const std::span<const float> x0 = std::span<const float>(x).first(cfg.hidden_dim);

  for (std::size_t w = 0; w < cfg.warmup_iters; ++w) {
    prefill(model, x, cfg.prefill_tokens, ks, pool.get());
    decode_loop(model, x0, cfg.decode_steps, ks, pool.get());
  }
  for (std::size_t rep = 0; rep < cfg.repeat_count; ++rep) {
    const PrefillResult p = prefill(model, x, cfg.prefill_tokens, ks, pool.get());
    const DecodeResult d = decode_loop(model, x0, cfg.decode_steps, ks, pool.get());
    r.prefill_rates.push_back(p.rate());
    r.decode_rates.push_back(d.rate());
    if (rep + 1 == cfg.repeat_count) {
      r.prefill_checksum = fnv1a_hex(p.y);
      r.decode_checksum = fnv1a_hex(d.y);
      r.prefill_l2 = l2(p.y);
      r.decode_l2 = l2(d.y);
    }
  }
  r.prefill = summarize(r.prefill_rates);
  r.decode = summarize(r.decode_rates);
  if (cfg.kernel_timings) r.kernel_timings = time_kernels(ks, cfg);
  r.peak_resident_bytes = peak_resident_bytes();
  return r;
}

bool is_computed_metric(std::string_view metric) {
  return metric.starts_with("container.") || metric.starts_with("model.") || metric.starts_with("output.");
}

std::vector<CsvRow> csv_rows(const BenchReport& r) {
  std::vector<CsvRow> rows;
  auto timed = [&](const std::string& metric, std::span<const double> samples, double median,
                   const std::string& unit, auto fmt) {
    for (std::size_t i = 0; i < samples.size(); ++i) {
      rows.push_back({std::to_string(i + 1), metric, fmt(samples[i]), unit});
    }
    rows.push_back({"median", metric, fmt(median), unit});
  };
  auto fixed = [&](const std::string& metric, const std::string& value, const std::string& unit) {
    rows.push_back({"static", metric, value, unit});
  };

  timed("prefill_rate", r.prefill_rates, r.prefill.median, "tokens/s", fmt_rate);
  timed("decode_rate", r.decode_rates, r.decode.median, "tokens/s", fmt_rate);
  for (const KernelTiming& k : r.kernel_timings) {
    timed("kernel." + k.name + ".reference", k.reference_ns, k.reference.median, "ns/op", fmt_rate);
    timed("kernel." + k.name + ".active", k.active_ns, k.active.median, "ns/op", fmt_rate);
    fixed("kernel." + k.name + ".speedup", fmt_rate(k.speedup()), "x");
  }
  const auto mib = [](std::uint64_t b) { return fmt_rate(static_cast<double>(b) / (1024.0 * 1024.0)); };
  fixed("memory.resident", mib(r.resident_bytes), "MiB");
  fixed("memory.peak_resident", mib(r.peak_resident_bytes), "MiB");
  fixed("container.f32", std::to_string(r.container_f32), "bytes");
  fixed("container.f16", std::to_string(r.container_f16), "bytes");
  fixed("container.q8_f16s", std::to_string(r.container_q8_f16s), "bytes");
  fixed("container.q8_f32s", std::to_string(r.container_q8_f32s), "bytes");
  fixed("model.payload", std::to_string(r.model_payload_bytes), "bytes");
  fixed("output.prefill_checksum", r.prefill_checksum, "fnv1a64");
  fixed("output.decode_checksum", r.decode_checksum, "fnv1a64");
  fixed("output.prefill_l2", fmt_double(r.prefill_l2), "l2");
  fixed("output.decode_l2", fmt_double(r.decode_l2), "l2");
  return rows;
}

void write_csv(const BenchReport& r, std::ostream& out) {
  out << kCsvHeader << '\n';
  const std::string tail = "," + std::string(to_string(r.config.scale_format)) + "," + r.dispatch + "," +
                           std::to_string(r.threads) + "," + std::to_string(r.config.seed) + "\n";
  for (const CsvRow& row : csv_rows(r)) {
    out << row.run_id << ',' << row.metric << ',' << row.value << ',' << row.unit << tail;
  }
}

void write_text(const BenchReport& r, std::ostream& out) {
  const BenchConfig& c = r.config;
  char line[256];
  out << "config: hidden=" << c.hidden_dim << " ffn=" << c.ffn_dim << " layers=" << c.n_layers
      << " prefill=" << c.prefill_tokens << " decode=" << c.decode_steps << " warmup=" << c.warmup_iters
      << " repeat=" << c.repeat_count << " scale=" << to_string(c.scale_format) << " threads=" << r.threads
      << " seed=" << c.seed << (c.force_scalar ? " force-scalar" : "") << '\n';
  out << "dispatch: " << r.dispatch << '\n';
  for (const KernelSet::Entry& e : r.kernels) {
    out << "  " << e.name << ": " << e.feature << (e.vectorized ? "" : " (reference)") << '\n';
  }
  std::snprintf(line, sizeof line, "prefill: %.2f tokens/s (min %.2f, max %.2f)\n", r.prefill.median,
                r.prefill.min, r.prefill.max);
  out << line;
  std::snprintf(line, sizeof line, "decode:  %.2f tokens/s (min %.2f, max %.2f)\n", r.decode.median,
                r.decode.min, r.decode.max);
  out << line;
  if (!r.kernel_timings.empty()) {
    std::snprintf(line, sizeof line, "%-18s %12s %12s %8s  %s\n", "kernel", "ref ns/op", "active ns/op",
                  "speedup", "impl");
    out << line;
    for (const KernelTiming& k : r.kernel_timings) {
      std::snprintf(line, sizeof line, "%-18s %12.1f %12.1f %7.2fx  %s\n", k.name.c_str(), k.reference.median,
                    k.active.median, k.speedup(), k.feature.c_str());
      out << line;
    }
  }
  std::snprintf(line, sizeof line, "memory: %.1f MiB resident after load, %.1f MiB peak\n",
                static_cast<double>(r.resident_bytes) / (1 << 20), static_cast<double>(r.peak_resident_bytes) / (1 << 20));
  out << line;
  std::snprintf(line, sizeof line,
                "weights: %llu elements; f32 %llu B, f16 %llu B, q8_f16s %llu B, q8_f32s %llu B (f32s/f16s %.4f)\n",
                static_cast<unsigned long long>(r.weight_elements), static_cast<unsigned long long>(r.container_f32),
                static_cast<unsigned long long>(r.container_f16), static_cast<unsigned long long>(r.container_q8_f16s),
                static_cast<unsigned long long>(r.container_q8_f32s),
                static_cast<double>(r.container_q8_f32s) / static_cast<double>(r.container_q8_f16s));
  out << line;
  out << "checksums: prefill " << r.prefill_checksum << ", decode " << r.decode_checksum << '\n';
}

}  // namespace qf
