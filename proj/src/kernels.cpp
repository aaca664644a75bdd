// Copyright 2026 The qf Authors
// SPDX-License-Identifier: Apache-2.0

#include "qf/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <stdexcept>
#include <string>

#include "kernels_internal.hpp"

namespace qf {
namespace {

template <class Fn>
KernelBinding<Fn> scalar_binding(Fn fn) {
  return KernelBinding<Fn>{fn, fn, "scalar"};
}

template <class Fn>
void bind_active(KernelBinding<Fn>& b, Fn fn, std::string_view feature) {
  b.active = fn;
  b.feature = feature;
}

KernelSet reference_set() {
  KernelSet ks;
  ks.f16_to_f32_row = scalar_binding<F16ToF32RowFn>(&scalar::f16_to_f32_row);
  ks.f32_to_f16_row = scalar_binding<F32ToF16RowFn>(&scalar::f32_to_f16_row);
  ks.norm_f32 = scalar_binding<NormFn>(&scalar::norm_f32);
  ks.rms_norm_f32 = scalar_binding<NormFn>(&scalar::rms_norm_f32);
  ks.vec_dot_q8_f16s = scalar_binding<VecDotFn<BlockQ8F16S>>(&scalar::vec_dot_q8<BlockQ8F16S>);
  ks.vec_dot_q8_f32s = scalar_binding<VecDotFn<BlockQ8F32S>>(&scalar::vec_dot_q8<BlockQ8F32S>);
  ks.block_sums_f16s = scalar_binding<BlockSumsFn<BlockQ8F16S>>(&scalar::block_sums_q8<BlockQ8F16S>);
  ks.block_sums_f32s = scalar_binding<BlockSumsFn<BlockQ8F32S>>(&scalar::block_sums_q8<BlockQ8F32S>);
  return ks;
}

bool env_flag(const char* name) {
  const char* v = std::getenv(name);
  return v != nullptr && *v != '\0' && std::strcmp(v, "0") != 0;
}

#ifdef QF_INSTRUMENT
// Fault injection for the verify tooling: QF_INJECT_FAULT=<kernel name>
// replaces that kernel's active binding with a reference call whose output is
// perturbed.
namespace fault {
void f16_to_f32_row(std::span<const F16Bits> src, std::span<float> dst) {
  scalar::f16_to_f32_row(src, dst);
  if (!src.empty()) dst[src.size() / 2] = std::nextafter(dst[src.size() / 2], 1e30f);
}
void f32_to_f16_row(std::span<const float> src, std::span<F16Bits> dst) {
  scalar::f32_to_f16_row(src, dst);
  if (!src.empty()) dst[src.size() / 2].bits ^= 1u;
}
void norm_f32(std::span<const float> x, std::span<float> y, float eps) {
  scalar::norm_f32(x, y, eps);
  y[x.size() / 2] += 0.5f;
}
void rms_norm_f32(std::span<const float> x, std::span<float> y, float eps) {
  scalar::rms_norm_f32(x, y, eps);
  y[x.size() / 2] += 0.5f;
}
template <QuantBlock Block>
float vec_dot_q8(std::span<const Block> a, std::span<const Block> b) {
  return scalar::vec_dot_q8<Block>(a, b) + 1.0f;
}
template <QuantBlock Block>
void block_sums_q8(std::span<const Block> a, std::span<const Block> b, std::span<std::int32_t> sums) {
  scalar::block_sums_q8<Block>(a, b, sums);
  if (!sums.empty()) sums[0] += 1;
}
}  // namespace fault

void inject_fault(KernelSet& ks, std::string_view name) {
  if (name == "f16_to_f32_row") bind_active<F16ToF32RowFn>(ks.f16_to_f32_row, &fault::f16_to_f32_row, "fault");
  if (name == "f32_to_f16_row") bind_active<F32ToF16RowFn>(ks.f32_to_f16_row, &fault::f32_to_f16_row, "fault");
  if (name == "norm_f32") bind_active<NormFn>(ks.norm_f32, &fault::norm_f32, "fault");
  if (name == "rms_norm_f32") bind_active<NormFn>(ks.rms_norm_f32, &fault::rms_norm_f32, "fault");
  if (name == "vec_dot_q8_f16s") {
    bind_active<VecDotFn<BlockQ8F16S>>(ks.vec_dot_q8_f16s, &fault::vec_dot_q8<BlockQ8F16S>, "fault");
  }
  if (name == "vec_dot_q8_f32s") {
    bind_active<VecDotFn<BlockQ8F32S>>(ks.vec_dot_q8_f32s, &fault::vec_dot_q8<BlockQ8F32S>, "fault");
  }
  if (name == "block_sums_q8_f16s") {
    bind_active<BlockSumsFn<BlockQ8F16S>>(ks.block_sums_f16s, &fault::block_sums_q8<BlockQ8F16S>, "fault");
  }
  if (name == "block_sums_q8_f32s") {
    bind_active<BlockSumsFn<BlockQ8F32S>>(ks.block_sums_f32s, &fault::block_sums_q8<BlockQ8F32S>, "fault");
  }
}
#endif

}  // namespace

std::vector<KernelSet::Entry> KernelSet::summary() const {
  return {
      {"f16_to_f32_row", f16_to_f32_row.feature, f16_to_f32_row.vectorized()},
      {"f32_to_f16_row", f32_to_f16_row.feature, f32_to_f16_row.vectorized()},
      {"norm_f32", norm_f32.feature, norm_f32.vectorized()},
      {"rms_norm_f32", rms_norm_f32.feature, rms_norm_f32.vectorized()},
      {"vec_dot_q8_f16s", vec_dot_q8_f16s.feature, vec_dot_q8_f16s.vectorized()},
      {"vec_dot_q8_f32s", vec_dot_q8_f32s.feature, vec_dot_q8_f32s.vectorized()},
      {"block_sums_q8_f16s", block_sums_f16s.feature, block_sums_f16s.vectorized()},
      {"block_sums_q8_f32s", block_sums_f32s.feature, block_sums_f32s.vectorized()},
  };
}

std::string KernelSet::dispatch_name() const {
  std::vector<std::string_view> tags;
  for (const Entry& e : summary()) {
    if (e.vectorized && std::find(tags.begin(), tags.end(), e.feature) == tags.end()) {
      tags.push_back(e.feature);
    }
  }
  if (tags.empty()) return "scalar";
  std::string out;
  for (std::string_view t : tags) {
    if (!out.empty()) out += '+';
    out += t;
  }
  return out;
}

KernelSet detect_features(Dispatch mode) {
  KernelSet ks = reference_set();
  if (mode == Dispatch::kForceScalar || env_flag("QF_FORCE_SCALAR")) return ks;

#if defined(QF_HAVE_AVX2_KERNELS)
  if (avx2::supported()) {
    bind_active<F16ToF32RowFn>(ks.f16_to_f32_row, &avx2::f16_to_f32_row, "f16c");
    bind_active<F32ToF16RowFn>(ks.f32_to_f16_row, &avx2::f32_to_f16_row, "f16c");
    bind_active<NormFn>(ks.norm_f32, &avx2::norm_f32, "avx2");
    bind_active<NormFn>(ks.rms_norm_f32, &avx2::rms_norm_f32, "avx2");
    bind_active<VecDotFn<BlockQ8F16S>>(ks.vec_dot_q8_f16s, &avx2::vec_dot_q8<BlockQ8F16S>, "avx2");
    bind_active<VecDotFn<BlockQ8F32S>>(ks.vec_dot_q8_f32s, &avx2::vec_dot_q8<BlockQ8F32S>, "avx2");
    bind_active<BlockSumsFn<BlockQ8F16S>>(ks.block_sums_f16s, &avx2::block_sums_q8<BlockQ8F16S>, "avx2");
    bind_active<BlockSumsFn<BlockQ8F32S>>(ks.block_sums_f32s, &avx2::block_sums_q8<BlockQ8F32S>, "avx2");
  }
#elif defined(QF_HAVE_NEON_KERNELS)
  bind_active<F16ToF32RowFn>(ks.f16_to_f32_row, &neon::f16_to_f32_row, "neon");
  bind_active<F32ToF16RowFn>(ks.f32_to_f16_row, &neon::f32_to_f16_row, "neon");
  bind_active<NormFn>(ks.norm_f32, &neon::norm_f32, "neon");
  bind_active<NormFn>(ks.rms_norm_f32, &neon::rms_norm_f32, "neon");
  bind_active<VecDotFn<BlockQ8F16S>>(ks.vec_dot_q8_f16s, &neon::vec_dot_q8<BlockQ8F16S>, neon::dot_feature());
  bind_active<VecDotFn<BlockQ8F32S>>(ks.vec_dot_q8_f32s, &neon::vec_dot_q8<BlockQ8F32S>, neon::dot_feature());
  bind_active<BlockSumsFn<BlockQ8F16S>>(ks.block_sums_f16s, &neon::block_sums_q8<BlockQ8F16S>, neon::dot_feature());
  bind_active<BlockSumsFn<BlockQ8F32S>>(ks.block_sums_f32s, &neon::block_sums_q8<BlockQ8F32S>, neon::dot_feature());
#endif

#ifdef QF_INSTRUMENT
  if (const char* name = std::getenv("QF_INJECT_FAULT")) inject_fault(ks, name);
#endif
  return ks;
}

const KernelSet& active_kernels() {
  static const KernelSet ks = detect_features();
  return ks;
}

namespace {

void check_norm_args(const char* op, std::span<const float> x, std::span<float> y, NormConfig cfg) {
  if (x.empty()) throw std::invalid_argument(std::string(op) + ": empty row");
  if (y.size() != x.size()) throw std::invalid_argument(std::string(op) + ": output length mismatch");
  if (!(cfg.eps > 0.0f)) throw std::invalid_argument(std::string(op) + ": eps must be positive");
}

}  // namespace

void norm_f32(std::span<const float> x, std::span<float> y, NormConfig cfg, const KernelSet& ks) {
  check_norm_args("norm_f32", x, y, cfg);
  ks.norm_f32.active(x, y, cfg.eps);
}

void rms_norm_f32(std::span<const float> x, std::span<float> y, NormConfig cfg,
                  const KernelSet& ks) {
  check_norm_args("rms_norm_f32", x, y, cfg);
  ks.rms_norm_f32.active(x, y, cfg.eps);
}

template <QuantBlock Block>
float vec_dot_q8(std::span<const Block> a, std::span<const Block> b, const KernelSet& ks) {
  if (a.size() != b.size()) {
    throw std::invalid_argument("vec_dot_q8: block count mismatch (" + std::to_string(a.size()) +
                                " vs " + std::to_string(b.size()) + ")");
  }
  return kernel_binding<Block>(ks).active(a, b);
}

template <QuantBlock Block>
void block_sums_q8(std::span<const Block> a, std::span<const Block> b,
                   std::span<std::int32_t> sums, const KernelSet& ks) {
  if (a.size() != b.size() || sums.size() != a.size()) {
    throw std::invalid_argument("block_sums_q8: block count mismatch");
  }
  if constexpr (std::same_as<Block, BlockQ8F16S>) {
    ks.block_sums_f16s.active(a, b, sums);
  } else {
    ks.block_sums_f32s.active(a, b, sums);
  }
}

template float vec_dot_q8(std::span<const BlockQ8F16S>, std::span<const BlockQ8F16S>,
                          const KernelSet&);
template float vec_dot_q8(std::span<const BlockQ8F32S>, std::span<const BlockQ8F32S>,
                          const KernelSet&);
template void block_sums_q8(std::span<const BlockQ8F16S>, std::span<const BlockQ8F16S>,
                            std::span<std::int32_t>, const KernelSet&);
template void block_sums_q8(std::span<const BlockQ8F32S>, std::span<const BlockQ8F32S>,
                            std::span<std::int32_t>, const KernelSet&);

}  // namespace qf
