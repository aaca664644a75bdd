// Copyright 2026 The qf Authors
// SPDX-License-Identifier: Apache-2.0

// Debug counters compiled in only when QF_INSTRUMENT is defined (the
// qf_core_instrumented library). In regular builds every hook is a no-op and
// the counters read zero.

#pragma once

#include <atomic>
#include <cstdint>

namespace qf::instrument {

#ifdef QF_INSTRUMENT
inline constexpr bool kEnabled = true;
#else
inline constexpr bool kEnabled = false;
#endif

namespace detail {
inline std::atomic<std::uint64_t> g_f16_scale_decodes{0};
}  // namespace detail

// Number of binary16 block-scale decodes performed by the Q8 dot kernels.
inline std::uint64_t f16_scale_decodes() {
  return detail::g_f16_scale_decodes.load(std::memory_order_relaxed);
}

inline void reset() { detail::g_f16_scale_decodes.store(0, std::memory_order_relaxed); }

inline void count_f16_scale_decode() {
  if constexpr (kEnabled) detail::g_f16_scale_decodes.fetch_add(1, std::memory_order_relaxed);
}

}  // namespace qf::instrument
