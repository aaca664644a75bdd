// Copyright 2026 The qf Authors
// SPDX-License-Identifier: Apache-2.0

// Synthetic decoder stack: each layer is rms_norm -> w_up -> SiLU -> w_down
// with a residual connection. Used as the prefill/decode workload.

#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "qf/errors.hpp"
#include "qf/kernels.hpp"
#include "qf/matmul.hpp"

namespace qf {

struct ModelConfig {
  std::size_t hidden_dim = 512;
  std::size_t ffn_dim = 1024;
  std::size_t n_layers = 8;
  std::uint64_t seed = 1;
  float norm_eps = 1e-5f;
};

// Unquantized weights, row-major: up is ffn x hidden, down is hidden x ffn.
struct LayerWeightsF32 {
  std::vector<float> up;
  std::vector<float> down;
};

// Deterministic N(0, 1/fan_in) weights for every layer.
std::vector<LayerWeightsF32> synthetic_weights(const ModelConfig& cfg);

struct LayerWeights {
  QMatrix w_up;    // ffn_dim x hidden_dim
  QMatrix w_down;  // hidden_dim x ffn_dim
  float norm_eps = 1e-5f;
};

class ToyModel {
 public:
  // Throws std::invalid_argument unless every layer has the same
  // hidden -> ffn -> hidden shapes and there is at least one layer.
  explicit ToyModel(std::vector<LayerWeights> layers);

  static ToyModel synthetic(const ModelConfig& cfg, ScaleFormat format);
  static ToyModel quantize(std::span<const LayerWeightsF32> weights, std::size_t hidden_dim,
                           std::size_t ffn_dim, ScaleFormat format, float norm_eps = 1e-5f);

  std::size_t hidden_dim() const { return hidden_; }
  std::size_t ffn_dim() const { return ffn_; }
  std::size_t n_layers() const { return layers_.size(); }
  const std::vector<LayerWeights>& layers() const { return layers_; }
  ScaleFormat scale_format() const { return layers_.front().w_up.format(); }
  std::size_t payload_bytes() const;

 private:
  std::vector<LayerWeights> layers_;
  std::size_t hidden_ = 0;
  std::size_t ffn_ = 0;
};

inline float silu(float t) { return t / (1.0f + std::exp(-t)); }

// y = x + w_down * silu(w_up * rms_norm(x)); x and y must not alias.
void layer_forward(const LayerWeights& w, std::span<const float> x, std::span<float> y,
                   const KernelSet& ks = active_kernels(), WorkerPool* pool = nullptr);

struct PrefillResult {
  std::vector<float> y;  // m x hidden_dim
  std::size_t m = 0;
  double elapsed_s = 0.0;

  double rate() const { return static_cast<double>(m) / elapsed_s; }
};

// All layers over an m-row batch using matmul_q8 for the linear maps.
PrefillResult prefill(const ToyModel& model, std::span<const float> x, std::size_t m,
                      const KernelSet& ks = active_kernels(), WorkerPool* pool = nullptr);

struct DecodeResult {
  std::vector<float> y;  // output of the last step, before renormalization
  std::vector<double> step_s;
  double total_s = 0.0;

  double rate() const { return static_cast<double>(step_s.size()) / total_s; }
};

// x_{t+1} = stack(renorm(x_t)) for t >= 1, where renorm scales the state to
// unit RMS (a zero state is left as is). Step 1 consumes x0 unchanged, so one
// step equals prefill with m = 1. Throws NumericDivergence on a non-finite state.
DecodeResult decode_loop(const ToyModel& model, std::span<const float> x0, std::size_t steps,
                         const KernelSet& ks = active_kernels(), WorkerPool* pool = nullptr);

}  // namespace qf
