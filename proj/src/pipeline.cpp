// Copyright 2026 The qf Authors
// SPDX-License-Identifier: Apache-2.0

#include "qf/pipeline.hpp"

#include <bit>
#include <chrono>
#include <random>
#include <stdexcept>
#include <string>

namespace qf {
namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

// Scratch rows for an m-row batch, reused across layers and decode steps.
struct Workspace {
  std::vector<float> h, u, d;

  void resize(std::size_t m, std::size_t hidden, std::size_t ffn) {
    h.resize(m * hidden);
    u.resize(m * ffn);
    d.resize(m * hidden);
  }
};

void check_dims(const char* op, std::size_t got, std::size_t rows, std::size_t dim) {
  if (got != rows * dim) {
    throw std::invalid_argument(std::string(op) + ": expected " + std::to_string(rows) + "x" +
                                std::to_string(dim) + " values, got " + std::to_string(got));
  }
}

// One layer over m rows: y = x + W_down silu(W_up rms_norm(x)).
void layer_batch(const LayerWeights& w, std::span<const float> x, std::span<float> y, std::size_t m,
                 Workspace& ws, const KernelSet& ks, WorkerPool* pool) {
  const std::size_t hidden = w.w_up.cols();
  const std::size_t ffn = w.w_up.rows();
  ws.resize(m, hidden, ffn);
  for (std::size_t i = 0; i < m; ++i) {
    rms_norm_f32(x.subspan(i * hidden, hidden), std::span(ws.h).subspan(i * hidden, hidden),
                 NormConfig{w.norm_eps}, ks);
  }
  matmul_q8(w.w_up, ws.h, m, ws.u, ks, pool);
  for (float& t : ws.u) t = silu(t);
  matmul_q8(w.w_down, ws.u, m, ws.d, ks, pool);
  for (std::size_t i = 0; i < m * hidden; ++i) y[i] = x[i] + ws.d[i];
}

// Applies every layer in place to an m-row batch held in `state`.
void stack_forward(const ToyModel& model, std::vector<float>& state, std::vector<float>& next,
                   std::size_t m, Workspace& ws, const KernelSet& ks, WorkerPool* pool) {
  next.resize(state.size());
  for (const LayerWeights& layer : model.layers()) {
    layer_batch(layer, state, next, m, ws, ks, pool);
    state.swap(next);
  }
}

bool all_finite(std::span<const float> v) {
  for (float f : v) {
    if ((std::bit_cast<std::uint32_t>(f) & 0x7F800000u) == 0x7F800000u) return false;
  }
  return true;
}

void renormalize(std::span<float> v) {
  double ss = 0.0;
  for (float f : v) ss += static_cast<double>(f) * f;
  if (ss == 0.0) return;
  const float inv = static_cast<float>(1.0 / std::sqrt(ss / static_cast<double>(v.size())));
  for (float& f : v) f *= inv;
}

}  // namespace

std::vector<LayerWeightsF32> synthetic_weights(const ModelConfig& cfg) {
  if (cfg.hidden_dim == 0 || cfg.ffn_dim == 0 || cfg.n_layers == 0) {
    throw std::invalid_argument("synthetic_weights: dims and layer count must be positive");
  }
  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<float> normal(0.0f, 1.0f);
  const float up_scale = 1.0f / std::sqrt(static_cast<float>(cfg.hidden_dim));
  const float down_scale = 1.0f / std::sqrt(static_cast<float>(cfg.ffn_dim));
  std::vector<LayerWeightsF32> out(cfg.n_layers);
  for (LayerWeightsF32& layer : out) {
    layer.up.resize(cfg.ffn_dim * cfg.hidden_dim);
    layer.down.resize(cfg.hidden_dim * cfg.ffn_dim);
    for (float& w : layer.up) w = normal(rng) * up_scale;
    for (float& w : layer.down) w = normal(rng) * down_scale;
  }
  return out;
}

ToyModel::ToyModel(std::vector<LayerWeights> layers) : layers_(std::move(layers)) {
  if (layers_.empty()) throw std::invalid_argument("ToyModel: needs at least one layer");
  hidden_ = layers_.front().w_up.cols();
  ffn_ = layers_.front().w_up.rows();
  const ScaleFormat fmt = layers_.front().w_up.format();
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const LayerWeights& w = layers_[l];
    if (w.w_up.rows() != ffn_ || w.w_up.cols() != hidden_ || w.w_down.rows() != hidden_ ||
        w.w_down.cols() != ffn_) {
      throw std::invalid_argument("ToyModel: layer " + std::to_string(l) + " shapes do not compose " +
                                  std::to_string(hidden_) + " -> " + std::to_string(ffn_) + " -> " +
                                  std::to_string(hidden_));
    }
    if (w.w_up.format() != fmt || w.w_down.format() != fmt) {
      throw std::invalid_argument("ToyModel: layer " + std::to_string(l) + " mixes scale formats");
    }
    if (!(w.norm_eps > 0.0f)) throw std::invalid_argument("ToyModel: norm_eps must be positive");
  }
}

ToyModel ToyModel::quantize(std::span<const LayerWeightsF32> weights, std::size_t hidden_dim,
                            std::size_t ffn_dim, ScaleFormat format, float norm_eps) {
  std::vector<LayerWeights> layers;
  layers.reserve(weights.size());
  for (const LayerWeightsF32& w : weights) {
    layers.push_back({QMatrix::quantize(w.up, ffn_dim, hidden_dim, format),
                      QMatrix::quantize(w.down, hidden_dim, ffn_dim, format), norm_eps});
  }
  return ToyModel(std::move(layers));
}

ToyModel ToyModel::synthetic(const ModelConfig& cfg, ScaleFormat format) {
  return quantize(synthetic_weights(cfg), cfg.hidden_dim, cfg.ffn_dim, format, cfg.norm_eps);
}

std::size_t ToyModel::payload_bytes() const {
  std::size_t total = 0;
  for (const LayerWeights& w : layers_) total += w.w_up.payload_bytes() + w.w_down.payload_bytes();
  return total;
}

void layer_forward(const LayerWeights& w, std::span<const float> x, std::span<float> y,
                   const KernelSet& ks, WorkerPool* pool) {
  check_dims("layer_forward", x.size(), 1, w.w_up.cols());
  check_dims("layer_forward", y.size(), 1, w.w_up.cols());
  if (w.w_down.rows() != w.w_up.cols() || w.w_down.cols() != w.w_up.rows()) {
    throw std::invalid_argument("layer_forward: w_up and w_down shapes do not compose");
  }
  Workspace ws;
  layer_batch(w, x, y, 1, ws, ks, pool);
}

PrefillResult prefill(const ToyModel& model, std::span<const float> x, std::size_t m,
                      const KernelSet& ks, WorkerPool* pool) {
  if (m == 0) throw std::invalid_argument("prefill: batch must hold at least one row");
  check_dims("prefill", x.size(), m, model.hidden_dim());
  PrefillResult r;
  r.m = m;
  std::vector<float> state(x.begin(), x.end()), next;
  Workspace ws;
  const auto t0 = Clock::now();
  stack_forward(model, state, next, m, ws, ks, pool);
  r.elapsed_s = seconds_since(t0);
  r.y = std::move(state);
  return r;
}

DecodeResult decode_loop(const ToyModel& model, std::span<const float> x0, std::size_t steps,
                         const KernelSet& ks, WorkerPool* pool) {
  if (steps == 0) throw std::invalid_argument("decode_loop: steps must be at least 1");
  check_dims("decode_loop", x0.size(), 1, model.hidden_dim());
  DecodeResult r;
  r.step_s.reserve(steps);
  std::vector<float> state(x0.begin(), x0.end()), next;
  Workspace ws;
  const auto start = Clock::now();
  for (std::size_t t = 0; t < steps; ++t) {
    if (!all_finite(state)) {
      throw NumericDivergence("decode_loop: non-finite state entering step " + std::to_string(t + 1));
    }
    const auto t0 = Clock::now();
    if (t > 0) renormalize(state);
    try {
      stack_forward(model, state, next, 1, ws, ks, pool);
    } catch (const std::domain_error& e) {
      throw NumericDivergence("decode_loop: step " + std::to_string(t + 1) + ": " + e.what());
    }
    r.step_s.push_back(seconds_since(t0));
  }
  if (!all_finite(state)) {
    throw NumericDivergence("decode_loop: non-finite state after step " + std::to_string(steps));
  }
  r.total_s = seconds_since(start);
  r.y = std::move(state);
  return r;
}

}  // namespace qf
