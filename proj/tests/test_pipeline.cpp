// Copyright 2026 The qf Authors
// SPDX-License-Identifier: Apache-2.0

#include "qf/pipeline.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "oracles.hpp"

namespace qf {
namespace {

ToyModel zero_model(std::size_t hidden, std::size_t ffn, std::size_t layers, ScaleFormat fmt) {
  std::vector<LayerWeightsF32> w(layers);
  for (auto& l : w) {
    l.up.assign(hidden * ffn, 0.0f);
    l.down.assign(hidden * ffn, 0.0f);
  }
  return ToyModel::quantize(w, hidden, ffn, fmt);
}

struct OracleRow {
  std::vector<double> y;
  std::vector<double> magnitude;  // |x_i| + sum_j |w_down_ij * a_j|
};

// Layer forward in double straight from the unquantized weights.
OracleRow oracle_layer(const LayerWeightsF32& w, std::span<const float> x, std::size_t hidden,
                       std::size_t ffn, double eps) {
  const auto h = oracle::rms_norm(x, eps);
  std::vector<double> a(ffn);
  for (std::size_t j = 0; j < ffn; ++j) {
    double u = 0.0;
    for (std::size_t k = 0; k < hidden; ++k) u += static_cast<double>(w.up[j * hidden + k]) * h[k];
    a[j] = oracle::silu(u);
  }
  OracleRow out{std::vector<double>(hidden), std::vector<double>(hidden)};
  for (std::size_t i = 0; i < hidden; ++i) {
    double d = 0.0, mag = std::fabs(static_cast<double>(x[i]));
    for (std::size_t j = 0; j < ffn; ++j) {
      const double t = static_cast<double>(w.down[i * ffn + j]) * a[j];
      d += t;
      mag += std::fabs(t);
    }
    out.y[i] = x[i] + d;
    out.magnitude[i] = mag;
  }
  return out;
}

TEST(LayerForward, ZeroWeightsAreResidualIdentity) {
  const ToyModel m = zero_model(64, 128, 1, ScaleFormat::kF16);
  std::mt19937_64 rng(1);
  const auto x = oracle::random_row(rng, 64, -3.0f, 3.0f);
  std::vector<float> y(64);
  layer_forward(m.layers()[0], x, y);
  EXPECT_EQ(y, x);

  const std::vector<float> zero(64, 0.0f);
  layer_forward(m.layers()[0], zero, y);
  EXPECT_EQ(y, zero);
}

TEST(LayerForward, DimensionMismatchRejected) {
  const ToyModel m = zero_model(64, 128, 1, ScaleFormat::kF32);
  std::vector<float> x(63), y(64);
  EXPECT_THROW(layer_forward(m.layers()[0], x, y), std::invalid_argument);
  std::vector<float> x_ok(64), y_bad(65);
  EXPECT_THROW(layer_forward(m.layers()[0], x_ok, y_bad), std::invalid_argument);
}

TEST(LayerForward, MatchesComposedDoubleOracle) {
  const ModelConfig cfg{.hidden_dim = 128, .ffn_dim = 256, .n_layers = 1, .seed = 7};
  const auto weights = synthetic_weights(cfg);
  std::mt19937_64 rng(2);
  for (ScaleFormat fmt : {ScaleFormat::kF16, ScaleFormat::kF32}) {
    const ToyModel m = ToyModel::quantize(weights, cfg.hidden_dim, cfg.ffn_dim, fmt);
    for (int iter = 0; iter < 20; ++iter) {
      const auto x = oracle::random_row(rng, cfg.hidden_dim, -2.0f, 2.0f);
      std::vector<float> y(cfg.hidden_dim);
      layer_forward(m.layers()[0], x, y);
      const auto want = oracle_layer(weights[0], x, cfg.hidden_dim, cfg.ffn_dim, 1e-5);
      for (std::size_t i = 0; i < y.size(); ++i) {
        const double bound = 1e-2 * std::max(std::fabs(want.y[i]), want.magnitude[i]);
        ASSERT_LE(std::fabs(y[i] - want.y[i]), bound) << "i=" << i;
      }
    }
  }
}

TEST(ToyModel, ShapeChecks) {
  auto bad = zero_model(64, 128, 2, ScaleFormat::kF16).layers();
  bad[1].w_down = QMatrix::quantize(std::vector<float>(32 * 128), 32, 128, ScaleFormat::kF16);
  EXPECT_THROW(ToyModel{bad}, std::invalid_argument);
  EXPECT_THROW(ToyModel(std::vector<LayerWeights>{}), std::invalid_argument);
  EXPECT_THROW(ToyModel::synthetic({.hidden_dim = 48, .ffn_dim = 64, .n_layers = 1}, ScaleFormat::kF32),
               std::invalid_argument);
}

TEST(ToyModel, SyntheticIsDeterministic) {
  const ModelConfig cfg{.hidden_dim = 64, .ffn_dim = 96, .n_layers = 2, .seed = 5};
  const ToyModel a = ToyModel::synthetic(cfg, ScaleFormat::kF32);
  const ToyModel b = ToyModel::synthetic(cfg, ScaleFormat::kF32);
  for (std::size_t l = 0; l < 2; ++l) {
    EXPECT_EQ(a.layers()[l].w_up.dequantize(), b.layers()[l].w_up.dequantize());
    EXPECT_EQ(a.layers()[l].w_down.dequantize(), b.layers()[l].w_down.dequantize());
  }
  EXPECT_EQ(a.payload_bytes(), 2 * 2 * container_bytes(64 * 96, TensorFormat::kQ8F32S));
}

TEST(Prefill, BatchOfOneEqualsDecodeStep) {
  const ModelConfig cfg{.hidden_dim = 128, .ffn_dim = 256, .n_layers = 3, .seed = 9};
  std::mt19937_64 rng(3);
  for (ScaleFormat fmt : {ScaleFormat::kF16, ScaleFormat::kF32}) {
    const ToyModel m = ToyModel::synthetic(cfg, fmt);
    const auto x = oracle::random_row(rng, cfg.hidden_dim, -1.0f, 1.0f);
    const PrefillResult p = prefill(m, x, 1);
    const DecodeResult d = decode_loop(m, x, 1);
    EXPECT_EQ(p.y, d.y);
    WorkerPool pool(3);
    EXPECT_EQ(prefill(m, x, 1, active_kernels(), &pool).y, p.y);
  }
}

TEST(Prefill, BatchRowsEqualSingleRows) {
  const ModelConfig cfg{.hidden_dim = 64, .ffn_dim = 128, .n_layers = 2, .seed = 11};
  const ToyModel m = ToyModel::synthetic(cfg, ScaleFormat::kF16);
  std::mt19937_64 rng(4);
  const std::size_t batch = 6;
  auto x = oracle::random_row(rng, batch * cfg.hidden_dim, -1.0f, 1.0f);
  std::copy(x.begin(), x.begin() + 64, x.begin() + 64 * 3);  // rows 0 and 3 duplicate
  const PrefillResult p = prefill(m, x, batch);
  EXPECT_TRUE(std::equal(p.y.begin(), p.y.begin() + 64, p.y.begin() + 64 * 3));
  for (std::size_t i = 0; i < batch; ++i) {
    const auto row = prefill(m, std::span<const float>(x).subspan(i * 64, 64), 1);
    EXPECT_TRUE(std::equal(row.y.begin(), row.y.end(), p.y.begin() + static_cast<std::ptrdiff_t>(i * 64)));
  }
}

TEST(Prefill, ZeroModelIsIdentityOnBatch) {
  const ToyModel m = zero_model(96, 64, 4, ScaleFormat::kF32);
  std::mt19937_64 rng(5);
  const auto x = oracle::random_row(rng, 5 * 96, -4.0f, 4.0f);
  EXPECT_EQ(prefill(m, x, 5).y, x);
}

TEST(Prefill, RateIsBatchOverElapsed) {
  const ToyModel m = ToyModel::synthetic({.hidden_dim = 64, .ffn_dim = 64, .n_layers = 1}, ScaleFormat::kF32);
  const PrefillResult p = prefill(m, std::vector<float>(8 * 64, 0.5f), 8);
  ASSERT_GT(p.elapsed_s, 0.0);
  EXPECT_DOUBLE_EQ(p.rate(), 8 / p.elapsed_s);
  EXPECT_THROW(prefill(m, std::vector<float>(), 0), std::invalid_argument);
  EXPECT_THROW(prefill(m, std::vector<float>(63), 1), std::invalid_argument);
}

TEST(Decode, ZeroModelStateIsFixedAfterRenormalization) {
  const ToyModel m = zero_model(64, 32, 2, ScaleFormat::kF16);
  std::mt19937_64 rng(6);
  const auto x = oracle::random_row(rng, 64, -5.0f, 5.0f);
  const DecodeResult d = decode_loop(m, x, 10);
  ASSERT_EQ(d.step_s.size(), 10u);
  double ss = 0.0;
  for (float v : x) ss += static_cast<double>(v) * v;
  const double rms = std::sqrt(ss / 64);
  for (std::size_t i = 0; i < 64; ++i) EXPECT_NEAR(d.y[i], x[i] / rms, 1e-6 * std::fabs(x[i] / rms) + 1e-7);
}

TEST(Decode, LongRunStaysFinite) {
  const ModelConfig cfg{.hidden_dim = 128, .ffn_dim = 256, .n_layers = 2, .seed = 13};
  std::mt19937_64 rng(7);
  for (ScaleFormat fmt : {ScaleFormat::kF16, ScaleFormat::kF32}) {
    const ToyModel m = ToyModel::synthetic(cfg, fmt);
    const DecodeResult d = decode_loop(m, oracle::random_row(rng, 128, -1.0f, 1.0f), 256);
    EXPECT_EQ(d.step_s.size(), 256u);
    for (float v : d.y) ASSERT_TRUE(std::isfinite(v));
    EXPECT_GT(d.rate(), 0.0);
  }
}

TEST(Decode, NonFiniteStateRaises) {
  const ToyModel m = zero_model(32, 32, 1, ScaleFormat::kF32);
  std::vector<float> x(32, 1.0f);
  x[3] = std::numeric_limits<float>::infinity();
  EXPECT_THROW(decode_loop(m, x, 2), NumericDivergence);
  x[3] = std::numeric_limits<float>::quiet_NaN();
  EXPECT_THROW(decode_loop(m, x, 1), NumericDivergence);
  EXPECT_THROW(decode_loop(m, std::vector<float>(32, 1.0f), 0), std::invalid_argument);
}

// Same f32 weights quantized with both scale formats. The only difference is
// the binary16 rounding of each scale (relative 2^-11), so each output moves by
// at most that fraction of the magnitudes feeding it; allow 10x.
TEST(FormatConsistency, F16AndF32ScalesAgree) {
  const ModelConfig cfg{.hidden_dim = 128, .ffn_dim = 256, .n_layers = 1, .seed = 17};
  const auto weights = synthetic_weights(cfg);
  const ToyModel m16 = ToyModel::quantize(weights, 128, 256, ScaleFormat::kF16);
  const ToyModel m32 = ToyModel::quantize(weights, 128, 256, ScaleFormat::kF32);
  const auto up = m32.layers()[0].w_up.dequantize();
  const auto down = m32.layers()[0].w_down.dequantize();
  const double rel = std::ldexp(1.0, -11);
  std::mt19937_64 rng(8);
  for (int iter = 0; iter < 50; ++iter) {
    const auto x = oracle::random_row(rng, 128, -2.0f, 2.0f);
    std::vector<float> y16(128), y32(128);
    layer_forward(m16.layers()[0], x, y16);
    layer_forward(m32.layers()[0], x, y32);

    const auto h = oracle::rms_norm(x, 1e-5);
    std::vector<double> u_mag(256), a(256);
    for (std::size_t j = 0; j < 256; ++j) {
      double u = 0.0;
      for (std::size_t k = 0; k < 128; ++k) {
        u += up[j * 128 + k] * h[k];
        u_mag[j] += std::fabs(up[j * 128 + k] * h[k]);
      }
      a[j] = oracle::silu(u);
    }
    for (std::size_t i = 0; i < 128; ++i) {
      double mag = 0.0;
      for (std::size_t j = 0; j < 256; ++j) mag += std::fabs(down[i * 256 + j]) * (std::fabs(a[j]) + 1.1 * u_mag[j]);
      ASSERT_LE(std::fabs(y16[i] - y32[i]), 10 * rel * mag) << "i=" << i;
    }
  }
}

}  // namespace
}  // namespace qf
