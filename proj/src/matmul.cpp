// Copyright 2026 The qf Authors
// SPDX-License-Identifier: Apache-2.0

#include "qf/matmul.hpp"

#include <algorithm>
#include <cstdlib>
#include <stdexcept>
#include <string>

namespace qf {

WorkerPool::WorkerPool(std::size_t n_threads) {
  const std::size_t extra = n_threads > 1 ? n_threads - 1 : 0;
  workers_.reserve(extra);
  for (std::size_t i = 0; i < extra; ++i) workers_.emplace_back([this, i] { worker_loop(i + 1); });
}

WorkerPool::~WorkerPool() {
  {
    std::lock_guard lock(mu_);
    stop_ = true;
  }
  start_cv_.notify_all();
  for (auto& t : workers_) t.join();
}

namespace {

std::pair<std::size_t, std::size_t> chunk(std::size_t n, std::size_t parts, std::size_t index) {
  const std::size_t base = n / parts;
  const std::size_t rem = n % parts;
  const std::size_t begin = index * base + std::min(index, rem);
  return {begin, begin + base + (index < rem ? 1 : 0)};
}

}  // namespace

void WorkerPool::parallel_for(std::size_t n,
                              const std::function<void(std::size_t, std::size_t)>& fn) {
  if (workers_.empty() || n < 2) {
    if (n > 0) fn(0, n);
    return;
  }
  {
    std::lock_guard lock(mu_);
    job_ = &fn;
    job_n_ = n;
    pending_ = workers_.size();
    ++generation_;
  }
  start_cv_.notify_all();

  const auto [b, e] = chunk(n, size(), 0);
  if (b < e) fn(b, e);

  std::unique_lock lock(mu_);
  done_cv_.wait(lock, [this] { return pending_ == 0; });
  job_ = nullptr;
}

void WorkerPool::worker_loop(std::size_t index) {
  std::size_t seen = 0;
  for (;;) {
    const std::function<void(std::size_t, std::size_t)>* job;
    std::size_t n;
    {
      std::unique_lock lock(mu_);
      start_cv_.wait(lock, [&] { return stop_ || generation_ != seen; });
      if (stop_) return;
      seen = generation_;
      job = job_;
      n = job_n_;
    }
    const auto [b, e] = chunk(n, size(), index);
    if (b < e) (*job)(b, e);
    {
      std::lock_guard lock(mu_);
      --pending_;
    }
    done_cv_.notify_one();
  }
}

std::size_t WorkerPool::threads_from_env(std::size_t requested) {
  std::size_t n = std::max<std::size_t>(requested, 1);
  if (const char* v = std::getenv("QF_THREADS")) {
    char* end = nullptr;
    const long cap = std::strtol(v, &end, 10);
    if (end != v && *end == '\0' && cap > 0) n = std::min(n, static_cast<std::size_t>(cap));
  }
  return n;
}

QMatrix QMatrix::quantize(std::span<const float> w, std::size_t rows, std::size_t cols,
                          ScaleFormat format) {
  if (cols == 0 || cols % kBlockSize != 0) {
    throw std::invalid_argument("QMatrix: column count " + std::to_string(cols) +
                                " is not a positive multiple of 32");
  }
  if (w.size() != rows * cols) throw std::invalid_argument("QMatrix: data size mismatch");

  QMatrix m;
  m.rows_ = rows;
  m.cols_ = cols;
  auto fill = [&](auto tag) {
    using Block = decltype(tag);
    std::vector<Block> blocks(rows * cols / kBlockSize);
    for (std::size_t k = 0; k < blocks.size(); ++k) {
      blocks[k] = quantize_block<Block>(w.subspan(k * kBlockSize).template first<kBlockSize>());
    }
    m.blocks_ = std::move(blocks);
  };
  if (format == ScaleFormat::kF16) {
    fill(BlockQ8F16S{});
  } else {
    fill(BlockQ8F32S{});
  }
  return m;
}

template <QuantBlock Block>
QMatrix QMatrix::from_blocks(std::size_t rows, std::size_t cols, std::vector<Block> blocks) {
  if (cols == 0 || cols % kBlockSize != 0 || blocks.size() * kBlockSize != rows * cols) {
    throw std::invalid_argument("QMatrix: block array does not match a " + std::to_string(rows) +
                                "x" + std::to_string(cols) + " matrix");
  }
  QMatrix m;
  m.rows_ = rows;
  m.cols_ = cols;
  m.blocks_ = std::move(blocks);
  return m;
}

template QMatrix QMatrix::from_blocks(std::size_t, std::size_t, std::vector<BlockQ8F16S>);
template QMatrix QMatrix::from_blocks(std::size_t, std::size_t, std::vector<BlockQ8F32S>);

std::vector<float> QMatrix::dequantize() const {
  std::vector<float> out(rows_ * cols_);
  visit([&](auto blocks) { dequantize_row(blocks, std::span<float>(out)); });
  return out;
}

std::size_t QMatrix::payload_bytes() const {
  return container_bytes(rows_ * cols_, tensor_format_of(format()));
}

namespace {

template <QuantBlock Block>
std::vector<Block> quantize_activations(std::span<const float> x) {
  std::vector<Block> xq(x.size() / kBlockSize);
  for (std::size_t k = 0; k < xq.size(); ++k) {
    xq[k] = quantize_block<Block>(x.subspan(k * kBlockSize).template first<kBlockSize>());
  }
  return xq;
}

template <QuantBlock Block>
void matmul_impl(const QMatrix& w, std::span<const float> x, std::size_t m, std::span<float> y,
                 const KernelSet& ks, WorkerPool* pool) {
  const std::size_t r = w.rows();
  const std::size_t c = w.cols();
  const std::size_t nb = w.blocks_per_row();

  std::vector<Block> xq(m * nb);
  for (std::size_t i = 0; i < m; ++i) {
    const auto row = quantize_activations<Block>(x.subspan(i * c, c));
    std::copy(row.begin(), row.end(), xq.begin() + static_cast<std::ptrdiff_t>(i * nb));
  }

  const VecDotFn<Block> dot = kernel_binding<Block>(ks).active;
  const std::span<const Block> wb = w.blocks<Block>();
  const std::span<const Block> xb(xq);
  // Weight row outer, batch inner: each weight row is streamed once per call.
  auto rows = [&](std::size_t begin, std::size_t end) {
    for (std::size_t j = begin; j < end; ++j) {
      const auto wrow = wb.subspan(j * nb, nb);
      for (std::size_t i = 0; i < m; ++i) y[i * r + j] = dot(wrow, xb.subspan(i * nb, nb));
    }
  };
  if (pool != nullptr) {
    pool->parallel_for(r, rows);
  } else {
    rows(0, r);
  }
}

void check_shapes(const QMatrix& w, std::size_t x_len, std::size_t m, std::size_t y_len) {
  if (w.cols() == 0 || w.cols() % kBlockSize != 0) {
    throw std::invalid_argument("matmul_q8: weight columns must be a positive multiple of 32");
  }
  if (x_len != m * w.cols()) {
    throw std::invalid_argument("matmul_q8: input length " + std::to_string(x_len) +
                                " does not match " + std::to_string(m) + "x" +
                                std::to_string(w.cols()));
  }
  if (y_len != m * w.rows()) {
    throw std::invalid_argument("matmul_q8: output length " + std::to_string(y_len) +
                                " does not match " + std::to_string(m) + "x" +
                                std::to_string(w.rows()));
  }
}

}  // namespace

void matvec_q8(const QMatrix& w, std::span<const float> x, std::span<float> y,
               const KernelSet& ks, WorkerPool* pool) {
  matmul_q8(w, x, 1, y, ks, pool);
}

void matmul_q8(const QMatrix& w, std::span<const float> x, std::size_t m, std::span<float> y,
               const KernelSet& ks, WorkerPool* pool) {
  check_shapes(w, x.size(), m, y.size());
  if (m == 0) return;
  if (w.format() == ScaleFormat::kF16) {
    matmul_impl<BlockQ8F16S>(w, x, m, y, ks, pool);
  } else {
    matmul_impl<BlockQ8F32S>(w, x, m, y, ks, pool);
  }
}

}  // namespace qf
