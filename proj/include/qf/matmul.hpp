// Copyright 2026 The qf Authors
// SPDX-License-Identifier: Apache-2.0

// Q8 weight matrices and the GEMV/GEMM drivers built on vec_dot_q8.

#pragma once

#include <condition_variable>
#include <cstddef>
#include <functional>
#include <mutex>
#include <span>
#include <thread>
#include <variant>
#include <vector>

#include "qf/kernels.hpp"
#include "qf/quant.hpp"

namespace qf {

/// Fixed set of worker threads for row-partitioned kernels.
///
/// parallel_for(n, fn) splits [0, n) into size() contiguous chunks and runs
/// fn(begin, end) on each, the calling thread taking the first chunk. The
/// partition only decides who computes a row, never how, so results do not
/// depend on the thread count.
class WorkerPool {
 public:
  explicit WorkerPool(std::size_t n_threads);
  ~WorkerPool();
  WorkerPool(const WorkerPool&) = delete;
  WorkerPool& operator=(const WorkerPool&) = delete;

  std::size_t size() const { return workers_.size() + 1; }

  void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& fn);

  /// requested, capped by QF_THREADS when that is set to a positive integer.
  static std::size_t threads_from_env(std::size_t requested);

 private:
  void worker_loop(std::size_t index);

  std::vector<std::thread> workers_;
  std::mutex mu_;
  std::condition_variable start_cv_;
  std::condition_variable done_cv_;
  const std::function<void(std::size_t, std::size_t)>* job_ = nullptr;
  std::size_t job_n_ = 0;
  std::size_t generation_ = 0;
  std::size_t pending_ = 0;
  bool stop_ = false;
};

/// Row-major r x c matrix of Q8 blocks; c is a multiple of 32.
class QMatrix {
 public:
  QMatrix() = default;

  static QMatrix quantize(std::span<const float> w, std::size_t rows, std::size_t cols,
                          ScaleFormat format);
  template <QuantBlock Block>
  static QMatrix from_blocks(std::size_t rows, std::size_t cols, std::vector<Block> blocks);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t blocks_per_row() const { return cols_ / kBlockSize; }
  ScaleFormat format() const {
    return blocks_.index() == 0 ? ScaleFormat::kF16 : ScaleFormat::kF32;
  }

  template <QuantBlock Block>
  std::span<const Block> blocks() const {
    return std::get<std::vector<Block>>(blocks_);
  }
  template <QuantBlock Block>
  std::span<const Block> row(std::size_t r) const {
    return blocks<Block>().subspan(r * blocks_per_row(), blocks_per_row());
  }

  std::vector<float> dequantize() const;
  std::size_t payload_bytes() const;

  // Calls fn(std::span<const Block>) with the full block array.
  template <class Fn>
  decltype(auto) visit(Fn&& fn) const {
    return std::visit([&](const auto& v) { return fn(std::span(v)); }, blocks_);
  }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::variant<std::vector<BlockQ8F16S>, std::vector<BlockQ8F32S>> blocks_;
};

/// y = W x. x is quantized once to activation blocks of W's scale format,
/// then y_j = vec_dot_q8(W_j, x_q). Rows are partitioned over pool when
/// given. Throws std::invalid_argument on shape mismatch.
void matvec_q8(const QMatrix& w, std::span<const float> x, std::span<float> y,
               const KernelSet& ks = active_kernels(), WorkerPool* pool = nullptr);

/// Y (m x r) = X (m x c) W^T; row i of Y equals matvec_q8(W, X_i) exactly.
void matmul_q8(const QMatrix& w, std::span<const float> x, std::size_t m, std::span<float> y,
               const KernelSet& ks = active_kernels(), WorkerPool* pool = nullptr);

}  // namespace qf
