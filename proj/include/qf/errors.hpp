// Copyright 2026 The qf Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace qf {

// Malformed container contents. tensor() names the offending table entry, or
// is empty when the damage is in the header or table framing.
class ParseError : public std::runtime_error {
 public:
  ParseError(std::string tensor, const std::string& what)
      : std::runtime_error(tensor.empty() ? what : "tensor '" + tensor + "': " + what),
        tensor_(std::move(tensor)) {}

  const std::string& tensor() const noexcept { return tensor_; }

 private:
  std::string tensor_;
};

// Input is well-formed but not acceptable for the requested operation.
class PreconditionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class NumericDivergence : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace qf
