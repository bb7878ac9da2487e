// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The flyeval Authors

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace flyeval {

/// Malformed input or a violated data invariant. Maps to CLI exit code 2.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A pose field failed validation. Carries the location for diagnostics.
class InvariantError : public DataError {
 public:
  InvariantError(int agent_id, std::size_t frame, std::string field, const std::string& what)
      : DataError("agent " + std::to_string(agent_id) + ", frame " + std::to_string(frame) +
                  ", field '" + field + "': " + what),
        agent_id_(agent_id),
        frame_(frame),
        field_(std::move(field)) {}

  int agent_id() const noexcept { return agent_id_; }
  std::size_t frame() const noexcept { return frame_; }
  const std::string& field() const noexcept { return field_; }

 private:
  int agent_id_;
  std::size_t frame_;
  std::string field_;
};

/// NaN loss, diverged training, non-finite pose. Maps to CLI exit code 3.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace flyeval
