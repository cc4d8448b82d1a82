// Copyright 2026 The onegan Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace onegan {

/// A value violates a documented precondition (range, normalization, size).
class ValidationError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Tensor shapes do not match what a block or network expects.
class ShapeError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// An operation was called in a way its contract forbids.
class UsageError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Configuration file or dataset layout problems.
class ConfigError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Illegal state transition (e.g. cloning the discriminator bank twice).
class StateError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

} // namespace onegan
