// Copyright 2026 The FedLion Lab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace fedlion {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Vector lengths disagree.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// NaN/Inf produced or consumed.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Caller violated a precondition (empty input, n > N, unknown id, ...).
class UsageError : public Error {
 public:
  using Error::Error;
};

/// Malformed bytes or text on input.
class FormatError : public Error {
 public:
  using Error::Error;
};

class PartitionError : public Error {
 public:
  using Error::Error;
};

/// A configuration field is out of range. `field()` names it.
class ValidationError : public Error {
 public:
  ValidationError(std::string field, const std::string& what)
      : Error(field + ": " + what), field_(std::move(field)) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace fedlion
