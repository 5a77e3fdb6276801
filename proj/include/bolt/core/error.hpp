// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace bolt {

struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Bad user input: config constraint violations, unusable CLI arguments.
struct ConfigError : Error {
  using Error::Error;
};

/// Filesystem and serialization failures (missing files, corrupt payloads).
struct IoError : Error {
  using Error::Error;
};

/// Shape/structure mismatches between tensors or parameter bundles.
struct ShapeError : Error {
  using Error::Error;
};

/// Non-finite values or other numeric breakdown during training.
struct NumericError : Error {
  using Error::Error;
};

}  // namespace bolt
