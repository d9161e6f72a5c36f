#pragma once

#include <stdexcept>
#include <string>

namespace raf {

// Base class for all library errors.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Tensor/feature shape disagreement; message names the offending shapes.
struct DimensionError : Error {
  using Error::Error;
};

// A scalar argument is out of its documented range.
struct ArgumentError : Error {
  using Error::Error;
};

// Malformed on-disk payload (netpbm, weight container); message carries a byte offset.
struct FormatError : Error {
  using Error::Error;
};

// Filesystem-level failure (missing file, count mismatch, unwritable path).
struct IoError : Error {
  using Error::Error;
};

// Malformed manifest/CSV text; message carries a line number where applicable.
struct ParseError : Error {
  using Error::Error;
};

// RaformerConfig or run-config invariant violation.
struct ConfigError : Error {
  using Error::Error;
};

}  // namespace raf
