#pragma once

#include <stdexcept>
#include <string>

namespace crossgen {

// Base for every error the library raises on bad input or bad state.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Tensor extents do not agree with what an operation needs.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// A binary or text container (WAV, IDX, AIPX, AICK, config) is malformed.
class ParseError : public Error {
 public:
  using Error::Error;
};

// NaN/Inf appeared where finite values are required.
class NumericError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace crossgen
