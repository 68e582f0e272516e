#pragma once

#include <stdexcept>
#include <string>

namespace qidn {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input files, bad references, label mismatches.
class DataError : public Error {
 public:
  using Error::Error;
};

// NaN/Inf, zero-norm vectors, degenerate softmax rows.
class NumericError : public Error {
 public:
  using Error::Error;
};

// Invalid configuration or call-site misuse.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace qidn
