#pragma once

#include <stdexcept>
#include <string>

namespace rscnet {

// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class NumericError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

// Malformed or inconsistent files: manifests, checkpoints, datasets.
class FormatError : public Error {
 public:
  using Error::Error;
};

inline void check_shape(bool cond, const std::string& msg) {
  if (!cond) throw ShapeError(msg);
}

inline void check_config(bool cond, const std::string& msg) {
  if (!cond) throw ConfigError(msg);
}

}  // namespace rscnet
