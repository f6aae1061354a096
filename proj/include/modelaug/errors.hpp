#pragma once

#include <stdexcept>
#include <string>

namespace modelaug {

// Rejected in-memory input: shape mismatch, bad parameter, invalid value.
class invalid_input : public std::invalid_argument {
 public:
  explicit invalid_input(const std::string& what) : std::invalid_argument(what) {}
};

// Numerical failure inside a factorization (matrix not SPD within tolerance).
class factorization_error : public std::runtime_error {
 public:
  explicit factorization_error(const std::string& what) : std::runtime_error(what) {}
};

// File reading/writing/parsing failure.
class io_error : public std::runtime_error {
 public:
  explicit io_error(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace modelaug
