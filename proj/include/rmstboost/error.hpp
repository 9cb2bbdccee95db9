#pragma once

#include <stdexcept>
#include <string>

namespace rmstboost {

// Exception categories map one-to-one onto CLI exit codes.
class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

inline void require(bool ok, const std::string& what) {
  if (!ok) throw UsageError(what);
}

inline void require_data(bool ok, const std::string& what) {
  if (!ok) throw DataError(what);
}

}  // namespace detail
}  // namespace rmstboost
