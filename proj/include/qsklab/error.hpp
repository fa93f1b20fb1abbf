#pragma once

#include <stdexcept>
#include <string>

namespace qsklab {

/// Failure category; maps onto CLI exit codes (usage/config = 2, cap = 3).
enum class ErrorKind { invalid_argument, cap_exceeded, numerical, io };

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

inline Error invalid_argument(const std::string& what) {
  return Error(ErrorKind::invalid_argument, what);
}

inline Error cap_exceeded(const std::string& what) {
  return Error(ErrorKind::cap_exceeded, what);
}

inline Error numerical_failure(const std::string& what) {
  return Error(ErrorKind::numerical, what);
}

}  // namespace qsklab
