#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace edqed {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidSpec : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::string where)
      : Error(where.empty() ? what : what + " at " + where), where_(std::move(where)) {}
  const std::string& where() const { return where_; }

 private:
  std::string where_;
};

class CapacityError : public Error {
 public:
  CapacityError(long double k, std::uint64_t cap)
      : Error("configuration count K=" + format_count(k) + " exceeds cap " +
              std::to_string(cap)),
        k_(k) {}
  long double count() const { return k_; }

 private:
  static std::string format_count(long double k) {
    if (k < 1.8e19L) return std::to_string(static_cast<unsigned long long>(k));
    return std::to_string(static_cast<double>(k));
  }
  long double k_;
};

class IndexError : public Error {
 public:
  using Error::Error;
};

class NumericalError : public Error {
 public:
  using Error::Error;
};

class SingularSupport : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class StepSizeError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class NoConvergence : public NumericalError {
 public:
  NoConvergence(const std::string& what, double residual)
      : NumericalError(what + " (residual " + std::to_string(residual) + ")"),
        residual_(residual) {}
  double residual() const { return residual_; }

 private:
  double residual_;
};

}  // namespace edqed
