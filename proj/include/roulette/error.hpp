#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace roulette {

// Base class for every error raised by the library. The CLI maps the
// subclasses onto process exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A weighted series term, product of correction factors or importance
// weight left the representable range.
class EstimatorOverflow : public Error {
 public:
  EstimatorOverflow(const std::string& what, std::size_t index, double detail)
      : Error(what), index_(index), detail_(detail) {}

  std::size_t index() const noexcept { return index_; }
  double detail() const noexcept { return detail_; }

 private:
  std::size_t index_;
  double detail_;
};

class InvalidSchedule : public Error {
 public:
  using Error::Error;
};

class DegenerateSource : public Error {
 public:
  using Error::Error;
};

class TiltingInfeasible : public Error {
 public:
  using Error::Error;
};

class DegenerateSign : public Error {
 public:
  using Error::Error;
};

class SizeError : public Error {
 public:
  using Error::Error;
};

class UnsupportedRegime : public Error {
 public:
  using Error::Error;
};

// Coupling from the past did not coalesce within its epoch budget.
class CftpFailure : public Error {
 public:
  using Error::Error;
};

class QuadratureError : public Error {
 public:
  QuadratureError(const std::string& what, double estimate, double error)
      : Error(what), estimate_(estimate), error_(error) {}

  double estimate() const noexcept { return estimate_; }
  double error_estimate() const noexcept { return error_; }

 private:
  double estimate_;
  double error_;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class DatasetMismatch : public Error {
 public:
  using Error::Error;
};

}  // namespace roulette
