#pragma once

#include <cmath>
#include <limits>
#include <ostream>

namespace roulette {

// A real number carried as (log |x|, sign x). Unbiased likelihood estimates
// routinely over- or underflow a double (an Ising log-density is O(N^2)) and
// may be negative, so neither the magnitude nor the sign can be dropped.
struct SignedValue {
  double log_magnitude = -std::numeric_limits<double>::infinity();
  int sign = 0;  // -1, 0 or +1; 0 only for an exact zero

  static SignedValue zero() { return {}; }
  static SignedValue one() { return {0.0, 1}; }

  static SignedValue from_log(double log_magnitude, int sign = 1) {
    if (sign == 0 || log_magnitude == -std::numeric_limits<double>::infinity()) return zero();
    return {log_magnitude, sign > 0 ? 1 : -1};
  }

  static SignedValue from_real(double x) {
    if (x == 0.0) return zero();
    return {std::log(std::fabs(x)), x > 0.0 ? 1 : -1};
  }

  bool is_zero() const { return sign == 0; }

  double to_real() const { return sign == 0 ? 0.0 : sign * std::exp(log_magnitude); }

  SignedValue operator-() const { return {log_magnitude, -sign}; }

  SignedValue& operator*=(const SignedValue& rhs) {
    if (sign == 0 || rhs.sign == 0) return *this = zero();
    log_magnitude += rhs.log_magnitude;
    sign *= rhs.sign;
    return *this;
  }

  SignedValue& operator/=(const SignedValue& rhs) {
    if (sign == 0) return *this;
    log_magnitude -= rhs.log_magnitude;
    sign *= rhs.sign;
    return *this;
  }

  // Multiplication by a positive scalar given in log space.
  SignedValue scaled(double log_factor) const {
    if (sign == 0) return *this;
    return {log_magnitude + log_factor, sign};
  }

  friend SignedValue operator*(SignedValue a, const SignedValue& b) { return a *= b; }
  friend SignedValue operator/(SignedValue a, const SignedValue& b) { return a /= b; }

  // Signed log-sum-exp.
  friend SignedValue operator+(const SignedValue& a, const SignedValue& b) {
    if (a.sign == 0) return b;
    if (b.sign == 0) return a;
    const SignedValue& hi = a.log_magnitude >= b.log_magnitude ? a : b;
    const SignedValue& lo = a.log_magnitude >= b.log_magnitude ? b : a;
    const double r = std::exp(lo.log_magnitude - hi.log_magnitude);
    if (hi.sign == lo.sign) return {hi.log_magnitude + std::log1p(r), hi.sign};
    if (r == 1.0) return zero();
    return {hi.log_magnitude + std::log1p(-r), hi.sign};
  }

  friend bool operator==(const SignedValue&, const SignedValue&) = default;

  friend std::ostream& operator<<(std::ostream& os, const SignedValue& v) {
    return os << (v.sign < 0 ? "-" : v.sign > 0 ? "+" : "0") << "exp(" << v.log_magnitude << ")";
  }
};

}  // namespace roulette
