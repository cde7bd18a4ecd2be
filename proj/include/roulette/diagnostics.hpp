#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <vector>

#include "roulette/error.hpp"
#include "roulette/log.hpp"
#include "roulette/pm_mcmc.hpp"

namespace roulette {

namespace detail {

inline double lag_cov(const std::vector<double>& x, double mean, std::size_t k) {
  double s = 0.0;
  for (std::size_t i = 0; i + k < x.size(); ++i) s += (x[i] - mean) * (x[i + k] - mean);
  return s / static_cast<double>(x.size());
}

inline double mean_of(const std::vector<double>& x) {
  double m = 0.0;
  for (double v : x) m += v;
  return m / static_cast<double>(x.size());
}

}  // namespace detail

// Effective sample size n / tau with tau from Geyer's initial positive
// sequence (made monotone), clamped to [1, n].
inline double ess(const std::vector<double>& x) {
  const std::size_t n = x.size();
  if (n < 10) throw SizeError("ESS needs at least 10 values");
  const double mean = detail::mean_of(x);
  const double g0 = detail::lag_cov(x, mean, 0);
  if (!(g0 > 0.0)) {
    log::info("ESS of a constant series reported as its length");
    return static_cast<double>(n);
  }
  double sum = 0.0;
  double prev = g0 + detail::lag_cov(x, mean, 1);
  if (prev > 0.0) {
    sum = prev;
    for (std::size_t m = 1; 2 * m + 1 < n; ++m) {
      double pair = detail::lag_cov(x, mean, 2 * m) + detail::lag_cov(x, mean, 2 * m + 1);
      if (!(pair > 0.0)) break;
      pair = std::min(pair, prev);
      sum += pair;
      prev = pair;
    }
  }
  const double tau = (2.0 * sum - g0) / g0;
  return std::clamp(static_cast<double>(n) / tau, 1.0, static_cast<double>(n));
}

// 1 + 2 sum_k w(k / M) rho_k with the Tukey-Hanning window
// w(t) = (1 + cos(pi t)) / 2, M = twice the first lag with rho_k < 0.05.
inline double lag_window_autocorrelation_sum(const std::vector<double>& x) {
  const std::size_t n = x.size();
  const double mean = detail::mean_of(x);
  const double g0 = detail::lag_cov(x, mean, 0);
  if (!(g0 > 0.0)) return 1.0;
  std::vector<double> rho{1.0};
  std::size_t cut = n - 1;
  for (std::size_t k = 1; k < n; ++k) {
    rho.push_back(detail::lag_cov(x, mean, k) / g0);
    if (rho.back() < 0.05) {
      cut = k;
      break;
    }
  }
  const std::size_t width = std::min(2 * cut, n - 1);
  for (std::size_t k = rho.size(); k <= width; ++k) rho.push_back(detail::lag_cov(x, mean, k) / g0);
  double v = 1.0;
  for (std::size_t k = 1; k < width; ++k) {
    const double w = 0.5 * (1.0 + std::cos(std::numbers::pi * static_cast<double>(k) / static_cast<double>(width)));
    v += 2.0 * w * rho[k];
  }
  return std::max(v, 1e-12);
}

struct SignCorrectedSummary {
  double estimate = 0.0;           // I_hat
  double r_hat = 1.0;              // mean sign
  double v_hat = 1.0;              // autocorrelation sum of h * sigma
  double variance = 0.0;           // Monte Carlo variance of I_hat
  double ess = 0.0;
  double negative_fraction = 0.0;
  double sd = 0.0;                 // sign-corrected posterior sd of h
  std::size_t n = 0;
};

// I_hat = sum sigma h / sum sigma with the variance approximation
// (pi(h^2) - I^2) V / (n r^2).
inline SignCorrectedSummary sign_corrected_expectation(const std::vector<double>& h, const std::vector<int>& sign) {
  if (h.size() != sign.size()) throw SizeError("values and signs differ in length");
  if (h.empty()) throw SizeError("sign-corrected expectation needs a non-empty chain");
  const std::size_t n = h.size();
  double s = 0.0, sh = 0.0, sh2 = 0.0;
  std::size_t negatives = 0;
  std::vector<double> hs(n);
  for (std::size_t i = 0; i < n; ++i) {
    s += sign[i];
    sh += sign[i] * h[i];
    sh2 += sign[i] * h[i] * h[i];
    hs[i] = sign[i] * h[i];
    if (sign[i] < 0) ++negatives;
  }
  if (s == 0.0) throw DegenerateSign("signs sum to zero; the sign-corrected estimate is undefined");
  SignCorrectedSummary out;
  out.n = n;
  out.estimate = sh / s;
  out.r_hat = s / static_cast<double>(n);
  out.negative_fraction = static_cast<double>(negatives) / static_cast<double>(n);
  const double spread = std::max(0.0, sh2 / s - out.estimate * out.estimate);
  out.sd = std::sqrt(spread);
  out.v_hat = n >= 2 ? lag_window_autocorrelation_sum(hs) : 1.0;
  out.variance = spread * out.v_hat / (static_cast<double>(n) * out.r_hat * out.r_hat);
  out.ess = static_cast<double>(n) * out.r_hat * out.r_hat / out.v_hat;
  return out;
}

template <class H>
SignCorrectedSummary sign_corrected_expectation(const std::vector<ChainRecord>& chain, std::size_t burn_in, H&& h) {
  std::vector<double> values;
  std::vector<int> signs;
  for (std::size_t i = burn_in; i < chain.size(); ++i) {
    values.push_back(h(chain[i].theta));
    signs.push_back(chain[i].sign);
  }
  return sign_corrected_expectation(values, signs);
}

}  // namespace roulette
