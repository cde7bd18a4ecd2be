#pragma once

// Signed unbiased estimators of an intractable likelihood f(y; theta) / Z(theta)
// built from i.i.d. unbiased draws Z_hat_i(theta) of the normalizer.
//
// A normalizer source is any callable `double(Rng&)` returning log Z_hat_i for
// a fixed parameter point; the draws must be i.i.d. with E[Z_hat_i] = Z.

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <limits>
#include <sstream>
#include <vector>

#include "roulette/error.hpp"
#include "roulette/log.hpp"
#include "roulette/random.hpp"
#include "roulette/signed_value.hpp"
#include "roulette/truncation.hpp"

namespace roulette {

template <class S>
concept NormalizerSource = requires(S s, Rng& rng) {
  { s(rng) } -> std::convertible_to<double>;
};

// Moments of the pilot ratios r_i = Z_hat_i / Z_tilde.
struct PilotStats {
  double log_mean = 0.0;        // log of the pilot mean of Z_hat
  double mean_ratio = 1.0;      // mean r_i relative to exp(log_mean)
  double second_moment = 1.0;   // mean r_i^2 relative to exp(log_mean)
  std::size_t draws = 0;

  double cv() const { return std::sqrt(std::max(0.0, second_moment - mean_ratio * mean_ratio)) / mean_ratio; }
};

inline double log_mean_exp(const std::vector<double>& logs) {
  if (logs.empty()) return -std::numeric_limits<double>::infinity();
  const double m = *std::max_element(logs.begin(), logs.end());
  if (m == -std::numeric_limits<double>::infinity()) return m;
  double s = 0.0;
  for (double v : logs) s += std::exp(v - m);
  return m + std::log(s / static_cast<double>(logs.size()));
}

inline PilotStats pilot_stats(const std::vector<double>& log_draws) {
  if (log_draws.size() < 2) throw DegenerateSource("pilot needs at least two normalizer draws");
  for (double v : log_draws)
    if (std::isnan(v) || v == std::numeric_limits<double>::infinity())
      throw DegenerateSource("pilot normalizer draw is not finite");
  PilotStats s;
  s.draws = log_draws.size();
  s.log_mean = log_mean_exp(log_draws);
  if (s.log_mean == -std::numeric_limits<double>::infinity())
    throw DegenerateSource("pilot normalizer draws are all zero");
  double m1 = 0.0, m2 = 0.0;
  for (double v : log_draws) {
    const double r = std::exp(v - s.log_mean);
    m1 += r;
    m2 += r * r;
  }
  s.mean_ratio = m1 / static_cast<double>(s.draws);
  s.second_moment = m2 / static_cast<double>(s.draws);
  return s;
}

// Reference normalizer Z_tilde (kept in log space), multiplier c, and the
// exponent split E / shift U used by the scaled exponential estimator.
struct TiltingPlan {
  double log_z_tilde = 0.0;
  double c = 1.0;
  int exponent_split = 1;
  double shift = 0.0;
  // Pilot moments of Z_hat / Z_tilde, kept so that the convergence
  // condition can be monitored on fresh draws.
  double pilot_mean_ratio = 1.0;
  double pilot_second_moment = 1.0;
  std::size_t pilot_draws = 0;
  bool kappa_target_met = true;

  double z_tilde() const { return std::exp(log_z_tilde); }

  // Pilot estimate of kappa = 1 - c Z / Z_tilde.
  double kappa_hat() const { return 1.0 - c * pilot_mean_ratio; }

  // Pilot estimate of E[(1 - c Z_hat / Z_tilde)^2].
  double factor_second_moment() const {
    return std::max(0.0, 1.0 - 2.0 * c * pilot_mean_ratio + c * c * pilot_second_moment);
  }

  // 0 < c < 2 Z_tilde E[Z_hat] / E[Z_hat^2] on pilot moments.
  bool sufficient_condition() const {
    return c > 0.0 && c < 2.0 * pilot_mean_ratio / pilot_second_moment;
  }

  void validate() const {
    if (!std::isfinite(log_z_tilde)) throw TiltingInfeasible("Z_tilde must be finite and positive");
    if (!(c > 0.0) || !std::isfinite(c)) throw TiltingInfeasible("tilting multiplier c must be positive");
    if (exponent_split < 1) throw TiltingInfeasible("exponent split E must be at least 1");
  }
};

struct TiltingOptions {
  double kappa_target = 0.5;
  // Shrinks c to 1 / (1 + sign_margin * cv) so that most correction factors
  // 1 - c Z_hat / Z_tilde stay positive, but not below 1 - kappa_target;
  // 0 keeps c = 1.
  double sign_margin = 0.0;
  bool split = false;
  double shift = 0.0;
};

inline TiltingPlan tilting_from_pilot(const PilotStats& stats, const TiltingOptions& options) {
  if (!(options.kappa_target > 0.0 && options.kappa_target < 1.0))
    throw TiltingInfeasible("kappa_target must lie in (0, 1)");
  TiltingPlan plan;
  plan.log_z_tilde = stats.log_mean;
  plan.pilot_mean_ratio = stats.mean_ratio;
  plan.pilot_second_moment = stats.second_moment;
  plan.pilot_draws = stats.draws;

  double c = 1.0 / (stats.mean_ratio * (1.0 + options.sign_margin * stats.cv()));
  // The sign margin never pushes kappa past its target.
  c = std::max(c, (1.0 - options.kappa_target) / stats.mean_ratio);
  const double bound = 2.0 * stats.mean_ratio / stats.second_moment;
  if (!(c < bound)) c = 0.95 * bound;
  plan.c = c;
  // The convergence condition wins when both cannot hold.
  plan.kappa_target_met = std::fabs(plan.kappa_hat()) <= options.kappa_target;
  if (!plan.kappa_target_met) {
    std::ostringstream os;
    os << "pilot kappa " << plan.kappa_hat() << " exceeds the target " << options.kappa_target
       << " at the largest convergent multiplier (pilot cv " << stats.cv() << ")";
    log::warning(os.str());
  }
  if (options.split) {
    plan.shift = options.shift;
    plan.exponent_split = std::max(1, static_cast<int>(std::ceil(std::fabs(stats.log_mean - options.shift))));
  }
  plan.validate();
  return plan;
}

template <NormalizerSource Source>
TiltingPlan choose_tilting(Source&& source, std::size_t pilot_draws, const TiltingOptions& options, Rng& rng) {
  if (pilot_draws < 2) throw DegenerateSource("pilot_draws must be at least 2");
  std::vector<double> draws;
  draws.reserve(pilot_draws);
  for (std::size_t i = 0; i < pilot_draws; ++i) draws.push_back(static_cast<double>(source(rng)));
  return tilting_from_pilot(pilot_stats(draws), options);
}

// Constant-q roulette schedule for the geometric series whose predicted
// relative variance is at most `variance_target`.
//
// With i.i.d. factors of mean kappa and second moment m, and constant q, the
// roulette estimate of sum_n prod_{i<=n} f_i has
//   Var / S^2 = (1 - kappa^2) / (1 - m / q) - 1,
// which is solved for q. Finite variance needs q > m.
struct QRule {
  double q_min = 0.05;
  double q_max = 0.99;
  double variance_target = 0.1;
};

inline double suggest_q(const TiltingPlan& plan, const QRule& rule) {
  const double kappa = plan.kappa_hat();
  const double m = std::max(plan.factor_second_moment(), kappa * kappa);
  double q = rule.q_min;
  if (m > 0.0) q = m * (1.0 + rule.variance_target) / (rule.variance_target + kappa * kappa);
  q = std::clamp(q, rule.q_min, rule.q_max);
  if (!(q > m)) {
    std::ostringstream os;
    os << "roulette continuation " << q << " does not exceed the factor second moment " << m
       << "; the estimator variance is infinite";
    log::warning(os.str());
  }
  return q;
}

inline RouletteSchedule suggest_schedule(const TiltingPlan& plan, const QRule& rule,
                                         std::size_t safety_cap = kDefaultSafetyCap) {
  return RouletteSchedule::constant(suggest_q(plan, rule), safety_cap);
}

struct EstimatorResult {
  SignedValue value;
  std::size_t n_terms = 0;
  std::size_t n_normalizer_draws = 0;
  bool capped = false;
};

namespace detail {

// Roulette keeps phi_0 inside the truncation (it is always included).
// Single-term truncation is applied to the tail phi_1, phi_2, ... only, with
// phi_0 = 1 added exactly: index k of the distribution selects phi_{k+1}.
// Truncating the whole series would discard the leading 1 with probability
// 1 - q_0 and flip the estimate's sign whenever an odd-order product is
// negative.
template <class Stream>
TruncationOutcome truncate_series(Stream& stream, const Truncation& how, Rng& rng) {
  if (const auto* schedule = std::get_if<RouletteSchedule>(&how)) return roulette_truncate(stream, *schedule, rng);
  auto tail = [&stream](std::size_t j, Rng& r) {
    if (j == 0) stream(std::size_t{0}, r);
    return stream(j + 1, r);
  };
  auto out = single_term_truncate(tail, std::get<IndexDistribution>(how), rng);
  out.value += 1.0;
  out.terms_used += 1;
  return out;
}

inline void check_term(double value, std::size_t j) {
  if (!std::isfinite(value)) {
    std::ostringstream os;
    os << "series term " << j << " is not finite";
    throw EstimatorOverflow(os.str(), j, value);
  }
}

}  // namespace detail

// f(y; theta) / Z(theta) ~ [f / Z_tilde] c [1 + sum_n prod_{i<=n} (1 - c Z_hat_i / Z_tilde)].
template <NormalizerSource Source>
EstimatorResult geometric_estimate(double unnorm_loglik, const TiltingPlan& plan, Source&& source,
                                   const Truncation& how, Rng& rng) {
  std::size_t draws = 0;
  double product = 1.0;
  const double log_c = std::log(plan.c);
  auto stream = [&](std::size_t j, Rng& r) {
    if (j == 0) return product = 1.0;
    const double log_z = static_cast<double>(source(r));
    ++draws;
    product *= 1.0 - std::exp(log_c + log_z - plan.log_z_tilde);
    detail::check_term(product, j);
    return product;
  };
  const auto outcome = detail::truncate_series(stream, how, rng);
  EstimatorResult res;
  res.value = SignedValue::from_real(outcome.value).scaled(unnorm_loglik - plan.log_z_tilde + log_c);
  res.n_terms = outcome.terms_used;
  res.n_normalizer_draws = draws;
  res.capped = outcome.capped;
  if (res.value.is_zero()) log::warning("geometric series estimate is exactly zero");
  return res;
}

// Auxiliary nu ~ Exponential(rate Z(theta)); proposed from rate Z_tilde(theta).
struct ExponentialAuxiliary {
  double log_nu = 0.0;

  double nu() const { return std::exp(log_nu); }

  static ExponentialAuxiliary propose(double log_z_tilde, Rng& rng) {
    return {std::log(standard_exponential(rng)) - log_z_tilde};
  }

  // log of the proposal density Z_tilde exp(-nu Z_tilde).
  double log_proposal_density(double log_z_tilde) const {
    return log_z_tilde - std::exp(log_nu + log_z_tilde);
  }
};

// exp(-nu Z) f ~ exp(-nu Z_tilde) [1 + sum_n nu^n/n! prod_{i<=n} (Z_tilde - Z_hat_i)] f.
template <NormalizerSource Source>
EstimatorResult exponential_estimate(double unnorm_loglik, const ExponentialAuxiliary& aux, const TiltingPlan& plan,
                                     Source&& source, const Truncation& how, Rng& rng) {
  if (!std::isfinite(aux.log_nu)) throw EstimatorOverflow("auxiliary nu must be positive and finite", 0, aux.log_nu);
  const double scale = std::exp(aux.log_nu + plan.log_z_tilde);  // nu * Z_tilde
  std::size_t draws = 0;
  double term = 1.0;
  auto stream = [&](std::size_t j, Rng& r) {
    if (j == 0) return term = 1.0;
    const double log_z = static_cast<double>(source(r));
    ++draws;
    term *= scale * (1.0 - std::exp(log_z - plan.log_z_tilde)) / static_cast<double>(j);
    detail::check_term(term, j);
    return term;
  };
  const auto outcome = detail::truncate_series(stream, how, rng);
  EstimatorResult res;
  res.value = SignedValue::from_real(outcome.value).scaled(unnorm_loglik - scale);
  res.n_terms = outcome.terms_used;
  res.n_normalizer_draws = draws;
  res.capped = outcome.capped;
  return res;
}

// exp(L - U) as the product of E independent series estimates of
// exp((L - U) / E). `shifted` returns one unbiased estimate of L - U per call.
template <class ShiftedSource>
  requires requires(ShiftedSource s, Rng& r) {
    { s(r) } -> std::convertible_to<double>;
  }
EstimatorResult scaled_exponential_estimate(ShiftedSource&& shifted, int exponent_split, const Truncation& how,
                                            Rng& rng) {
  if (exponent_split < 1) throw InvalidSchedule("exponent split E must be at least 1");
  const double inv_e = 1.0 / static_cast<double>(exponent_split);
  EstimatorResult res;
  res.value = SignedValue::one();
  for (int factor = 0; factor < exponent_split; ++factor) {
    double term = 1.0;
    auto stream = [&](std::size_t j, Rng& r) {
      if (j == 0) return term = 1.0;
      const double x = static_cast<double>(shifted(r));
      ++res.n_normalizer_draws;
      term *= x * inv_e / static_cast<double>(j);
      detail::check_term(term, j);
      return term;
    };
    TruncationOutcome outcome;
    try {
      outcome = detail::truncate_series(stream, how, rng);
    } catch (const EstimatorOverflow& e) {
      std::ostringstream os;
      os << "factor " << factor << " of " << exponent_split << ": " << e.what();
      throw EstimatorOverflow(os.str(), static_cast<std::size_t>(factor), e.detail());
    }
    res.value *= SignedValue::from_real(outcome.value);
    res.n_terms += outcome.terms_used;
    res.capped = res.capped || outcome.capped;
  }
  return res;
}

}  // namespace roulette
