#pragma once

// Unbiased stochastic truncation of an infinite series S = sum_j phi_j.
//
// A term stream is any callable `double(std::size_t j, Rng&)`. It is always
// called with j = 0, 1, 2, ... in order, so streams whose terms are running
// products (the geometric and exponential series) can keep state between
// calls. Each call may consume fresh randomness from the Rng it is handed.

#include <cmath>
#include <concepts>
#include <cstddef>
#include <cstdint>
#include <sstream>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "roulette/error.hpp"
#include "roulette/log.hpp"
#include "roulette/random.hpp"

namespace roulette {

template <class S>
concept TermStream = requires(S s, std::size_t j, Rng& rng) {
  { s(j, rng) } -> std::convertible_to<double>;
};

// Neumaier compensated sum. Weighted series tails alternate in sign once
// correction factors can go negative, so plain accumulation loses digits.
class CompensatedSum {
 public:
  void add(double x) {
    const double t = sum_ + x;
    if (std::fabs(sum_) >= std::fabs(x)) {
      compensation_ += (sum_ - t) + x;
    } else {
      compensation_ += (x - t) + sum_;
    }
    sum_ = t;
  }
  double value() const { return sum_ + compensation_; }

 private:
  double sum_ = 0.0;
  double compensation_ = 0.0;
};

inline constexpr std::size_t kDefaultSafetyCap = 10'000;

// Continuation probabilities of a Russian roulette stopping time
// tau = inf{k >= 1 : U_k >= q_k}. The survival probability
// p_n = P(tau >= n) = prod_{j<n} q_j, so p_1 = 1.
class RouletteSchedule {
 public:
  enum class Kind { constant_q, per_step_q };

  static RouletteSchedule constant(double q, std::size_t safety_cap = kDefaultSafetyCap) {
    return RouletteSchedule(Kind::constant_q, {q}, safety_cap);
  }

  // q_j for j = 1..q.size(); the last value repeats beyond the list.
  static RouletteSchedule per_step(std::vector<double> q, std::size_t safety_cap = kDefaultSafetyCap) {
    return RouletteSchedule(Kind::per_step_q, std::move(q), safety_cap);
  }

  Kind kind() const { return kind_; }
  std::size_t safety_cap() const { return safety_cap_; }
  const std::vector<double>& q() const { return q_; }

  // q_j, j >= 1.
  double continuation(std::size_t j) const {
    if (kind_ == Kind::constant_q || j > q_.size()) return q_.back();
    return q_[j - 1];
  }

  // p_n = P(tau >= n), n >= 1.
  double survival(std::size_t n) const {
    double p = 1.0;
    for (std::size_t j = 1; j < n; ++j) p *= continuation(j);
    return p;
  }

 private:
  RouletteSchedule(Kind kind, std::vector<double> q, std::size_t safety_cap)
      : kind_(kind), q_(std::move(q)), safety_cap_(safety_cap) {
    if (q_.empty()) throw InvalidSchedule("roulette schedule needs at least one continuation probability");
    for (double v : q_) {
      if (!(v > 0.0 && v <= 1.0)) {
        std::ostringstream os;
        os << "continuation probability " << v << " outside (0, 1]";
        throw InvalidSchedule(os.str());
      }
    }
    if (safety_cap_ < 1) throw InvalidSchedule("safety_cap must be at least 1");
  }

  Kind kind_;
  std::vector<double> q_;
  std::size_t safety_cap_;
};

// Distribution of the single index drawn by weighted single-term truncation.
class IndexDistribution {
 public:
  struct Geometric {
    double p;  // P(k) = (1 - p) p^k
  };
  struct Poisson {
    double lambda;
  };
  struct Table {
    std::vector<double> pmf;  // P(k) = pmf[k], zero beyond the table
  };

  static IndexDistribution geometric(double p) {
    if (!(p > 0.0 && p < 1.0)) throw InvalidSchedule("geometric index parameter must lie in (0, 1)");
    return IndexDistribution(Geometric{p});
  }
  static IndexDistribution poisson(double lambda) {
    if (!(lambda > 0.0 && lambda < 500.0)) throw InvalidSchedule("poisson index mean must lie in (0, 500)");
    return IndexDistribution(Poisson{lambda});
  }
  static IndexDistribution table(std::vector<double> pmf) {
    double total = 0.0;
    for (double v : pmf) {
      if (!(v >= 0.0)) throw InvalidSchedule("negative index probability");
      total += v;
    }
    if (std::fabs(total - 1.0) > 1e-9) throw InvalidSchedule("index probabilities must sum to one");
    return IndexDistribution(Table{std::move(pmf)});
  }

  double pmf(std::uint64_t k) const {
    return std::visit(
        [k](const auto& d) -> double {
          using D = std::decay_t<decltype(d)>;
          if constexpr (std::is_same_v<D, Geometric>) {
            return (1.0 - d.p) * std::pow(d.p, static_cast<double>(k));
          } else if constexpr (std::is_same_v<D, Poisson>) {
            const double kk = static_cast<double>(k);
            return std::exp(kk * std::log(d.lambda) - d.lambda - std::lgamma(kk + 1.0));
          } else {
            return k < d.pmf.size() ? d.pmf[k] : 0.0;
          }
        },
        dist_);
  }

  std::uint64_t sample(Rng& rng) const {
    return std::visit(
        [&rng](const auto& d) -> std::uint64_t {
          using D = std::decay_t<decltype(d)>;
          if constexpr (std::is_same_v<D, Geometric>) {
            return geometric_count(rng, d.p);
          } else if constexpr (std::is_same_v<D, Poisson>) {
            return roulette::poisson(rng, d.lambda);
          } else {
            const double u = uniform01(rng);
            double cdf = 0.0;
            for (std::size_t k = 0; k < d.pmf.size(); ++k) {
              cdf += d.pmf[k];
              if (u < cdf) return k;
            }
            // u landed in the rounding gap above the accumulated cdf
            for (std::size_t k = d.pmf.size(); k-- > 0;)
              if (d.pmf[k] > 0.0) return k;
            return 0;
          }
        },
        dist_);
  }

 private:
  explicit IndexDistribution(std::variant<Geometric, Poisson, Table> d) : dist_(std::move(d)) {}
  std::variant<Geometric, Poisson, Table> dist_;
};

// Either form of unbiased truncation.
using Truncation = std::variant<RouletteSchedule, IndexDistribution>;

struct TruncationOutcome {
  double value = 0.0;
  std::size_t terms_used = 0;  // roulette: tau - 1; single term: the sampled index
  bool capped = false;
  std::vector<double> term_values;  // raw phi_j, filled only on request
};

namespace detail {

inline void check_weighted(double weighted, std::size_t j, double prob) {
  if (!std::isfinite(weighted)) {
    std::ostringstream os;
    os << "weighted series term " << j << " is not finite (inclusion probability " << prob << ")";
    throw EstimatorOverflow(os.str(), j, prob);
  }
}

}  // namespace detail

// Russian roulette: S_hat = phi_0 + sum_{j=1}^{tau-1} phi_j / P(term j kept).
// Term j survives the roulette iff U_1 < q_1, ..., U_j < q_j, so it is
// reweighted by prod_{l<=j} q_l = p_{j+1}; this makes E[S_hat] = S whenever
// the series converges absolutely.
template <TermStream Stream>
TruncationOutcome roulette_truncate(Stream&& stream, const RouletteSchedule& schedule, Rng& rng,
                                    bool record_terms = false) {
  TruncationOutcome out;
  CompensatedSum sum;
  const double phi0 = stream(std::size_t{0}, rng);
  detail::check_weighted(phi0, 0, 1.0);
  sum.add(phi0);
  if (record_terms) out.term_values.push_back(phi0);

  double kept = 1.0;
  for (std::size_t j = 1;; ++j) {
    if (out.terms_used >= schedule.safety_cap()) {
      out.capped = true;
      std::ostringstream os;
      os << "roulette truncation hit the safety cap of " << schedule.safety_cap()
         << " terms; the returned estimate is biased";
      log::warning(os.str());
      break;
    }
    const double q = schedule.continuation(j);
    if (uniform01(rng) >= q) break;
    kept *= q;
    const double phi = stream(j, rng);
    if (record_terms) out.term_values.push_back(phi);
    const double weighted = phi / kept;
    detail::check_weighted(weighted, j, kept);
    sum.add(weighted);
    ++out.terms_used;
  }
  out.value = sum.value();
  detail::check_weighted(out.value, out.terms_used, kept);
  return out;
}

// Single-term weighted truncation: draw k ~ q_k, return phi_k / q_k.
template <TermStream Stream>
TruncationOutcome single_term_truncate(Stream&& stream, const IndexDistribution& index, Rng& rng,
                                       bool record_terms = false) {
  TruncationOutcome out;
  const std::uint64_t k = index.sample(rng);
  const double qk = index.pmf(k);
  if (!(qk > 0.0)) {
    std::ostringstream os;
    os << "sampled truncation index " << k << " has zero probability";
    throw InvalidSchedule(os.str());
  }
  double phi = 0.0;
  for (std::size_t j = 0; j <= k; ++j) {
    phi = stream(j, rng);
    if (record_terms) out.term_values.push_back(phi);
  }
  out.value = phi / qk;
  out.terms_used = static_cast<std::size_t>(k);
  detail::check_weighted(out.value, out.terms_used, qk);
  return out;
}

template <TermStream Stream>
TruncationOutcome truncate(Stream&& stream, const Truncation& how, Rng& rng, bool record_terms = false) {
  if (const auto* schedule = std::get_if<RouletteSchedule>(&how))
    return roulette_truncate(std::forward<Stream>(stream), *schedule, rng, record_terms);
  return single_term_truncate(std::forward<Stream>(stream), std::get<IndexDistribution>(how), rng, record_terms);
}

// E[tau] truncated at `horizon`: sum_{n=1}^{horizon} p_n.
inline double expected_cost(const RouletteSchedule& schedule, std::size_t horizon) {
  double total = 0.0;
  double p = 1.0;
  for (std::size_t n = 1; n <= horizon; ++n) {
    total += p;
    p *= schedule.continuation(n);
  }
  return total;
}

}  // namespace roulette
