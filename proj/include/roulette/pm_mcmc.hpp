#pragma once

// Signed pseudo-marginal Metropolis-Hastings on the absolute measure.

#include <chrono>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <functional>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "roulette/error.hpp"
#include "roulette/log.hpp"
#include "roulette/random.hpp"
#include "roulette/signed_value.hpp"

namespace roulette {

using Theta = std::vector<double>;

struct ChainRecord {
  Theta theta;
  double log_abs_estimate = 0.0;
  int sign = 1;
  bool accepted = false;
  std::size_t n_terms = 0;
  std::size_t n_normalizer_draws = 0;
  std::optional<double> aux_nu;
  // log q(nu | theta) for estimators that carry a refreshed auxiliary
  // variable; it enters the Hastings ratio of the joint (theta, nu) chain.
  double log_aux_density = 0.0;
  bool capped = false;
};

// One estimate of the likelihood at a parameter point.
struct LikelihoodEstimate {
  SignedValue value;
  std::size_t n_terms = 0;
  std::size_t n_normalizer_draws = 0;
  bool capped = false;
  std::optional<double> aux_nu;
  double log_aux_density = 0.0;
};

template <class E>
concept LikelihoodEstimator = requires(E& e, const Theta& theta, Rng& rng) {
  { e(theta, rng) } -> std::same_as<LikelihoodEstimate>;
};

template <class P>
concept LogPrior = requires(const P& p, const Theta& theta) {
  { p(theta) } -> std::convertible_to<double>;
};

// theta' = theta + scale * N(0, I). Symmetric, so log_density cancels.
struct GaussianRandomWalk {
  std::vector<double> scale;

  Theta propose(const Theta& from, Rng& rng) const {
    Theta to(from);
    for (std::size_t i = 0; i < to.size(); ++i) to[i] += scale[i % scale.size()] * standard_normal(rng);
    return to;
  }

  double log_density(const Theta&, const Theta&) const { return 0.0; }
};

// Product of independent uniform priors on boxes.
struct BoxPrior {
  std::vector<double> lower;
  std::vector<double> upper;

  double operator()(const Theta& theta) const {
    double lp = 0.0;
    for (std::size_t i = 0; i < theta.size(); ++i) {
      if (!(theta[i] >= lower[i] && theta[i] <= upper[i])) return -std::numeric_limits<double>::infinity();
      lp -= std::log(upper[i] - lower[i]);
    }
    return lp;
  }
};

inline ChainRecord record_from(const Theta& theta, const LikelihoodEstimate& e, bool accepted) {
  ChainRecord r;
  r.theta = theta;
  r.log_abs_estimate = e.value.log_magnitude;
  r.sign = e.value.sign;
  r.accepted = accepted;
  r.n_terms = e.n_terms;
  r.n_normalizer_draws = e.n_normalizer_draws;
  r.aux_nu = e.aux_nu;
  r.log_aux_density = e.log_aux_density;
  r.capped = e.capped;
  return r;
}

// Log acceptance ratio of the absolute-measure kernel. Signs never enter.
inline double pm_log_accept_ratio(const ChainRecord& current, double log_prior_current, const ChainRecord& fresh,
                                  double log_prior_fresh, double log_q_forward, double log_q_backward) {
  const double num = fresh.log_abs_estimate - fresh.log_aux_density + log_prior_fresh + log_q_backward;
  const double den = current.log_abs_estimate - current.log_aux_density + log_prior_current + log_q_forward;
  if (num == -std::numeric_limits<double>::infinity()) return num;
  return num - den;
}

// One pseudo-marginal MH step. On rejection the retained estimate is copied
// forward unchanged.
template <class Proposal, LogPrior Prior, LikelihoodEstimator Estimator>
ChainRecord pm_mh_step(const ChainRecord& current, const Proposal& proposal, const Prior& prior, Estimator& estimator,
                       Rng& rng) {
  const Theta theta_new = proposal.propose(current.theta, rng);
  const double lp_new = prior(theta_new);
  ChainRecord kept = current;
  kept.accepted = false;
  if (lp_new == -std::numeric_limits<double>::infinity()) return kept;
  const ChainRecord fresh = record_from(theta_new, estimator(theta_new, rng), true);
  if (fresh.sign == 0) log::info("zero likelihood estimate at a proposal; rejected");
  const double log_alpha = pm_log_accept_ratio(current, prior(current.theta), fresh, lp_new,
                                               proposal.log_density(theta_new, current.theta),
                                               proposal.log_density(current.theta, theta_new));
  if (std::isnan(log_alpha)) throw EstimatorOverflow("acceptance ratio is NaN", 0, log_alpha);
  if (log_alpha >= 0.0 || std::log(uniform01(rng)) < log_alpha) return fresh;
  return kept;
}

// Offset of the Robbins-Monro gain (it + offset)^-0.6 that tunes the
// proposal scale during burn-in.
inline constexpr double kAdaptOffset = 20.0;

struct ChainOptions {
  std::size_t n_iters = 0;
  std::size_t burn_in = 0;
  bool adapt = true;
  double target_accept = 0.4;
  // Called after every iteration, e.g. to stream records to disk.
  std::function<void(std::size_t, const ChainRecord&)> on_record;
};

struct ChainMetadata {
  std::size_t n_iters = 0;
  std::size_t burn_in = 0;
  std::size_t negative_count = 0;
  std::size_t zero_count = 0;
  std::size_t capped_count = 0;
  std::size_t accepted_count = 0;
  std::size_t accepted_after_burn_in = 0;
  std::size_t total_normalizer_draws = 0;
  std::size_t init_resamples = 0;
  std::vector<double> final_scale;
  double wall_time_s = 0.0;
};

struct ChainResult {
  std::vector<ChainRecord> records;
  ChainMetadata metadata;
};

// Raised when a step fails part-way through a run. Carries everything
// needed to flush the partial chain and restart from the last record.
class ChainAborted : public Error {
 public:
  ChainAborted(const std::string& what, std::size_t iteration, ChainResult partial, std::string rng_state,
               std::exception_ptr cause)
      : Error(what), iteration_(iteration), partial_(std::move(partial)), rng_state_(std::move(rng_state)),
        cause_(std::move(cause)) {}

  std::size_t iteration() const { return iteration_; }
  const ChainResult& partial() const { return partial_; }
  const std::string& rng_state() const { return rng_state_; }
  std::exception_ptr cause() const { return cause_; }

 private:
  std::size_t iteration_;
  ChainResult partial_;
  std::string rng_state_;
  std::exception_ptr cause_;
};

// Generic driver: step(current, proposal, rng) -> next record. The proposal
// scale follows a Robbins-Monro recursion on log scale during burn-in and is
// frozen afterwards.
template <class Step>
ChainResult run_kernel(ChainRecord init, GaussianRandomWalk& proposal, Step&& step, const ChainOptions& options,
                       Rng& rng) {
  if (options.n_iters > 0 && options.burn_in >= options.n_iters)
    throw InvalidSchedule("burn-in must be shorter than the chain");
  const auto start = std::chrono::steady_clock::now();
  ChainResult out;
  out.records.reserve(options.n_iters);
  auto& meta = out.metadata;
  meta.n_iters = options.n_iters;
  meta.burn_in = options.burn_in;
  ChainRecord current = std::move(init);
  for (std::size_t it = 0; it < options.n_iters; ++it) {
    try {
      current = step(current, proposal, rng);
    } catch (const std::exception& e) {
      meta.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      meta.final_scale = proposal.scale;
      std::ostringstream state;
      state << rng;
      std::ostringstream msg;
      msg << "chain aborted at iteration " << it << ": " << e.what();
      throw ChainAborted(msg.str(), it, std::move(out), state.str(), std::current_exception());
    }
    if (options.adapt && it < options.burn_in) {
      const double gain = std::pow(static_cast<double>(it) + kAdaptOffset, -0.6);
      const double step_size = std::exp(gain * ((current.accepted ? 1.0 : 0.0) - options.target_accept));
      for (auto& s : proposal.scale) s *= step_size;
    }
    if (current.sign < 0) ++meta.negative_count;
    if (current.sign == 0) ++meta.zero_count;
    if (current.accepted) {
      ++meta.accepted_count;
      if (it >= options.burn_in) ++meta.accepted_after_burn_in;
      if (current.capped) ++meta.capped_count;
      meta.total_normalizer_draws += current.n_normalizer_draws;
    }
    out.records.push_back(current);
    if (options.on_record) options.on_record(it, out.records.back());
  }
  meta.final_scale = proposal.scale;
  meta.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return out;
}

// Pseudo-marginal chain from theta0. A zero initial estimate is redrawn once
// with fresh randomness.
template <LogPrior Prior, LikelihoodEstimator Estimator>
ChainResult run_chain(const Theta& theta0, GaussianRandomWalk& proposal, const Prior& prior, Estimator& estimator,
                      const ChainOptions& options, Rng& rng) {
  if (prior(theta0) == -std::numeric_limits<double>::infinity())
    throw InvalidSchedule("initial parameter has zero prior density");
  if (options.n_iters == 0) {
    ChainResult empty;
    empty.metadata.final_scale = proposal.scale;
    return empty;
  }
  std::size_t resamples = 0;
  LikelihoodEstimate e0 = estimator(theta0, rng);
  if (e0.value.sign == 0) {
    log::warning("initial likelihood estimate is zero; redrawing once");
    ++resamples;
    e0 = estimator(theta0, rng);
    if (e0.value.sign == 0) throw DegenerateSign("initial likelihood estimate is zero twice in a row");
  }
  auto step = [&](const ChainRecord& cur, GaussianRandomWalk& prop, Rng& r) {
    return pm_mh_step(cur, prop, prior, estimator, r);
  };
  ChainResult out = run_kernel(record_from(theta0, e0, true), proposal, step, options, rng);
  out.metadata.init_resamples = resamples;
  out.metadata.total_normalizer_draws += e0.n_normalizer_draws;
  return out;
}

}  // namespace roulette
