#pragma once

#include <cmath>
#include <cstddef>
#include <limits>

#include "roulette/error.hpp"
#include "roulette/ising/lattice.hpp"
#include "roulette/ising/samplers.hpp"
#include "roulette/pm_mcmc.hpp"
#include "roulette/random.hpp"

namespace roulette::ising {

enum class IsingParam { alpha, beta };

// Maps a scalar parameter onto IsingParams with the other component fixed.
struct ParamMap {
  IsingParam which = IsingParam::beta;
  IsingParams fixed;

  IsingParams operator()(const Theta& theta) const {
    IsingParams p = fixed;
    (which == IsingParam::alpha ? p.alpha : p.beta) = theta.at(0);
    return p;
  }
};

struct ExchangeSampler {
  enum class Kind { exact_cftp, exact_cluster_cftp, gibbs };
  Kind kind = Kind::exact_cftp;
  std::size_t gibbs_steps = 50000;  // single-site updates, started from the data
  CftpOptions cftp;
};

// log of f(y; t') f(x; t) / (f(y; t) f(x; t')).
inline double exchange_log_ratio(const IsingLattice& data, const IsingLattice& aux, const IsingParams& current,
                                 const IsingParams& proposed) {
  // Grouped by parameter difference so that proposed == current gives exactly 0.
  return (proposed.alpha - current.alpha) * static_cast<double>(data.sum_spins() - aux.sum_spins()) +
         (proposed.beta - current.beta) * static_cast<double>(data.sum_pairs() - aux.sum_pairs());
}

inline IsingLattice exchange_auxiliary(const IsingLattice& data, const IsingParams& p, const ExchangeSampler& sampler,
                                       Rng& rng) {
  if (sampler.kind == ExchangeSampler::Kind::exact_cftp) return cftp_sample(data.side(), p, rng, sampler.cftp);
  if (sampler.kind == ExchangeSampler::Kind::exact_cluster_cftp)
    return cluster_cftp_sample(data.side(), p, rng, sampler.cftp);
  IsingLattice x = data;
  return gibbs_sweep(x, p, sampler.gibbs_steps, rng);
}

// One exchange-algorithm update. The record carries sign +1 and a zero
// log estimate; the exchange chain has no likelihood estimate.
template <class Proposal, LogPrior Prior>
ChainRecord exchange_step(const ChainRecord& current, const IsingLattice& data, const ParamMap& map,
                          const ExchangeSampler& sampler, const Proposal& proposal, const Prior& prior, Rng& rng) {
  ChainRecord next = current;
  next.accepted = false;
  next.sign = 1;
  next.log_abs_estimate = 0.0;
  next.n_terms = 0;
  next.n_normalizer_draws = 0;
  const Theta theta_new = proposal.propose(current.theta, rng);
  const double lp_new = prior(theta_new);
  if (lp_new == -std::numeric_limits<double>::infinity()) return next;
  const IsingParams p_cur = map(current.theta);
  const IsingParams p_new = map(theta_new);
  const IsingLattice x = exchange_auxiliary(data, p_new, sampler, rng);
  const double log_alpha = exchange_log_ratio(data, x, p_cur, p_new) + lp_new - prior(current.theta) +
                           proposal.log_density(current.theta, theta_new) -
                           proposal.log_density(theta_new, current.theta);
  if (log_alpha >= 0.0 || std::log(uniform01(rng)) < log_alpha) {
    next.theta = theta_new;
    next.accepted = true;
  }
  return next;
}

}  // namespace roulette::ising
