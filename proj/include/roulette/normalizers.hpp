#pragma once

// Unbiased positive estimators of a partition function, returned in log
// space: annealed importance sampling, a tempered SMC sampler, and plain
// importance sampling.

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <sstream>
#include <vector>

#include "roulette/error.hpp"
#include "roulette/estimators.hpp"
#include "roulette/random.hpp"
#include "roulette/worker_pool.hpp"

namespace roulette {

// A target that can be annealed from a base distribution with known
// normalizer along the geometric path f^b, b in [0, 1].
template <class T>
concept AnnealableTarget = requires(const T& t, typename T::State& s, Rng& rng, double b) {
  typename T::Kernel;
  { t.sample_base(rng) } -> std::same_as<typename T::State>;
  { t.log_base_normalizer() } -> std::convertible_to<double>;
  { t.log_density(s) } -> std::convertible_to<double>;
  { t.kernel(b) } -> std::same_as<typename T::Kernel>;
  requires requires(const typename T::Kernel& k) { k.apply(s, rng); };
};

// Equally spaced inverse temperatures b_t = t / n_temps, t = 0..n_temps.
struct AnnealingLadder {
  std::size_t n_temps = 1000;
  std::size_t n_samples = 100;
  std::size_t updates_per_temp = 1;

  double beta(std::size_t t) const { return static_cast<double>(t) / static_cast<double>(n_temps); }

  void validate() const {
    if (n_temps < 1) throw InvalidSchedule("annealing ladder needs at least one temperature step");
    if (n_samples < 1) throw InvalidSchedule("annealing ladder needs at least one sample");
  }
};

namespace detail {

inline void check_log_weight(double lw, std::size_t particle, std::size_t temp) {
  if (std::isnan(lw) || lw == std::numeric_limits<double>::infinity()) {
    std::ostringstream os;
    os << "importance weight of particle " << particle << " at temperature " << temp << " is not finite";
    throw EstimatorOverflow(os.str(), particle, static_cast<double>(temp));
  }
}

template <class Target>
std::vector<typename Target::Kernel> ladder_kernels(const Target& target, const AnnealingLadder& ladder) {
  std::vector<typename Target::Kernel> kernels;
  kernels.reserve(ladder.n_temps);
  for (std::size_t t = 0; t < ladder.n_temps; ++t) kernels.push_back(target.kernel(ladder.beta(t)));
  return kernels;
}

}  // namespace detail

// AIS draws of log Z_hat at one parameter point. The transition kernels for
// every rung are built once, so repeated draws at the same point are cheap.
template <AnnealableTarget Target>
class AisSource {
 public:
  AisSource(Target target, AnnealingLadder ladder, WorkerPool* pool = nullptr)
      : target_(std::move(target)), ladder_(ladder), pool_(pool) {
    ladder_.validate();
    kernels_ = detail::ladder_kernels(target_, ladder_);
  }

  const AnnealingLadder& ladder() const { return ladder_; }

  // One unbiased estimate: log of the mean AIS weight plus log Z_0.
  double operator()(Rng& rng) const {
    const std::uint64_t seed = rng();
    std::vector<double> log_weights(ladder_.n_samples);
    auto particle = [&](std::size_t i) {
      Rng prng = make_stream(seed, "particle", i);
      auto x = target_.sample_base(prng);
      double lw = 0.0;
      for (std::size_t t = 1; t <= ladder_.n_temps; ++t) {
        lw += (ladder_.beta(t) - ladder_.beta(t - 1)) * target_.log_density(x);
        detail::check_log_weight(lw, i, t);
        if (t < ladder_.n_temps)
          for (std::size_t u = 0; u < ladder_.updates_per_temp; ++u) kernels_[t].apply(x, prng);
      }
      log_weights[i] = lw;
    };
    if (pool_) {
      pool_->parallel_for(ladder_.n_samples, particle);
    } else {
      for (std::size_t i = 0; i < ladder_.n_samples; ++i) particle(i);
    }
    return target_.log_base_normalizer() + log_mean_exp(log_weights);
  }

 private:
  Target target_;
  AnnealingLadder ladder_;
  WorkerPool* pool_;
  std::vector<typename Target::Kernel> kernels_;
};

template <AnnealableTarget Target>
double ais_partition_estimate(const Target& target, const AnnealingLadder& ladder, Rng& rng) {
  return AisSource<Target>(target, ladder)(rng);
}

struct SmcStats {
  std::size_t resample_events = 0;
};

// Tempered SMC with multinomial resampling whenever the particle ESS drops
// below resample_threshold * n_particles. Particle i keeps its own random
// substream across resampling, so with a zero threshold the computation is
// operation-for-operation the AIS estimator with the same ladder.
template <AnnealableTarget Target>
class SmcSource {
 public:
  SmcSource(Target target, AnnealingLadder ladder, double resample_threshold, WorkerPool* pool = nullptr)
      : target_(std::move(target)), ladder_(ladder), threshold_(resample_threshold), pool_(pool) {
    ladder_.validate();
    if (ladder_.n_samples < 2) throw InvalidSchedule("SMC needs at least two particles");
    if (!(threshold_ >= 0.0 && threshold_ <= 1.0)) throw InvalidSchedule("resample threshold must lie in [0, 1]");
    kernels_ = detail::ladder_kernels(target_, ladder_);
  }

  double operator()(Rng& rng, SmcStats* stats = nullptr) const {
    const std::uint64_t seed = rng();
    const std::size_t n = ladder_.n_samples;
    using State = typename Target::State;
    std::vector<Rng> rngs;
    std::vector<State> xs;
    rngs.reserve(n);
    xs.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
      rngs.push_back(make_stream(seed, "particle", i));
      xs.push_back(target_.sample_base(rngs.back()));
    }
    Rng resample_rng = make_stream(seed, "resample");
    std::vector<double> lw(n, 0.0);
    double log_z = 0.0;

    for (std::size_t t = 1; t <= ladder_.n_temps; ++t) {
      const double db = ladder_.beta(t) - ladder_.beta(t - 1);
      for (std::size_t i = 0; i < n; ++i) {
        lw[i] += db * target_.log_density(xs[i]);
        detail::check_log_weight(lw[i], i, t);
      }
      if (t == ladder_.n_temps) break;
      if (threshold_ > 0.0 && ess(lw) < threshold_ * static_cast<double>(n)) {
        log_z += stage_log_mean(lw, t);
        resample(xs, lw, resample_rng);
        if (stats) ++stats->resample_events;
      }
      auto move = [&](std::size_t i) {
        for (std::size_t u = 0; u < ladder_.updates_per_temp; ++u) kernels_[t].apply(xs[i], rngs[i]);
      };
      if (pool_) {
        pool_->parallel_for(n, move);
      } else {
        for (std::size_t i = 0; i < n; ++i) move(i);
      }
    }
    log_z += stage_log_mean(lw, ladder_.n_temps);
    return target_.log_base_normalizer() + log_z;
  }

 private:
  static double ess(const std::vector<double>& lw) {
    const double m = *std::max_element(lw.begin(), lw.end());
    if (m == -std::numeric_limits<double>::infinity()) return 0.0;
    double s = 0.0, s2 = 0.0;
    for (double v : lw) {
      const double w = std::exp(v - m);
      s += w;
      s2 += w * w;
    }
    return s * s / s2;
  }

  static double stage_log_mean(const std::vector<double>& lw, std::size_t t) {
    const double v = log_mean_exp(lw);
    if (v == -std::numeric_limits<double>::infinity()) {
      std::ostringstream os;
      os << "all SMC weights are zero at temperature " << t;
      throw DegenerateSource(os.str());
    }
    return v;
  }

  template <class State>
  static void resample(std::vector<State>& xs, std::vector<double>& lw, Rng& rng) {
    const std::size_t n = xs.size();
    const double m = *std::max_element(lw.begin(), lw.end());
    std::vector<double> cdf(n);
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) cdf[i] = total += std::exp(lw[i] - m);
    std::vector<State> next;
    next.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
      const double u = uniform01(rng) * total;
      auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
      next.push_back(xs[std::min<std::size_t>(static_cast<std::size_t>(it - cdf.begin()), n - 1)]);
    }
    xs = std::move(next);
    std::fill(lw.begin(), lw.end(), 0.0);
  }

  Target target_;
  AnnealingLadder ladder_;
  double threshold_;
  WorkerPool* pool_;
  std::vector<typename Target::Kernel> kernels_;
};

template <AnnealableTarget Target>
double smc_partition_estimate(const Target& target, const AnnealingLadder& ladder, double resample_threshold,
                              Rng& rng, SmcStats* stats = nullptr) {
  return SmcSource<Target>(target, ladder, resample_threshold)(rng, stats);
}

// Importance proposal: sample(rng) -> X and log_density(X) -> log g(X).
template <class P>
concept ImportanceProposal = requires(const P& p, Rng& rng) {
  { p.log_density(p.sample(rng)) } -> std::convertible_to<double>;
};

// log of (1/n) sum_i f(x_i) / g(x_i), x_i ~ g.
template <class LogDensity, ImportanceProposal Proposal>
double is_partition_estimate(const LogDensity& unnorm_logdensity, const Proposal& proposal, std::size_t n, Rng& rng) {
  if (n < 1) throw InvalidSchedule("importance sampling needs at least one sample");
  std::vector<double> log_ratios(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto x = proposal.sample(rng);
    const double lr = static_cast<double>(unnorm_logdensity(x)) - static_cast<double>(proposal.log_density(x));
    if (std::isnan(lr) || lr == std::numeric_limits<double>::infinity()) {
      std::ostringstream os;
      os << "importance ratio of sample " << i << " is not finite";
      throw EstimatorOverflow(os.str(), i, lr);
    }
    log_ratios[i] = lr;
  }
  return log_mean_exp(log_ratios);
}

}  // namespace roulette
