#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <sstream>
#include <vector>

#include "roulette/error.hpp"
#include "roulette/estimators.hpp"
#include "roulette/random.hpp"

namespace roulette {

// Tilting plans on a 1-D grid over a parameter interval. Node k is built
// from its own RNG substream the first time it is needed, so the plan at any
// theta is a fixed function of theta and the table seed, independent of the
// order in which the chain visits the grid.
//
// Between nodes log Z_tilde is interpolated linearly; c and q come from the
// more conservative neighbour (smaller c, larger q).
//
// With a log_bound function, Z_tilde is that certified upper bound at theta
// and c = 1; the pilot draws then only set q.
class PilotTable {
 public:
  using SourceAt = std::function<double(double theta, Rng& rng)>;
  using LogBound = std::function<double(double theta)>;

  struct Entry {
    TiltingPlan plan;
    double q = 0.5;
  };

  PilotTable(double lower, double upper, std::size_t nodes, std::size_t pilot_draws, TiltingOptions tilting,
             QRule q_rule, std::uint64_t seed, SourceAt source, LogBound log_bound = {})
      : lower_(lower), upper_(upper), nodes_(nodes), pilot_draws_(pilot_draws), tilting_(tilting), q_rule_(q_rule),
        seed_(seed), source_(std::move(source)), log_bound_(std::move(log_bound)), cache_(nodes) {
    if (!(upper > lower) || nodes < 2) throw InvalidSchedule("pilot grid needs an interval and at least two nodes");
  }

  double node_theta(std::size_t k) const {
    return lower_ + (upper_ - lower_) * static_cast<double>(k) / static_cast<double>(nodes_ - 1);
  }

  const Entry& node(std::size_t k) {
    if (!cache_[k]) {
      Rng rng = make_stream(seed_, "pilot", k);
      const double theta = node_theta(k);
      auto src = [&](Rng& r) { return source_(theta, r); };
      Entry e;
      if (log_bound_) {
        std::vector<double> draws;
        for (std::size_t i = 0; i < pilot_draws_; ++i) draws.push_back(src(rng));
        const PilotStats stats = pilot_stats(draws);
        const double shift = std::exp(stats.log_mean - log_bound_(theta));
        e.plan.log_z_tilde = log_bound_(theta);
        e.plan.c = 1.0;
        e.plan.pilot_mean_ratio = stats.mean_ratio * shift;
        e.plan.pilot_second_moment = stats.second_moment * shift * shift;
        e.plan.pilot_draws = stats.draws;
      } else {
        e.plan = choose_tilting(src, pilot_draws_, tilting_, rng);
      }
      e.q = suggest_q(e.plan, q_rule_);
      cache_[k] = e;
    }
    return *cache_[k];
  }

  Entry at(double theta) {
    if (!(theta >= lower_ && theta <= upper_)) {
      std::ostringstream os;
      os << "parameter " << theta << " is outside the pilot grid [" << lower_ << ", " << upper_ << "]";
      throw InvalidSchedule(os.str());
    }
    const double pos = (theta - lower_) / (upper_ - lower_) * static_cast<double>(nodes_ - 1);
    const auto k = std::min(static_cast<std::size_t>(pos), nodes_ - 2);
    const double t = pos - static_cast<double>(k);
    const Entry& a = node(k);
    const Entry& b = node(k + 1);
    Entry out = a.plan.c <= b.plan.c ? a : b;
    out.plan.log_z_tilde = log_bound_ ? log_bound_(theta) : (1.0 - t) * a.plan.log_z_tilde + t * b.plan.log_z_tilde;
    out.q = std::max(a.q, b.q);
    return out;
  }

  std::size_t built_nodes() const {
    return static_cast<std::size_t>(std::count_if(cache_.begin(), cache_.end(), [](const auto& e) { return e.has_value(); }));
  }

 private:
  double lower_, upper_;
  std::size_t nodes_;
  std::size_t pilot_draws_;
  TiltingOptions tilting_;
  QRule q_rule_;
  std::uint64_t seed_;
  SourceAt source_;
  LogBound log_bound_;
  std::vector<std::optional<Entry>> cache_;
};

}  // namespace roulette
