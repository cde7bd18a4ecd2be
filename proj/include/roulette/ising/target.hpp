#pragma once

#include <cmath>
#include <cstddef>

#include "roulette/ising/lattice.hpp"
#include "roulette/random.hpp"

namespace roulette::ising {

// Ising model as an annealing target: the base is uniform over spins
// (Z_0 = 2^(N^2)) and the tempered kernel at b is heat-bath at b * params.
struct IsingTarget {
  using State = IsingLattice;
  using Kernel = HeatBath;

  std::size_t n = 0;
  IsingParams params;

  State sample_base(Rng& rng) const { return IsingLattice::uniform(n, rng); }
  double log_base_normalizer() const { return static_cast<double>(n * n) * std::log(2.0); }
  double log_density(const State& x) const { return unnorm_loglik(x, params); }
  Kernel kernel(double b) const { return HeatBath(IsingParams{b * params.alpha, b * params.beta}); }
};

}  // namespace roulette::ising
