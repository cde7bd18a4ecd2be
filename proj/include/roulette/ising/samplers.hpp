#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <sstream>
#include <utility>
#include <vector>

#include "roulette/error.hpp"
#include "roulette/ising/lattice.hpp"
#include "roulette/random.hpp"

namespace roulette::ising {

// n_updates heat-bath updates at uniformly random sites.
inline IsingLattice& gibbs_sweep(IsingLattice& x, const IsingParams& p, std::size_t n_updates, Rng& rng) {
  const HeatBath kernel(p);
  for (std::size_t k = 0; k < n_updates; ++k) kernel.apply(x, rng);
  return x;
}

struct CftpOptions {
  // Longest backward horizon tried, in sweeps of N^2 updates.
  std::uint64_t max_sweeps = std::uint64_t{1} << 20;
};

struct CftpStats {
  std::uint64_t sweeps = 0;  // horizon at which the sandwich coalesced
  int epochs = 0;
};

// Monotone coupling from the past with heat-bath updates. The upper (all +1)
// and lower (all -1) chains share the same (site, uniform) pairs, and the
// horizon doubles until they meet at time 0. The random numbers for the
// block of times [-T0 2^k, -T0 2^(k-1)) come from their own substream and are
// replayed on every later epoch.
inline IsingLattice cftp_sample(std::size_t n, const IsingParams& p, Rng& rng, const CftpOptions& options = {},
                                CftpStats* stats = nullptr) {
  if (p.beta < 0.0) throw UnsupportedRegime("monotone CFTP needs a ferromagnetic coupling (beta >= 0)");
  if (n == 0) throw SizeError("lattice side must be positive");
  const std::uint64_t seed = rng();
  const HeatBath kernel(p);
  const std::uint64_t steps_per_sweep = n * n;

  auto run_block = [&](int block, std::uint64_t sweeps, IsingLattice& upper, IsingLattice& lower) {
    Rng brng = make_stream(seed, "cftp-block", static_cast<std::uint64_t>(block));
    const std::uint64_t steps = sweeps * steps_per_sweep;
    for (std::uint64_t s = 0; s < steps; ++s) {
      const auto i = static_cast<std::size_t>(uniform_index(brng, steps_per_sweep));
      const double u = uniform01(brng);
      upper.set(i, kernel.spin_for(upper.local_field(i), u));
      lower.set(i, kernel.spin_for(lower.local_field(i), u));
    }
  };

  for (int epoch = 0;; ++epoch) {
    const std::uint64_t horizon = std::uint64_t{1} << epoch;
    if (horizon > options.max_sweeps) {
      std::ostringstream os;
      os << "CFTP did not coalesce within " << options.max_sweeps << " sweeps (beta " << p.beta << ")";
      throw CftpFailure(os.str());
    }
    IsingLattice upper(n, 1);
    IsingLattice lower(n, -1);
    for (int block = epoch; block >= 0; --block) {
      const std::uint64_t sweeps = block == 0 ? 1 : (std::uint64_t{1} << (block - 1));
      run_block(block, sweeps, upper, lower);
    }
    if (upper == lower) {
      if (stats) {
        stats->sweeps = horizon;
        stats->epochs = epoch + 1;
      }
      return upper;
    }
  }
}

// Monotone coupling from the past on the random-cluster (Fortuin-Kasteleyn)
// representation with q = 2. A bond with weight p is opened with probability
// p when its ends are already joined through other open bonds and p / (2 - p)
// otherwise; the update is monotone in the bond set, so chains started from
// all bonds open and all bonds closed sandwich every other start. A field
// adds a ghost vertex bonded to every site with p = 1 - exp(-2 |alpha|). After
// coalescence the ghost's cluster takes sign(alpha) and every other cluster
// an independent fair sign. Block substreams are replayed as in cftp_sample;
// one sweep is one update per bond.
inline IsingLattice cluster_cftp_sample(std::size_t n, const IsingParams& p, Rng& rng, const CftpOptions& options = {},
                                        CftpStats* stats = nullptr) {
  if (p.beta < 0.0) throw UnsupportedRegime("monotone CFTP needs a ferromagnetic coupling (beta >= 0)");
  if (n == 0) throw SizeError("lattice side must be positive");
  const std::uint64_t seed = rng();
  const auto geometry = Geometry::of(n);
  const std::size_t sites = n * n;
  const bool ghost = p.alpha != 0.0;
  const std::size_t vertices = sites + (ghost ? 1 : 0);

  std::vector<std::pair<std::uint32_t, std::uint32_t>> bonds;
  std::vector<double> open_if_joined, open_if_apart;
  auto add_bond = [&](std::size_t a, std::size_t b, double weight) {
    bonds.emplace_back(static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(b));
    open_if_joined.push_back(weight);
    open_if_apart.push_back(weight / (2.0 - weight));
  };
  const double w_pair = -std::expm1(-2.0 * p.beta);
  for (std::size_t i = 0; i < sites; ++i) {
    add_bond(i, geometry->right(i), w_pair);
    add_bond(i, geometry->down(i), w_pair);
  }
  if (ghost)
    for (std::size_t i = 0; i < sites; ++i) add_bond(i, sites, -std::expm1(-2.0 * std::fabs(p.alpha)));
  std::vector<std::vector<std::uint32_t>> incident(vertices);
  for (std::size_t e = 0; e < bonds.size(); ++e) {
    incident[bonds[e].first].push_back(static_cast<std::uint32_t>(e));
    incident[bonds[e].second].push_back(static_cast<std::uint32_t>(e));
  }

  std::vector<std::uint32_t> mark(vertices, 0), queue(vertices);
  std::uint32_t stamp = 0;
  // Whether the ends of bond `skip` are joined through other open bonds.
  auto joined = [&](const std::vector<char>& open, std::size_t skip) {
    const auto [a, b] = bonds[skip];
    if (a == b) return true;
    ++stamp;
    std::size_t head = 0, tail = 0;
    queue[tail++] = a;
    mark[a] = stamp;
    while (head < tail) {
      const std::uint32_t v = queue[head++];
      for (std::uint32_t e : incident[v]) {
        if (e == skip || !open[e]) continue;
        const std::uint32_t w = bonds[e].first == v ? bonds[e].second : bonds[e].first;
        if (w == b) return true;
        if (mark[w] != stamp) {
          mark[w] = stamp;
          queue[tail++] = w;
        }
      }
    }
    return false;
  };

  const std::uint64_t steps_per_sweep = bonds.size();
  auto run_block = [&](int block, std::uint64_t sweeps, std::vector<char>& upper, std::vector<char>& lower) {
    Rng brng = make_stream(seed, "cluster-cftp-block", static_cast<std::uint64_t>(block));
    const std::uint64_t steps = sweeps * steps_per_sweep;
    for (std::uint64_t s = 0; s < steps; ++s) {
      const auto e = static_cast<std::size_t>(uniform_index(brng, steps_per_sweep));
      const double u = uniform01(brng);
      upper[e] = u < (joined(upper, e) ? open_if_joined[e] : open_if_apart[e]);
      lower[e] = u < (joined(lower, e) ? open_if_joined[e] : open_if_apart[e]);
    }
  };

  for (int epoch = 0;; ++epoch) {
    const std::uint64_t horizon = std::uint64_t{1} << epoch;
    if (horizon > options.max_sweeps) {
      std::ostringstream os;
      os << "cluster CFTP did not coalesce within " << options.max_sweeps << " sweeps (beta " << p.beta << ")";
      throw CftpFailure(os.str());
    }
    std::vector<char> upper(bonds.size(), 1), lower(bonds.size(), 0);
    for (int block = epoch; block >= 0; --block) {
      const std::uint64_t sweeps = block == 0 ? 1 : (std::uint64_t{1} << (block - 1));
      run_block(block, sweeps, upper, lower);
    }
    if (upper != lower) continue;
    if (stats) {
      stats->sweeps = horizon;
      stats->epochs = epoch + 1;
    }
    Rng srng = make_stream(seed, "cluster-cftp-spins");
    std::vector<std::int8_t> spin(vertices, 0);
    auto paint = [&](std::size_t root, std::int8_t s) {
      std::size_t head = 0, tail = 0;
      queue[tail++] = static_cast<std::uint32_t>(root);
      spin[root] = s;
      while (head < tail) {
        const std::uint32_t v = queue[head++];
        for (std::uint32_t e : incident[v]) {
          if (!upper[e]) continue;
          const std::uint32_t w = bonds[e].first == v ? bonds[e].second : bonds[e].first;
          if (spin[w] == 0) {
            spin[w] = s;
            queue[tail++] = w;
          }
        }
      }
    };
    if (ghost) paint(sites, p.alpha > 0.0 ? 1 : -1);
    for (std::size_t i = 0; i < sites; ++i)
      if (spin[i] == 0) paint(i, uniform01(srng) < 0.5 ? 1 : -1);
    spin.resize(sites);
    return IsingLattice(n, std::move(spin));
  }
}

}  // namespace roulette::ising
