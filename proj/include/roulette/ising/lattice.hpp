#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <istream>
#include <memory>
#include <mutex>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "roulette/error.hpp"
#include "roulette/random.hpp"

namespace roulette::ising {

struct IsingParams {
  double alpha = 0.0;  // external field
  double beta = 0.0;   // coupling
};

// Neighbour slots (right, left, down, up) of every site of an N x N torus.
// Bonds are the (site, right) and (site, down) pairs with wraparound, so for
// N = 2 every bond appears twice and for N = 1 both bonds are self-loops.
class Geometry {
 public:
  explicit Geometry(std::size_t n) : n_(n), slots_(n * n) {
    for (std::size_t r = 0; r < n; ++r) {
      for (std::size_t c = 0; c < n; ++c) {
        auto idx = [n](std::size_t rr, std::size_t cc) { return static_cast<std::uint32_t>(rr * n + cc); };
        slots_[r * n + c] = {idx(r, (c + 1) % n), idx(r, (c + n - 1) % n), idx((r + 1) % n, c),
                             idx((r + n - 1) % n, c)};
      }
    }
  }

  std::size_t side() const { return n_; }
  std::size_t sites() const { return slots_.size(); }
  const std::array<std::uint32_t, 4>& slots(std::size_t i) const { return slots_[i]; }
  std::uint32_t right(std::size_t i) const { return slots_[i][0]; }
  std::uint32_t down(std::size_t i) const { return slots_[i][2]; }

  // Shared instance per side length.
  static std::shared_ptr<const Geometry> of(std::size_t n) {
    static std::mutex mutex;
    static std::vector<std::shared_ptr<const Geometry>> cache;
    std::lock_guard lock(mutex);
    if (cache.size() <= n) cache.resize(n + 1);
    if (!cache[n]) cache[n] = std::make_shared<const Geometry>(n);
    return cache[n];
  }

 private:
  std::size_t n_;
  std::vector<std::array<std::uint32_t, 4>> slots_;
};

// N x N grid of +-1 spins with cached sufficient statistics
// sum_i y_i and sum_{i~j} y_i y_j.
class IsingLattice {
 public:
  explicit IsingLattice(std::size_t n, int fill = 1) : IsingLattice(n, std::vector<std::int8_t>(n * n, sign_of(fill))) {}

  IsingLattice(std::size_t n, std::vector<std::int8_t> spins) : geometry_(Geometry::of(check_side(n))), spins_(std::move(spins)) {
    if (spins_.size() != n * n) throw SizeError("spin vector does not match the lattice size");
    for (auto& s : spins_) {
      if (s != 1 && s != -1) throw SizeError("spins must be +1 or -1");
    }
    recompute_sums();
  }

  static IsingLattice uniform(std::size_t n, Rng& rng) {
    std::vector<std::int8_t> spins(n * n);
    for (auto& s : spins) s = static_cast<std::int8_t>(random_spin(rng));
    return IsingLattice(n, std::move(spins));
  }

  std::size_t side() const { return geometry_->side(); }
  std::size_t size() const { return spins_.size(); }
  const Geometry& geometry() const { return *geometry_; }
  const std::vector<std::int8_t>& spins() const { return spins_; }

  int spin(std::size_t i) const { return spins_[i]; }
  int spin(std::size_t row, std::size_t col) const { return spins_[row * side() + col]; }

  long sum_spins() const { return sum_spins_; }
  long sum_pairs() const { return sum_pairs_; }

  // Sum of neighbour spins over the four slots, excluding self-loops.
  int local_field(std::size_t i) const {
    int h = 0;
    for (auto j : geometry_->slots(i))
      if (j != i) h += spins_[j];
    return h;
  }

  void set(std::size_t i, int s) {
    const int old = spins_[i];
    if (s == old) return;
    const int diff = s - old;
    sum_spins_ += diff;
    sum_pairs_ += static_cast<long>(diff) * local_field(i);
    spins_[i] = static_cast<std::int8_t>(s);
  }

  void flip(std::size_t i) { set(i, -spins_[i]); }

  void recompute_sums() {
    sum_spins_ = 0;
    sum_pairs_ = 0;
    for (std::size_t i = 0; i < spins_.size(); ++i) {
      sum_spins_ += spins_[i];
      sum_pairs_ += spins_[i] * (spins_[geometry_->right(i)] + spins_[geometry_->down(i)]);
    }
  }

  friend bool operator==(const IsingLattice& a, const IsingLattice& b) { return a.spins_ == b.spins_; }

  // Text snapshot: the side length on the first line, then one row per line
  // of '+' / '-' characters.
  std::string to_text() const {
    std::ostringstream os;
    os << side() << '\n';
    for (std::size_t r = 0; r < side(); ++r) {
      for (std::size_t c = 0; c < side(); ++c) os << (spin(r, c) > 0 ? '+' : '-');
      os << '\n';
    }
    return os.str();
  }

  static IsingLattice from_text(std::istream& in) {
    std::size_t n = 0;
    if (!(in >> n) || n == 0) throw SizeError("lattice snapshot must start with a positive side length");
    std::vector<std::int8_t> spins;
    spins.reserve(n * n);
    std::string row;
    for (std::size_t r = 0; r < n; ++r) {
      if (!(in >> row) || row.size() != n) throw SizeError("lattice snapshot row has the wrong length");
      for (char ch : row) {
        if (ch == '+') spins.push_back(1);
        else if (ch == '-') spins.push_back(-1);
        else throw SizeError(std::string("unexpected character in lattice snapshot: ") + ch);
      }
    }
    return IsingLattice(n, std::move(spins));
  }

  static IsingLattice from_text(const std::string& text) {
    std::istringstream in(text);
    return from_text(in);
  }

 private:
  static std::int8_t sign_of(int v) { return static_cast<std::int8_t>(v >= 0 ? 1 : -1); }
  static std::size_t check_side(std::size_t n) {
    if (n == 0) throw SizeError("lattice side must be positive");
    return n;
  }

  std::shared_ptr<const Geometry> geometry_;
  std::vector<std::int8_t> spins_;
  long sum_spins_ = 0;
  long sum_pairs_ = 0;
};

// log f(y; alpha, beta) = alpha sum_i y_i + beta sum_{i~j} y_i y_j.
inline double unnorm_loglik(const IsingLattice& y, const IsingParams& p) {
  return p.alpha * static_cast<double>(y.sum_spins()) + p.beta * static_cast<double>(y.sum_pairs());
}

// Single-site heat-bath update at a uniformly chosen site. The conditional
// P(y_i = +1 | rest) depends on the site only through its local field
// h in {-4, -2, 0, 2, 4}, so the five probabilities are tabulated.
class HeatBath {
 public:
  explicit HeatBath(const IsingParams& p) {
    for (int k = 0; k < 5; ++k) {
      const int h = 2 * k - 4;
      p_plus_[k] = 1.0 / (1.0 + std::exp(-2.0 * (p.alpha + p.beta * h)));
    }
  }

  double p_plus(int h) const { return p_plus_[(h + 4) / 2]; }

  // New spin at a site with local field h given the shared uniform u.
  int spin_for(int h, double u) const { return u < p_plus(h) ? 1 : -1; }

  void apply(IsingLattice& x, Rng& rng) const {
    const auto i = static_cast<std::size_t>(uniform_index(rng, x.size()));
    const double u = uniform01(rng);
    x.set(i, spin_for(x.local_field(i), u));
  }

 private:
  std::array<double, 5> p_plus_{};
};

}  // namespace roulette::ising
