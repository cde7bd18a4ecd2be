#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <vector>

#include "roulette/error.hpp"
#include "roulette/ising/lattice.hpp"

namespace roulette::ising {

// log Z by summing over all 2^(N^2) configurations, N <= 4.
inline double brute_force_logZ(std::size_t n, const IsingParams& p) {
  if (n == 0 || n > 4) throw SizeError("brute-force enumeration supports 1 <= N <= 4");
  const auto& geo = *Geometry::of(n);
  const std::size_t sites = n * n;
  const std::uint64_t states = std::uint64_t{1} << sites;
  std::vector<double> log_terms;
  log_terms.reserve(states);
  auto s = [](std::uint64_t x, std::size_t i) { return ((x >> i) & 1U) ? 1 : -1; };
  for (std::uint64_t x = 0; x < states; ++x) {
    long s1 = 0, s2 = 0;
    for (std::size_t i = 0; i < sites; ++i) {
      s1 += s(x, i);
      s2 += s(x, i) * (s(x, geo.right(i)) + s(x, geo.down(i)));
    }
    log_terms.push_back(p.alpha * static_cast<double>(s1) + p.beta * static_cast<double>(s2));
  }
  const double m = *std::max_element(log_terms.begin(), log_terms.end());
  double total = 0.0;
  for (double v : log_terms) total += std::exp(v - m);
  return m + std::log(total);
}

// log Z on the N x N torus by row-to-row transfer. Each row is a state in
// {0..2^N-1}; bit j is the spin in column j (1 -> +1). The trace over the
// first row is taken over rotation classes of that row (the torus is
// invariant under column shifts), each weighted by its orbit size. Within a
// pass the next row is inserted one site at a time, which keeps the cost at
// O(N 2^N) per row instead of O(4^N).
inline double transfer_matrix_logZ(std::size_t n, const IsingParams& p, std::size_t cap = 20) {
  if (n == 0) throw SizeError("lattice side must be positive");
  if (n > cap) throw SizeError("transfer matrix side exceeds the configured cap");
  const std::uint64_t m = std::uint64_t{1} << n;
  const std::uint64_t mask = m - 1;
  auto spin = [](std::uint64_t x, std::size_t i) { return ((x >> i) & 1U) ? 1 : -1; };
  auto rotate = [n, mask](std::uint64_t x) { return ((x >> 1) | (x << (n - 1))) & mask; };

  auto row_log_weight = [&](std::uint64_t x) {
    double w = 0.0;
    for (std::size_t i = 0; i < n; ++i) w += p.alpha * spin(x, i) + p.beta * spin(x, i) * spin(x, (i + 1) % n);
    return w;
  };

  // exp(beta s t) for vertical bonds, indexed [s is +1][t is +1].
  const double e_same = std::exp(p.beta);
  const double e_diff = std::exp(-p.beta);
  // exp(alpha s + beta s k), k = sum of already-placed horizontal neighbours.
  auto site_factor = [&](int s, int k) { return std::exp(p.alpha * s + p.beta * s * k); };
  std::array<std::array<double, 5>, 2> site_table{};
  for (int k = -2; k <= 2; ++k) {
    site_table[0][k + 2] = site_factor(-1, k);
    site_table[1][k + 2] = site_factor(1, k);
  }

  std::vector<double> vec(m), next(m);
  auto log_trace_from = [&](std::uint64_t x0) {
    std::fill(vec.begin(), vec.end(), 0.0);
    vec[x0] = 1.0;
    double log_scale = row_log_weight(x0);
    for (std::size_t r = 1; r < n; ++r) {
      for (std::size_t j = 0; j < n; ++j) {
        const std::uint64_t bit = std::uint64_t{1} << j;
        for (std::uint64_t x = 0; x < m; ++x) {
          if (x & bit) continue;
          const double down = vec[x];         // old spin at j is -1
          const double up = vec[x | bit];     // old spin at j is +1
          int k = 0;
          if (j >= 1) k += spin(x, j - 1);
          if (j == n - 1 && n >= 2) k += spin(x, 0);
          const double v_minus = (down * e_same + up * e_diff) * site_table[0][k + 2];
          const double v_plus = (down * e_diff + up * e_same) * site_table[1][k + 2];
          next[x] = v_minus;
          next[x | bit] = v_plus;
        }
        std::swap(vec, next);
      }
      const double top = *std::max_element(vec.begin(), vec.end());
      if (!(top > 0.0) || !std::isfinite(top)) throw EstimatorOverflow("transfer matrix row sum not finite", r, top);
      for (auto& v : vec) v /= top;
      log_scale += std::log(top);
    }
    // Close the torus: vertical bonds between the last row and the first.
    double total = 0.0;
    for (std::uint64_t x = 0; x < m; ++x) {
      if (vec[x] == 0.0) continue;
      const int matches = static_cast<int>(n) - 2 * static_cast<int>(std::popcount((x ^ x0) & mask));
      total += vec[x] * std::exp(p.beta * matches);
    }
    return log_scale + std::log(total);
  };

  std::vector<double> logs;
  for (std::uint64_t x = 0; x < m; ++x) {
    std::uint64_t y = x;
    std::size_t period = 0;
    bool canonical = true;
    for (std::size_t k = 1; k <= n; ++k) {
      y = rotate(y);
      if (y < x) {
        canonical = false;
        break;
      }
      if (y == x) {
        period = k;
        break;
      }
    }
    if (!canonical) continue;
    logs.push_back(std::log(static_cast<double>(period)) + log_trace_from(x));
  }
  const double top = *std::max_element(logs.begin(), logs.end());
  double total = 0.0;
  for (double v : logs) total += std::exp(v - top);
  return top + std::log(total);
}

// log of the crude bound Z <= 2^(N^2) max_y f(y), with the maximum of
// alpha S1 + beta S2 bounded by |alpha| N^2 + |beta| 2 N^2.
inline double aligned_upper_bound_logZ(std::size_t n, const IsingParams& p) {
  const double sites = static_cast<double>(n * n);
  return sites * std::log(2.0) + std::fabs(p.alpha) * sites + std::fabs(p.beta) * 2.0 * sites;
}

}  // namespace roulette::ising
