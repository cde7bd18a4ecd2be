#pragma once

// Fisher-Bingham (Bingham) distribution on the unit sphere in R^3 with
// diagonal parameter matrix: p(y | lambda) ∝ exp(sum_i lambda_i y_i^2).

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numbers>
#include <sstream>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "roulette/error.hpp"
#include "roulette/normalizers.hpp"
#include "roulette/random.hpp"

namespace roulette::bingham {

inline constexpr double kFourPi = 4.0 * std::numbers::pi;

// Normal form 0 = lambda_1 >= lambda_2 >= lambda_3.
class BinghamParams {
 public:
  BinghamParams() = default;

  explicit BinghamParams(std::array<double, 3> lambda) : lambda_(lambda) {
    for (double v : lambda_)
      if (!std::isfinite(v)) throw SizeError("Bingham exponents must be finite");
    if (lambda_[0] != 0.0 || lambda_[1] > lambda_[0] || lambda_[2] > lambda_[1])
      throw SizeError("Bingham exponents must satisfy 0 = lambda1 >= lambda2 >= lambda3");
  }

  // Shifts by the largest exponent (which leaves the distribution unchanged
  // on the sphere) and orders the axes decreasingly.
  static BinghamParams from_any(std::array<double, 3> lambda) {
    std::sort(lambda.begin(), lambda.end(), std::greater<>());
    const double top = lambda[0];
    for (auto& v : lambda) v -= top;
    return BinghamParams(lambda);
  }

  static BinghamParams from_any(const std::vector<double>& lambda) {
    if (lambda.size() != 3) throw SizeError("only the 2-sphere (d = 3) is supported");
    return from_any(std::array<double, 3>{lambda[0], lambda[1], lambda[2]});
  }

  const std::array<double, 3>& lambda() const { return lambda_; }
  double operator[](std::size_t i) const { return lambda_[i]; }
  double max() const { return lambda_[0]; }

 private:
  std::array<double, 3> lambda_{};
};

struct SpherePoint {
  std::array<double, 3> y{0.0, 0.0, 1.0};

  double operator[](std::size_t i) const { return y[i]; }
  double norm() const { return std::sqrt(y[0] * y[0] + y[1] * y[1] + y[2] * y[2]); }

  static SpherePoint normalized(double a, double b, double c) {
    const double n = std::sqrt(a * a + b * b + c * c);
    if (!(n > 0.0) || !std::isfinite(n)) throw SizeError("cannot normalise a zero or non-finite vector");
    return SpherePoint{{a / n, b / n, c / n}};
  }
};

inline double unnorm_logdensity(const SpherePoint& p, const BinghamParams& lambda) {
  return lambda[0] * p[0] * p[0] + lambda[1] * p[1] * p[1] + lambda[2] * p[2] * p[2];
}

inline double unnorm_loglik(const std::vector<SpherePoint>& data, const BinghamParams& lambda) {
  double s = 0.0;
  for (const auto& p : data) s += unnorm_logdensity(p, lambda);
  return s;
}

inline SpherePoint sample_uniform_sphere(Rng& rng) {
  for (;;) {
    const double a = standard_normal(rng), b = standard_normal(rng), c = standard_normal(rng);
    if (a * a + b * b + c * c > 1e-300) return SpherePoint::normalized(a, b, c);
  }
}

struct UniformSphere {
  SpherePoint sample(Rng& rng) const { return sample_uniform_sphere(rng); }
  double log_density(const SpherePoint&) const { return -std::log(kFourPi); }
};

// Z(lambda) = int_{S^2} exp(sum lambda_i y_i^2) dy by adaptive Gauss-Kronrod.
// With lambda_2 = 0 the integrand depends on y_3 = u only and
// Z = 2 pi int_{-1}^{1} exp(lambda_3 u^2) du. Otherwise the azimuth integral is
// nested inside the u integral.
inline double bingham_Z_quadrature(const BinghamParams& lambda, double tolerance = 1e-12) {
  using boost::math::quadrature::gauss_kronrod;
  const double l1 = lambda[0], l2 = lambda[1], l3 = lambda[2];
  double error = 0.0;
  double z = 0.0;
  if (l2 == l1) {
    auto f = [&](double u) { return std::exp(l1 * (1.0 - u * u) + l3 * u * u); };
    z = 2.0 * std::numbers::pi * gauss_kronrod<double, 61>::integrate(f, -1.0, 1.0, 15, tolerance, &error);
    error *= 2.0 * std::numbers::pi;
  } else {
    double inner_error = 0.0;
    auto g = [&](double u) {
      const double s = 1.0 - u * u;
      auto h = [&](double phi) {
        const double c = std::cos(phi), sn = std::sin(phi);
        return std::exp(l1 * s * c * c + l2 * s * sn * sn + l3 * u * u);
      };
      double e = 0.0;
      // The integrand has period pi in phi and is even about 0.
      const double v = 4.0 * gauss_kronrod<double, 61>::integrate(h, 0.0, std::numbers::pi / 2.0, 15, tolerance, &e);
      inner_error = std::max(inner_error, 4.0 * e);
      return v;
    };
    z = gauss_kronrod<double, 61>::integrate(g, -1.0, 1.0, 15, tolerance, &error);
    error += 2.0 * inner_error;
  }
  if (!(error <= tolerance * std::max(1.0, std::fabs(z))) || !std::isfinite(z)) {
    std::ostringstream os;
    os << "Bingham normalizer quadrature did not reach tolerance " << tolerance << " (error " << error << ")";
    throw QuadratureError(os.str(), z, error);
  }
  return z;
}

// Z <= 4 pi exp(lambda_max); lambda_max = 0 in normal form.
inline double z_tilde_upper_bound(const BinghamParams& lambda) { return kFourPi * std::exp(lambda.max()); }

// Importance-sampling draws of log Z_hat with a uniform proposal.
struct IsSource {
  BinghamParams lambda;
  std::size_t n_samples = 1;

  double operator()(Rng& rng) const {
    auto logf = [this](const SpherePoint& p) { return unnorm_logdensity(p, lambda); };
    return is_partition_estimate(logf, UniformSphere{}, n_samples, rng);
  }
};

struct SimulationOptions {
  double step = 0.5;             // tangent-plane proposal scale
  std::size_t burn_in = 1000;
  std::size_t thinning = 100;    // MH steps per retained point
};

// Random-walk Metropolis on the sphere: y' = normalise(y + step * xi) with xi
// Gaussian in the tangent plane at y. The proposal density depends only on
// the angle between y and y', so it is symmetric.
inline std::vector<SpherePoint> simulate_bingham_data(const BinghamParams& lambda, std::size_t n_points, Rng& rng,
                                                      const SimulationOptions& options = {}) {
  if (n_points < 1) throw SizeError("n_points must be at least 1");
  if (options.thinning < 100) throw SizeError("thinning below 100 steps per point is not supported");
  SpherePoint y = sample_uniform_sphere(rng);
  double lf = unnorm_logdensity(y, lambda);
  auto mh_step = [&] {
    const double a = standard_normal(rng), b = standard_normal(rng), c = standard_normal(rng);
    const double dot = a * y[0] + b * y[1] + c * y[2];
    const SpherePoint prop = SpherePoint::normalized(y[0] + options.step * (a - dot * y[0]),
                                                     y[1] + options.step * (b - dot * y[1]),
                                                     y[2] + options.step * (c - dot * y[2]));
    const double lf_prop = unnorm_logdensity(prop, lambda);
    if (lf_prop >= lf || std::log(uniform01(rng)) < lf_prop - lf) {
      y = prop;
      lf = lf_prop;
    }
  };
  for (std::size_t i = 0; i < options.burn_in; ++i) mh_step();
  std::vector<SpherePoint> out;
  out.reserve(n_points);
  for (std::size_t k = 0; k < n_points; ++k) {
    for (std::size_t i = 0; i < options.thinning; ++i) mh_step();
    out.push_back(y);
  }
  return out;
}

}  // namespace roulette::bingham
