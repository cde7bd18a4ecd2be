#include <cmath>
#include <numbers>
#include <vector>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "roulette/diagnostics.hpp"
#include "roulette/ising.hpp"
#include "roulette/pm_mcmc.hpp"
#include "test_util.hpp"

using namespace roulette;

namespace {

struct ConstantEstimator {
  double log_value = 0.0;
  int sign = 1;
  LikelihoodEstimate operator()(const Theta&, Rng&) const {
    LikelihoodEstimate e;
    e.value = SignedValue::from_log(log_value, sign);
    return e;
  }
};

// Noisy magnitudes with random signs; `flip` negates every sign.
struct NoisyEstimator {
  bool flip = false;
  LikelihoodEstimate operator()(const Theta& theta, Rng& rng) const {
    LikelihoodEstimate e;
    const double lm = -0.5 * theta[0] * theta[0] + 0.3 * standard_normal(rng);
    const int s = uniform01(rng) < 0.1 ? -1 : 1;
    e.value = SignedValue::from_log(lm, flip ? -s : s);
    return e;
  }
};

const BoxPrior flat{{-1e9}, {1e9}};

LikelihoodEstimate lik(SignedValue v) {
  LikelihoodEstimate e;
  e.value = v;
  return e;
}

}  // namespace

TEST(Step, EqualMagnitudeAlwaysAccepts) {
  Rng rng = make_stream(1, "m");
  ChainRecord cur;
  cur.theta = {0.0};
  const GaussianRandomWalk prop{{1.0}};
  ConstantEstimator est;
  for (int i = 0; i < 1000; ++i) {
    cur = pm_mh_step(cur, prop, flat, est, rng);
    EXPECT_TRUE(cur.accepted);
  }
}

TEST(Step, HalfMagnitudeAcceptsHalfTheTime) {
  Rng rng = make_stream(2, "m");
  ChainRecord cur;
  cur.theta = {0.0};
  const GaussianRandomWalk prop{{1.0}};
  ConstantEstimator est{-std::log(2.0)};
  std::vector<double> acc;
  for (int i = 0; i < 100000; ++i) acc.push_back(pm_mh_step(cur, prop, flat, est, rng).accepted ? 1.0 : 0.0);
  EXPECT_LT(testutil::z_score(testutil::moments(acc), 0.5), 3.0);
}

TEST(Step, RejectionPropagatesEstimate) {
  Rng rng = make_stream(3, "m");
  ChainRecord cur;
  cur.theta = {0.0};
  cur.log_abs_estimate = 0.0;
  const GaussianRandomWalk prop{{1.0}};
  NoisyEstimator est;
  int rejections = 0;
  for (int i = 0; i < 5000; ++i) {
    const ChainRecord next = pm_mh_step(cur, prop, flat, est, rng);
    if (!next.accepted) {
      ++rejections;
      EXPECT_EQ(next.theta, cur.theta);
      EXPECT_EQ(next.log_abs_estimate, cur.log_abs_estimate);
      EXPECT_EQ(next.sign, cur.sign);
    }
    cur = next;
  }
  EXPECT_GT(rejections, 100);
}

TEST(Step, OutOfSupportRejectsWithoutEstimating) {
  Rng rng = make_stream(4, "m");
  ChainRecord cur;
  cur.theta = {0.5};
  const BoxPrior box{{0.0}, {1.0}};
  const GaussianRandomWalk prop{{100.0}};
  int calls = 0;
  auto est = [&](const Theta&, Rng&) {
    ++calls;
    return lik(SignedValue::one());
  };
  for (int i = 0; i < 100; ++i) cur = pm_mh_step(cur, prop, box, est, rng);
  EXPECT_LT(calls, 10);
}

TEST(Step, SignsNeverEnterAcceptance) {
  Rng a = make_stream(5, "m"), b = make_stream(5, "m");
  GaussianRandomWalk pa{{0.8}}, pb{{0.8}};
  NoisyEstimator plain, flipped{true};
  ChainOptions opt;
  opt.n_iters = 5000;
  opt.burn_in = 1000;
  const auto ra = run_chain({0.0}, pa, flat, plain, opt, a);
  const auto rb = run_chain({0.0}, pb, flat, flipped, opt, b);
  ASSERT_EQ(ra.records.size(), rb.records.size());
  for (std::size_t i = 0; i < ra.records.size(); ++i) {
    EXPECT_EQ(ra.records[i].accepted, rb.records[i].accepted);
    EXPECT_EQ(ra.records[i].theta, rb.records[i].theta);
    EXPECT_EQ(ra.records[i].sign, -rb.records[i].sign);
  }
  auto id = [](const Theta& t) { return t[0]; };
  const auto sa = sign_corrected_expectation(ra.records, 1000, id);
  const auto sb = sign_corrected_expectation(rb.records, 1000, id);
  EXPECT_NEAR(sa.r_hat, -sb.r_hat, 1e-15);
}

TEST(Chain, EmptyRun) {
  Rng rng = make_stream(6, "m");
  GaussianRandomWalk prop{{1.0}};
  ConstantEstimator est;
  const auto r = run_chain({0.0}, prop, flat, est, ChainOptions{}, rng);
  EXPECT_TRUE(r.records.empty());
  EXPECT_EQ(r.metadata.n_iters, 0u);
  EXPECT_EQ(r.metadata.negative_count, 0u);
}

TEST(Chain, ZeroInitialEstimateIsRedrawnOnce) {
  Rng rng = make_stream(7, "m");
  GaussianRandomWalk prop{{1.0}};
  int calls = 0;
  auto est = [&](const Theta&, Rng&) {
    return lik(calls++ == 0 ? SignedValue::zero() : SignedValue::one());
  };
  ChainOptions opt;
  opt.n_iters = 10;
  const auto r = run_chain({0.0}, prop, flat, est, opt, rng);
  EXPECT_EQ(r.metadata.init_resamples, 1u);
  EXPECT_EQ(r.records.size(), 10u);
}

TEST(Chain, FailureCarriesIteration) {
  Rng rng = make_stream(8, "m");
  GaussianRandomWalk prop{{1.0}};
  int calls = 0;
  auto est = [&](const Theta&, Rng&) {
    if (++calls == 6) throw EstimatorOverflow("boom", 3, 0.0);
    return lik(SignedValue::one());
  };
  ChainOptions opt;
  opt.n_iters = 20;
  try {
    run_chain({0.0}, prop, flat, est, opt, rng);
    FAIL() << "expected ChainAborted";
  } catch (const ChainAborted& e) {
    EXPECT_EQ(e.iteration(), 4u);
    EXPECT_EQ(e.partial().records.size(), 4u);
    EXPECT_FALSE(e.rng_state().empty());
  }
}

TEST(Chain, ExactIsingChainIsTunedNearFortyPercent) {
  Rng rng = make_stream(9, "m");
  const auto y = ising::cftp_sample(3, {0.0, 0.3}, rng);
  auto est = [&](const Theta& t, Rng&) {
    const ising::IsingParams p{0.0, t[0]};
    return lik(SignedValue::from_log(ising::unnorm_loglik(y, p) - ising::brute_force_logZ(3, p)));
  };
  GaussianRandomWalk prop{{0.05}};
  const BoxPrior prior{{0.0}, {1.0}};
  ChainOptions opt;
  opt.n_iters = 20000;
  opt.burn_in = 10000;
  const auto r = run_chain({0.2}, prop, prior, est, opt, rng);
  const double rate = static_cast<double>(r.metadata.accepted_after_burn_in) / 10000.0;
  EXPECT_GE(rate, 0.3);
  EXPECT_LE(rate, 0.5);
}

TEST(Ess, IndependentDraws) {
  Rng rng = make_stream(10, "m");
  std::vector<double> x(10000);
  for (auto& v : x) v = standard_normal(rng);
  const double e = ess(x);
  EXPECT_GE(e, 9000.0);
  EXPECT_LE(e, 10000.0);
}

TEST(Ess, AutoregressiveSeries) {
  Rng rng = make_stream(11, "m");
  std::vector<double> x(100000);
  double v = 0.0;
  for (auto& xi : x) xi = v = 0.5 * v + standard_normal(rng);
  EXPECT_NEAR(ess(x) / 100000.0, 1.0 / 3.0, 1.0 / 30.0);
}

TEST(Ess, EdgeCases) {
  EXPECT_EQ(ess(std::vector<double>(50, 2.5)), 50.0);
  EXPECT_THROW(ess(std::vector<double>(9, 1.0)), SizeError);
}

TEST(SignCorrected, HandExample) {
  const auto s = sign_corrected_expectation({1.0, 2.0, 3.0}, {1, -1, 1});
  EXPECT_DOUBLE_EQ(s.estimate, 2.0);
  EXPECT_DOUBLE_EQ(s.r_hat, 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(s.negative_fraction, 1.0 / 3.0);
}

TEST(SignCorrected, AllPositiveIsPlainMean) {
  Rng rng = make_stream(12, "m");
  std::vector<double> h(1000);
  for (auto& v : h) v = standard_normal(rng);
  const auto s = sign_corrected_expectation(h, std::vector<int>(h.size(), 1));
  EXPECT_NEAR(s.estimate, testutil::moments(h).mean, 1e-12);
  EXPECT_EQ(s.r_hat, 1.0);
  EXPECT_EQ(s.negative_fraction, 0.0);
}

TEST(SignCorrected, DegenerateSigns) {
  EXPECT_THROW(sign_corrected_expectation({1.0, 2.0}, {1, -1}), DegenerateSign);
  EXPECT_THROW(sign_corrected_expectation({1.0}, {1, 1}), SizeError);
}

TEST(SignCorrected, FivePercentFlipFixture) {
  // |pi| = N(0, 1); the sign is -1 on the upper 5% tail x > c. The signed
  // target's mean is E[x sigma] / E[sigma] = -2 phi(c) / 0.9.
  const double c = 1.6448536269514722;
  const double phi_c = std::exp(-0.5 * c * c) / std::sqrt(2.0 * std::numbers::pi);
  const double oracle_ratio = -2.0 * phi_c / 0.9;
  Rng rng = make_stream(13, "m");
  std::vector<double> h(200000);
  std::vector<int> sign(h.size());
  for (std::size_t i = 0; i < h.size(); ++i) {
    h[i] = standard_normal(rng);
    sign[i] = h[i] > c ? -1 : 1;
  }
  const auto s = sign_corrected_expectation(h, sign);
  EXPECT_NEAR(s.negative_fraction, 0.05, 0.005);
  EXPECT_LT(std::fabs(s.estimate - oracle_ratio), 4.0 * std::sqrt(s.variance))
      << s.estimate << " vs " << oracle_ratio << " se " << std::sqrt(s.variance);
}
