#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "roulette/truncation.hpp"
#include "test_util.hpp"

using namespace roulette;

namespace {

auto halves = [](std::size_t j, Rng&) { return std::pow(0.5, static_cast<double>(j)); };

}  // namespace

TEST(Roulette, ZeroTailGivesHeadTermExactly) {
  Rng rng = make_stream(1, "t");
  auto stream = [](std::size_t j, Rng&) { return j == 0 ? 1.0 : 0.0; };
  for (double q : {0.1, 0.5, 0.9}) {
    for (int i = 0; i < 200; ++i) {
      EXPECT_EQ(roulette_truncate(stream, RouletteSchedule::constant(q), rng).value, 1.0);
    }
  }
}

TEST(Roulette, GeometricSeriesMeanAndStoppingTime) {
  Rng rng = make_stream(2, "t");
  const auto schedule = RouletteSchedule::constant(0.5);
  std::vector<double> values, taus;
  for (int i = 0; i < 20000; ++i) {
    const auto out = roulette_truncate(halves, schedule, rng);
    values.push_back(out.value);
    taus.push_back(static_cast<double>(out.terms_used + 1));
  }
  const auto m = testutil::moments(values);
  EXPECT_LT(testutil::z_score(m, 2.0), 3.0) << m.mean << " +- " << m.se;
  const auto t = testutil::moments(taus);
  EXPECT_LT(testutil::z_score(t, 2.0), 3.0) << t.mean;
  // With q = 1/2 the weights exactly cancel the decay: S_hat = tau.
  EXPECT_DOUBLE_EQ(values[0], taus[0]);
}

TEST(Roulette, PerStepScheduleIsUnbiased) {
  Rng rng = make_stream(3, "t");
  const auto schedule = RouletteSchedule::per_step({0.9, 0.8, 0.7, 0.6});
  auto stream = [](std::size_t j, Rng&) { return std::pow(-0.4, static_cast<double>(j)); };
  std::vector<double> values;
  for (int i = 0; i < 40000; ++i) values.push_back(roulette_truncate(stream, schedule, rng).value);
  const auto m = testutil::moments(values);
  EXPECT_LT(testutil::z_score(m, 1.0 / 1.4), 4.0) << m.mean;
  EXPECT_DOUBLE_EQ(schedule.continuation(2), 0.8);
  EXPECT_DOUBLE_EQ(schedule.continuation(9), 0.6);
  EXPECT_DOUBLE_EQ(schedule.survival(3), 0.9 * 0.8);
}

TEST(Roulette, SafetyCapStopsAndFlags) {
  Rng rng = make_stream(4, "t");
  const auto out = roulette_truncate(halves, RouletteSchedule::constant(1.0, 25), rng);
  EXPECT_TRUE(out.capped);
  EXPECT_EQ(out.terms_used, 25u);
}

TEST(Roulette, OverflowIsReported) {
  Rng rng = make_stream(5, "t");
  auto huge = [](std::size_t, Rng&) { return 1e308; };
  EXPECT_THROW(roulette_truncate(huge, RouletteSchedule::constant(1.0, 10), rng), EstimatorOverflow);
}

TEST(Roulette, SameSeedSameDraws) {
  Rng a = make_stream(6, "t"), b = make_stream(6, "t");
  for (int i = 0; i < 100; ++i) {
    const auto x = roulette_truncate(halves, RouletteSchedule::constant(0.3), a, true);
    const auto y = roulette_truncate(halves, RouletteSchedule::constant(0.3), b, true);
    EXPECT_EQ(x.value, y.value);
    EXPECT_EQ(x.term_values, y.term_values);
  }
}

TEST(Roulette, RejectsBadSchedules) {
  EXPECT_THROW(RouletteSchedule::constant(0.0), InvalidSchedule);
  EXPECT_THROW(RouletteSchedule::constant(1.5), InvalidSchedule);
  EXPECT_THROW(RouletteSchedule::per_step({}), InvalidSchedule);
  EXPECT_THROW(RouletteSchedule::constant(0.5, 0), InvalidSchedule);
}

TEST(Roulette, ExpectedCost) {
  EXPECT_NEAR(expected_cost(RouletteSchedule::constant(0.5), 200), 2.0, 1e-12);
  EXPECT_NEAR(expected_cost(RouletteSchedule::constant(0.9), 2000), 10.0, 1e-9);
  EXPECT_DOUBLE_EQ(expected_cost(RouletteSchedule::constant(1.0), 7), 7.0);
}

TEST(SingleTerm, ZeroVarianceIndexGivesExactValue) {
  // phi_k = 0.5^k with P(k) = 0.5^(k+1): every draw returns exactly 2.
  Rng rng = make_stream(7, "t");
  const auto index = IndexDistribution::geometric(0.5);
  for (int i = 0; i < 500; ++i) EXPECT_DOUBLE_EQ(single_term_truncate(halves, index, rng).value, 2.0);
}

TEST(SingleTerm, TwoPointTable) {
  Rng rng = make_stream(8, "t");
  auto stream = [](std::size_t j, Rng&) { return j == 0 ? 3.0 : 0.0; };
  const auto index = IndexDistribution::table({0.25, 0.75});
  std::vector<double> values;
  for (int i = 0; i < 20000; ++i) {
    const double v = single_term_truncate(stream, index, rng).value;
    EXPECT_TRUE(v == 12.0 || v == 0.0);
    values.push_back(v);
  }
  const auto m = testutil::moments(values);
  EXPECT_LT(testutil::z_score(m, 3.0), 4.0) << m.mean;
}

TEST(SingleTerm, PoissonIndexIsUnbiased) {
  Rng rng = make_stream(9, "t");
  const auto index = IndexDistribution::poisson(1.0);
  std::vector<double> values;
  for (int i = 0; i < 40000; ++i) values.push_back(single_term_truncate(halves, index, rng).value);
  const auto m = testutil::moments(values);
  EXPECT_LT(testutil::z_score(m, 2.0), 4.0) << m.mean;
}

TEST(SingleTerm, RejectsBadDistributions) {
  EXPECT_THROW(IndexDistribution::geometric(1.0), InvalidSchedule);
  EXPECT_THROW(IndexDistribution::poisson(0.0), InvalidSchedule);
  EXPECT_THROW(IndexDistribution::poisson(600.0), InvalidSchedule);
  EXPECT_THROW(IndexDistribution::table({0.5, 0.4}), InvalidSchedule);
  EXPECT_THROW(IndexDistribution::table({1.2, -0.2}), InvalidSchedule);
}

TEST(SingleTerm, PmfValues) {
  EXPECT_DOUBLE_EQ(IndexDistribution::geometric(0.25).pmf(2), 0.75 * 0.0625);
  EXPECT_NEAR(IndexDistribution::poisson(2.0).pmf(3), std::exp(-2.0) * 8.0 / 6.0, 1e-15);
  EXPECT_EQ(IndexDistribution::table({0.5, 0.5}).pmf(4), 0.0);
}

TEST(Truncate, DispatchesOnVariant) {
  Rng a = make_stream(10, "t"), b = make_stream(10, "t");
  const Truncation how = IndexDistribution::geometric(0.5);
  EXPECT_EQ(truncate(halves, how, a).value,
            single_term_truncate(halves, IndexDistribution::geometric(0.5), b).value);
}
