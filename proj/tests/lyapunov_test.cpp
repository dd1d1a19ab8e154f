#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "ksd/errors.hpp"
#include "ksd/lyapunov.hpp"
#include "ksd/systems.hpp"

using namespace ksd;

namespace {

constexpr double kPi = std::numbers::pi;

LyapunovOptions quick(std::size_t iterations, int period = 1) {
  LyapunovOptions o;
  o.iterations = iterations;
  o.reorth_period = period;
  return o;
}

}  // namespace

TEST(Lyapunov, DiskRotationHasZeroSpectrum) {
  DiskRotation disk;
  const auto r = lyapunov_spectrum(disk, 0.0, PhaseState::planar(0.3, 0.2), quick(10000));
  ASSERT_EQ(r.exponents.size(), 2u);
  EXPECT_NEAR(r.exponents[0], 0.0, 1e-12);
  EXPECT_NEAR(r.exponents[1], 0.0, 1e-12);
  EXPECT_TRUE(r.converged());
  EXPECT_EQ(pesin_kse(r), 0.0);
}

TEST(Lyapunov, KickedTopLeadingExponent) {
  KickedTop top(kPi / 2, 5.0);
  const auto r = lyapunov_spectrum(top, 0.0, PhaseState::spin(0.3, 0.4, std::sqrt(0.75)), quick(1000000));
  ASSERT_EQ(r.exponents.size(), 2u);
  EXPECT_NEAR(r.exponents[0], 0.8768, 0.02);
  // area preservation: the pair sums to zero
  EXPECT_NEAR(r.exponents[0] + r.exponents[1], 0.0, 1e-3);
  EXPECT_TRUE(r.converged());
  EXPECT_NEAR(pesin_kse(r), r.exponents[0], 1e-15);
  EXPECT_GT(r.leading_stderr, 0.0);
  EXPECT_LT(r.leading_stderr, 0.01);
}

TEST(Pesin, SumsPositiveExponentsOnly) {
  LyapunovReport r;
  r.exponents = {0.5, 0.1, -0.6};
  r.history = {{1000, {0.5, 0.1, -0.6}}, {2000, {0.5, 0.1, -0.6}}};
  EXPECT_NEAR(pesin_kse(r), 0.6, 1e-15);
  r.exponents = {-0.1, -0.2};
  r.history = {{1000, {-0.1, -0.2}}, {2000, {-0.1, -0.2}}};
  EXPECT_EQ(pesin_kse(r), 0.0);
}

TEST(Pesin, RefusesUnconvergedReports) {
  LyapunovReport r;
  r.exponents = {0.9, -0.9};
  r.history = {{1000, {0.7, -0.7}}, {2000, {0.9, -0.9}}};
  EXPECT_FALSE(r.converged());
  EXPECT_THROW(pesin_kse(r), EstimatorRefusal);
}

// Ergodicity: the leading exponent does not depend on the orbit.
TEST(Lyapunov, IndependentOfInitialPoint) {
  KickedTop top(kPi / 2, 5.0);
  Engine rng = substream(41, Stream::kUniform, 0);
  std::vector<double> leading;
  for (int i = 0; i < 10; ++i) {
    PhaseState s = top.sample_uniform(rng);
    leading.push_back(lyapunov_spectrum(top, 0.0, s, quick(300000)).exponents[0]);
  }
  double mean = 0.0;
  for (double x : leading) mean += x / double(leading.size());
  for (double x : leading) EXPECT_NEAR(x, mean, 0.01 * mean);
}

// Reorthonormalizing less often changes nothing but round-off while the
// stretch over one period stays representable.
TEST(Lyapunov, ReorthonormalizationPeriodDoesNotMatter) {
  KickedTop top(kPi / 2, 5.0);
  const PhaseState s0 = PhaseState::spin(0.3, 0.4, std::sqrt(0.75));
  const double base = lyapunov_spectrum(top, 0.0, s0, quick(200000, 1)).exponents[0];
  for (int period : {5, 10})
    EXPECT_NEAR(lyapunov_spectrum(top, 0.0, s0, quick(200000, period)).exponents[0], base, 1e-3) << period;
}

TEST(Lyapunov, DeterministicForFixedInput) {
  KickedTop top(kPi / 2, 5.0);
  const PhaseState s0 = PhaseState::spin(0.0, 0.6, 0.8);
  const auto a = lyapunov_spectrum(top, 0.0, s0, quick(20000));
  const auto b = lyapunov_spectrum(top, 0.0, s0, quick(20000));
  EXPECT_EQ(a.exponents, b.exponents);
  EXPECT_FALSE(a.history.empty());
}
