#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "ksd/ensemble.hpp"
#include "ksd/errors.hpp"
#include "ksd/systems.hpp"
#include "ksd/thermo.hpp"

using namespace ksd;

namespace {

constexpr double kPi = std::numbers::pi;

struct Moments {
  double mean = 0.0;
  double var = 0.0;
  double stderr() const { return std::sqrt(var / n); }
  std::size_t n = 0;
};

template <class F>
Moments moments(const Ensemble& e, F f) {
  Moments m;
  m.n = e.size();
  for (const auto& s : e.states) m.mean += f(s);
  m.mean /= double(m.n);
  for (const auto& s : e.states) m.var += (f(s) - m.mean) * (f(s) - m.mean);
  m.var /= double(m.n - 1);
  return m;
}

}  // namespace

TEST(Canonical, UniformDiskMeanEnergyIsHalf) {
  DiskRotation disk;
  const Ensemble e = sample_canonical(disk, {0.0, 0.0, 100000, 1});
  ASSERT_EQ(e.size(), 100000u);
  const Moments h = moments(e, [&](const PhaseState& s) { return disk.hamiltonian(s, 0.0); });
  EXPECT_NEAR(h.mean, 0.5, 3.0 * h.stderr());
  for (const auto& s : e.states) ASSERT_TRUE(disk.in_domain(s));
}

TEST(Canonical, OscillatorMomentumVarianceIsTemperature) {
  DrivenOscillator osc;
  const Ensemble e = sample_canonical(osc, {1.0, 1.0, 100000, 2});
  const Moments p = moments(e, [](const PhaseState& s) { return s.theta(); });
  EXPECT_NEAR(p.mean, 0.0, 3.0 * p.stderr());
  // var of a sample variance of Gaussians: 2 sigma^4 / n
  EXPECT_NEAR(p.var, 1.0, 3.0 * std::sqrt(2.0 / 100000));
  const Moments q = moments(e, [](const PhaseState& s) { return s.q(); });
  EXPECT_NEAR(q.var, 1.0, 3.0 * std::sqrt(2.0 / 100000));
}

TEST(Canonical, UniformSphereHasZeroMeanZ) {
  KickedTop top(kPi / 2, 5.0);
  const Ensemble e = sample_canonical(top, {0.0, 0.0, 100000, 3});
  const Moments z = moments(e, [](const PhaseState& s) { return s.x[2]; });
  EXPECT_NEAR(z.mean, 0.0, 3.0 * z.stderr());
  EXPECT_NEAR(z.var, 1.0 / 3.0, 0.01);
}

// H = theta^2/2 + lambda q^2/2 under a Gaussian canonical state is Exp(beta).
TEST(Canonical, OscillatorEnergyIsExponential) {
  DrivenOscillator osc;
  const Ensemble e = sample_canonical(osc, {1.0, 2.0, 20000, 4});
  std::vector<double> h;
  for (const auto& s : e.states) h.push_back(osc.hamiltonian(s, 2.0));
  std::sort(h.begin(), h.end());
  double d = 0.0;
  const double n = double(h.size());
  for (std::size_t i = 0; i < h.size(); ++i) {
    const double cdf = 1.0 - std::exp(-h[i]);
    d = std::max({d, std::abs(cdf - i / n), std::abs(cdf - (i + 1) / n)});
  }
  // Kolmogorov critical value at the 1% level
  EXPECT_LT(d * std::sqrt(n), 1.628);
}

TEST(Canonical, ThreadCountDoesNotChangeSamples) {
  KickedTop top(kPi / 2, 5.0);
  const CanonicalSpec spec{1.0, 0.0, 10000, 5};
  const Ensemble a = sample_canonical(top, spec, 1);
  const Ensemble b = sample_canonical(top, spec, 3);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) ASSERT_EQ(a.states[i], b.states[i]);
  const Ensemble c = sample_canonical(top, {1.0, 0.0, 10000, 6}, 1);
  EXPECT_NE(a.states[0], c.states[0]);
}

TEST(PartitionFunction, OscillatorMatchesGaussianIntegral) {
  DrivenOscillator osc;
  for (double beta : {0.5, 1.0, 2.0})
    for (double lambda : {1.0, 4.0}) {
      const double exact = 2.0 * kPi / (beta * std::sqrt(lambda));
      EXPECT_NEAR(partition_function(osc, beta, lambda).value / exact, 1.0, 1e-6);
    }
}

TEST(PartitionFunction, UniformDiskIsNormalized) {
  DiskRotation disk;
  EXPECT_NEAR(partition_function(disk, 0.0, 0.0).value, 1.0, 1e-9);
}

TEST(PartitionFunction, DiskQuadratureAgreesWithMonteCarlo) {
  DiskRotation disk;
  const double z = partition_function(disk, 1.0, 0.0).value;
  Engine rng = substream(7, Stream::kUniform, 0);
  const int n = 200000;
  double sum = 0.0, sq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double w = std::exp(-disk.hamiltonian(disk.sample_uniform(rng), 0.0));
    sum += w;
    sq += w * w;
  }
  const double mean = sum / n;
  const double se = std::sqrt((sq / n - mean * mean) / n);
  EXPECT_NEAR(z, mean, 3.0 * se);
  EXPECT_NEAR(z, 1.0 - std::exp(-1.0), 1e-6);
}

TEST(FreeEnergy, OscillatorValuesAndDifference) {
  DrivenOscillator osc;
  const double f1 = free_energy(1.0, partition_function(osc, 1.0, 1.0).value);
  const double f4 = free_energy(1.0, partition_function(osc, 1.0, 4.0).value);
  EXPECT_NEAR(f1, -std::log(2.0 * kPi), 1e-6);
  EXPECT_NEAR(f4 - f1, std::log(2.0), 1e-6);
  EXPECT_THROW(free_energy(0.0, 1.0), ConfigError);
}

// S = beta(<H> - F) equals the differential entropy computed directly.
TEST(FreeEnergy, LegendreIdentity) {
  DrivenOscillator osc;
  DiskRotation disk;
  const struct {
    const SystemModel* sys;
    double beta, lambda;
  } cases[] = {{&osc, 1.0, 1.0}, {&osc, 2.0, 4.0}, {&disk, 1.0, 0.0}, {&disk, 3.0, 0.0}};
  for (const auto& c : cases) {
    const double z = partition_function(*c.sys, c.beta, c.lambda).value;
    const double u = mean_energy(*c.sys, c.beta, c.lambda).value;
    const double s = differential_entropy(*c.sys, c.beta, c.lambda).value;
    EXPECT_NEAR(c.beta * (u - free_energy(c.beta, z)), s, 1e-4) << c.sys->name();
    EXPECT_NEAR(canonical_entropy(*c.sys, c.beta, c.lambda), s, 1e-4) << c.sys->name();
  }
}

TEST(FreeEnergy, UniformEntropyIsLogVolume) {
  DiskRotation disk;
  EXPECT_NEAR(canonical_entropy(disk, 0.0, 0.0), 0.0, 1e-12);
  DrivenOscillator osc;
  EXPECT_NEAR(canonical_entropy(osc, 0.0, 1.0), std::log(osc.domain_volume()), 1e-9);
}

TEST(Pushforward, DiskHalvesStayBalanced) {
  DiskRotation disk;
  const Ensemble e = sample_canonical(disk, {0.0, 0.0, 50000, 8});
  const Partition halves = make_partition(disk, PartitionSpec::parse("halves:q"));
  const auto protocol = ControlProtocol::constant(0.0, 5);
  for (int t = 0; t <= 5; ++t) {
    const Estimate p = pushforward_cell_probability(e, disk, protocol, halves, 0, t);
    EXPECT_NEAR(p.value, 0.5, 3.0 * p.stderr + 1e-12);
  }
}

// At fixed lambda the canonical state is stationary, so evolved cell
// probabilities keep their quadrature values.
TEST(Pushforward, StationaryCanonicalState) {
  DrivenOscillator osc;
  const Ensemble e = sample_canonical(osc, {1.0, 2.0, 50000, 9});
  const Partition grid = make_partition(osc, PartitionSpec::parse("grid:disk:2x3@4"));
  const CellHistogram exact = canonical_cell_probabilities(osc, grid, 1.0, 2.0);
  const auto protocol = ControlProtocol::constant(2.0, 7);
  for (int cell = 0; cell < int(grid.size()); ++cell) {
    const Estimate p = pushforward_cell_probability(e, osc, protocol, grid, cell, 7, 2);
    const double q = exact.probability[std::size_t(cell)];
    EXPECT_NEAR(p.value, q, 3.0 * std::sqrt(q * (1 - q) / double(e.size()))) << cell;
  }
}

// Linear symplectic flow preserves det of the covariance, hence the
// Gaussian differential entropy, even through a quench.
TEST(Liouville, FineGrainedEntropyConserved) {
  DrivenOscillator osc;
  const Ensemble e0 = sample_canonical(osc, {1.0, 1.0, 100000, 10});
  const auto protocol = ControlProtocol::from_points({{0, 1.0}, {1, 4.0}}, 10);
  const Ensemble e1 = evolve_ensemble(osc, protocol, e0, 10);
  auto logdet = [](const Ensemble& e) {
    double mq = 0, mp = 0;
    for (const auto& s : e.states) mq += s.q(), mp += s.theta();
    mq /= double(e.size());
    mp /= double(e.size());
    double a = 0, b = 0, c = 0;
    for (const auto& s : e.states) {
      a += (s.q() - mq) * (s.q() - mq);
      b += (s.q() - mq) * (s.theta() - mp);
      c += (s.theta() - mp) * (s.theta() - mp);
    }
    const double n = double(e.size());
    return std::log(a / n * c / n - b / n * b / n);
  };
  // Both are the same samples mapped linearly, so only round-off separates them.
  EXPECT_NEAR(logdet(e0), logdet(e1), 1e-8);
  EXPECT_NEAR(logdet(e0), 0.0, 0.03);
}

TEST(StateTable, RoundTripsExactly) {
  KickedTop top(kPi / 2, 5.0);
  const Ensemble e = sample_canonical(top, {0.0, 0.0, 500, 11});
  std::stringstream ss;
  write_state_table(ss, e);
  std::string header;
  std::getline(ss, header);
  EXPECT_EQ(header.rfind("sample_id,", 0), 0u);
  ss.seekg(0);
  const Ensemble back = read_state_table(ss);
  ASSERT_EQ(back.size(), e.size());
  for (std::size_t i = 0; i < e.size(); ++i) ASSERT_EQ(back.states[i], e.states[i]);
}
