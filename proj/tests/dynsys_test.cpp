#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "ksd/errors.hpp"
#include "ksd/partition.hpp"
#include "ksd/rng.hpp"
#include "ksd/systems.hpp"

using namespace ksd;

namespace {

constexpr double kPi = std::numbers::pi;

double dist(const PhaseState& a, const PhaseState& b) {
  double d = 0.0;
  for (int i = 0; i < 3; ++i) d = std::max(d, std::abs(a.x[i] - b.x[i]));
  return d;
}

}  // namespace

TEST(DiskRotation, OneStepNegatesTheState) {
  DiskRotation disk;
  const auto traj = evolve(disk, PhaseState::planar(0.5, 0.0), ControlProtocol::constant(0.0, 1));
  ASSERT_EQ(traj.size(), 2u);
  EXPECT_EQ(traj[1].q(), -0.5);
  EXPECT_EQ(traj[1].theta(), -0.0);
}

TEST(KickedTop, XAxisIsAFixedPoint) {
  KickedTop top(kPi / 2, 5.0);
  const auto traj = evolve(top, PhaseState::spin(1, 0, 0), ControlProtocol::constant(0.0, 1));
  EXPECT_LT(dist(traj[1], PhaseState::spin(1, 0, 0)), 1e-15);
}

TEST(DrivenOscillator, EnergyAfterHundredStepsMatchesExactSolution) {
  DrivenOscillator osc;
  const auto traj = evolve(osc, PhaseState::planar(1.0, 0.0), ControlProtocol::constant(1.0, 100));
  EXPECT_NEAR(osc.hamiltonian(traj.back(), 1.0), 0.5, 1e-6);
  // Exact harmonic flow: q(t) = cos t.
  EXPECT_NEAR(traj.back().q(), std::cos(100.0), 1e-6);
  EXPECT_NEAR(traj.back().theta(), -std::sin(100.0), 1e-6);
}

TEST(Evolve, TrajectoryFollowsStepWithProtocolValues) {
  DrivenOscillator osc;
  const auto protocol = ControlProtocol::from_values({1.0, 2.0, 3.0});
  const auto traj = evolve(osc, PhaseState::planar(0.3, 0.2), protocol);
  ASSERT_EQ(traj.size(), 3u);
  EXPECT_EQ(traj[0], PhaseState::planar(0.3, 0.2));
  EXPECT_EQ(traj[1], osc.step(traj[0], 1.0));
  EXPECT_EQ(traj[2], osc.step(traj[1], 2.0));
}

TEST(Evolve, StateOutsideTheDomainIsRejected) {
  DiskRotation disk;
  EXPECT_THROW(evolve(disk, PhaseState::planar(2.0, 0.0), ControlProtocol::constant(0.0, 3)), DomainError);
  DrivenOscillator small(1.0);
  EXPECT_THROW(evolve(small, PhaseState::planar(1.5, 0.0), ControlProtocol::constant(1.0, 3)), DomainError);
}

TEST(TangentEvolve, DiskTangentIsRotationByPi) {
  DiskRotation disk;
  const auto maps = tangent_evolve(disk, PhaseState::planar(0.2, 0.4), ControlProtocol::constant(0.0, 5), 5);
  ASSERT_EQ(maps.size(), 5u);
  for (const auto& m : maps) {
    EXPECT_DOUBLE_EQ(m(0, 0), -1.0);
    EXPECT_DOUBLE_EQ(m(1, 1), -1.0);
    EXPECT_DOUBLE_EQ(m(0, 1), 0.0);
    EXPECT_DOUBLE_EQ(m(1, 0), 0.0);
  }
}

TEST(TangentEvolve, KickedTopAtPoleHasUnitDeterminant) {
  KickedTop top(kPi / 2, 5.0);
  EXPECT_NEAR(tangent_determinant(top, PhaseState::spin(0, 0, 1), 0.0), 1.0, 1e-8);
}

TEST(TangentEvolve, OscillatorTraceIsTwoCosOne) {
  DrivenOscillator osc;
  const auto m = osc.tangent(PhaseState::planar(0.1, 0.1), 1.0);
  EXPECT_NEAR(m(0, 0) + m(1, 1), 2.0 * std::cos(1.0), 1e-6);
}

TEST(TangentEvolve, KickedTopJacobianMatchesFiniteDifferences) {
  KickedTop top(kPi / 2, 5.0);
  Engine rng = substream(11, Stream::kUniform, 0);
  for (int k = 0; k < 20; ++k) {
    const PhaseState s = top.sample_uniform(rng);
    const Eigen::Matrix3d J = top.tangent(s, 0.0);
    for (const auto& v : tangent_basis(top, s)) {
      const double h = 1e-6;
      PhaseState sp = s, sm = s;
      for (int i = 0; i < 3; ++i) {
        sp.x[i] += h * v[i];
        sm.x[i] -= h * v[i];
      }
      const KickedTop raw(kPi / 2, 5.0, false);
      const PhaseState fp = raw.step(sp, 0.0), fm = raw.step(sm, 0.0);
      const Eigen::Vector3d fd((fp.x[0] - fm.x[0]) / (2 * h), (fp.x[1] - fm.x[1]) / (2 * h),
                               (fp.x[2] - fm.x[2]) / (2 * h));
      EXPECT_LT((J * v - fd).norm(), 1e-6);
    }
  }
}

TEST(Invariants, InverseUndoesStepOnRandomStates) {
  DiskRotation disk;
  KickedTop top(kPi / 2, 5.0);
  DrivenOscillator osc;
  const SystemModel* systems[] = {&disk, &top, &osc};
  for (const SystemModel* sys : systems) {
    Engine rng = substream(3, Stream::kUniform, 0);
    double worst = 0.0;
    for (int i = 0; i < 10000; ++i) {
      PhaseState s = sys->sample_uniform(rng);
      if (sys == &osc) s = PhaseState::planar(s.q() / 4, s.theta() / 4);
      const double lambda = 0.5 + uniform01(rng) * 4.0;
      worst = std::max(worst, dist(sys->inverse_step(sys->step(s, lambda), lambda), s));
    }
    EXPECT_LT(worst, 1e-10) << sys->name();
  }
}

TEST(Invariants, TangentDeterminantIsOne) {
  DiskRotation disk;
  KickedTop top(kPi / 2, 5.0);
  DrivenOscillator osc;
  const SystemModel* systems[] = {&disk, &top, &osc};
  for (const SystemModel* sys : systems) {
    Engine rng = substream(4, Stream::kUniform, 0);
    for (int i = 0; i < 200; ++i) {
      const PhaseState s = sys->sample_uniform(rng);
      EXPECT_NEAR(tangent_determinant(*sys, s, 1.0 + 3.0 * uniform01(rng)), 1.0, 1e-8) << sys->name();
    }
  }
}

TEST(Invariants, EnergyConservedAtFixedLambda) {
  DiskRotation disk;
  Engine rng = substream(5, Stream::kUniform, 0);
  for (int i = 0; i < 1000; ++i) {
    const PhaseState s = disk.sample_uniform(rng);
    EXPECT_NEAR(disk.hamiltonian(disk.step(s, 0.0), 0.0), disk.hamiltonian(s, 0.0), 1e-8);
  }
  DrivenOscillator osc;
  const auto traj = evolve(osc, PhaseState::planar(0.7, -1.1), ControlProtocol::constant(2.5, 1000));
  const double h0 = osc.hamiltonian(traj.front(), 2.5);
  for (const auto& s : traj) EXPECT_NEAR(osc.hamiltonian(s, 2.5), h0, 1e-6);
}

// The kicked top is a stroboscopic map of a time-dependent (kicked)
// Hamiltonian, so H = alpha X + kappa Z^2 / 2 is not a step invariant.
TEST(Invariants, KickedTopEnergyIsNotAStepInvariant) {
  KickedTop top(kPi / 2, 5.0);
  Engine rng = substream(6, Stream::kUniform, 0);
  double largest = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const PhaseState s = top.sample_uniform(rng);
    largest = std::max(largest, std::abs(top.hamiltonian(top.step(s, 0.0), 0.0) - top.hamiltonian(s, 0.0)));
  }
  EXPECT_GT(largest, 0.1);
}

TEST(Invariants, KickedTopNormHeldWithoutRenormalization) {
  KickedTop top(kPi / 2, 5.0, false);
  PhaseState s = PhaseState::spin(0.6, 0.0, 0.8);
  for (int i = 0; i < 1000000; ++i) s = top.step(s, 0.0);
  const double norm = std::sqrt(s.x[0] * s.x[0] + s.x[1] * s.x[1] + s.x[2] * s.x[2]);
  EXPECT_LE(std::abs(norm - 1.0), 1e-12);
}

// A uniform cloud keeps its occupied fraction of every cell under one step.
TEST(Invariants, UniformMeasureIsPreserved) {
  DiskRotation disk;
  KickedTop top(kPi / 2, 5.0);
  DrivenOscillator osc(2.0);
  struct Case {
    const SystemModel* system;
    std::string spec;
  };
  const Case cases[] = {{&disk, "grid:3x5"}, {&top, "grid:sphere:3x4"}, {&osc, "grid:disk:2x3"}};
  for (const auto& c : cases) {
    const Partition part = make_partition(*c.system, PartitionSpec::parse(c.spec));
    Engine rng = substream(7, Stream::kUniform, 0);
    const int n = 100000;
    std::vector<int> counts(part.size(), 0);
    for (int i = 0; i < n; ++i) {
      const PhaseState s = c.system->step(c.system->sample_uniform(rng), 1.0);
      ++counts[std::size_t(part.locate(s))];
    }
    for (std::size_t k = 0; k < part.size(); ++k) {
      const double v = part.cell(int(k)).volume / part.domain_volume();
      const double sigma = std::sqrt(v * (1 - v) / n);
      EXPECT_NEAR(counts[k] / double(n), v, 3.0 * sigma + 1e-12) << c.system->name() << " cell " << k;
    }
  }
}

TEST(ControlProtocol, ReversedScheduleAndPoints) {
  const auto p = ControlProtocol::from_points({{0, 1.0}, {4, 3.0}}, 6);
  EXPECT_EQ(p.horizon(), 6);
  EXPECT_DOUBLE_EQ(p.at(2), 2.0);
  EXPECT_DOUBLE_EQ(p.at(6), 3.0);
  const auto r = p.reversed();
  for (int t = 0; t <= 6; ++t) EXPECT_DOUBLE_EQ(r.at(t), p.at(6 - t));
  EXPECT_THROW(p.at(7), std::out_of_range);
  EXPECT_TRUE(ControlProtocol::constant(2.0, 3).is_constant());
  EXPECT_FALSE(p.is_constant());
}

TEST(Chart, RoundTripsOnEveryChart) {
  DiskRotation disk;
  KickedTop top(kPi / 2, 5.0);
  Engine rng = substream(8, Stream::kUniform, 0);
  for (int i = 0; i < 100; ++i) {
    const PhaseState s = disk.sample_uniform(rng);
    EXPECT_LT(dist(from_chart(disk.chart(), to_chart(disk.chart(), s)), s), 1e-12);
    const PhaseState u = top.sample_uniform(rng);
    EXPECT_LT(dist(from_chart(top.chart(), to_chart(top.chart(), u)), u), 1e-12);
  }
}

TEST(TimeReversal, ReversalConjugatesTheMapToItsInverse) {
  DiskRotation disk;
  KickedTop top(kPi / 2, 5.0);
  DrivenOscillator osc;
  const SystemModel* systems[] = {&disk, &top, &osc};
  for (const SystemModel* sys : systems) {
    Engine rng = substream(9, Stream::kUniform, 0);
    for (int i = 0; i < 200; ++i) {
      PhaseState s = sys->sample_uniform(rng);
      if (sys == &osc) s = PhaseState::planar(s.q() / 4, s.theta() / 4);
      // G phi G = phi^-1
      const PhaseState lhs = sys->time_reversed(sys->step(sys->time_reversed(s), 2.0));
      EXPECT_LT(dist(lhs, sys->inverse_step(s, 2.0)), 1e-10) << sys->name();
      EXPECT_LT(dist(sys->time_reversed(sys->time_reversed(s)), s), 1e-12) << sys->name();
    }
  }
}
