#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "ksd/ensemble.hpp"
#include "ksd/entropy.hpp"
#include "ksd/errors.hpp"
#include "ksd/oracle.hpp"
#include "ksd/systems.hpp"

using namespace ksd;

namespace {

constexpr double kPi = std::numbers::pi;
const double kLn2 = std::log(2.0);

Partition part(const SystemModel& sys, const std::string& spec) {
  return make_partition(sys, PartitionSpec::parse(spec));
}

PathStats disk_stats(const std::string& spec, int depth, std::size_t samples = 50000) {
  DiskRotation disk;
  const Ensemble e = sample_canonical(disk, {0.0, 0.0, samples, 21});
  return collect_path_stats(disk, ControlProtocol::constant(0.0, depth), part(disk, spec), e, depth);
}

PathStats iid_stats(std::size_t alphabet, int depth, std::size_t rows, std::uint64_t seed) {
  Engine rng = substream(seed, Stream::kUniform, 0);
  std::vector<Symbol> symbols(rows * std::size_t(depth + 1));
  for (auto& s : symbols) s = Symbol(rng() % alphabet);
  return PathStats::from_paths(symbols, rows, std::size_t(depth + 1), alphabet, depth);
}

// Hand-made permutation with unequal cells and a nonstationary start.
DiscreteSystem small_system() {
  DiscreteSystem sys;
  sys.perm = {2, 0, 3, 1, 4};
  sys.volumes = {0.1, 0.3, 0.2, 0.15, 0.25};
  sys.p0 = {0.4, 0.05, 0.25, 0.2, 0.1};
  sys.validate();
  return sys;
}

}  // namespace

TEST(PartitionEntropy, KnownValues) {
  EXPECT_DOUBLE_EQ(z_log(0.0), 0.0);
  EXPECT_NEAR(z_log(0.5), 0.5 * kLn2, 1e-15);
  const double half[] = {0.5, 0.5};
  EXPECT_NEAR(partition_entropy(half), kLn2, 1e-15);
  const double one[] = {1.0, 0.0};
  EXPECT_EQ(partition_entropy(one), 0.0);
  const double quarters[] = {0.25, 0.25, 0.25, 0.25};
  EXPECT_NEAR(partition_entropy(quarters), std::log(4.0), 1e-15);
  const double negative[] = {1.2, -0.2};
  EXPECT_THROW(partition_entropy(negative), InvariantViolation);
  const double short_sum[] = {0.5, 0.4};
  EXPECT_THROW(partition_entropy(short_sum), InvariantViolation);
}

TEST(PathStats, DiskHalvesHaveTwoEqualBlocksAtEveryDepth) {
  const PathStats stats = disk_stats("halves:q", 6);
  for (int t = 0; t <= 6; ++t) {
    ASSERT_EQ(stats.table(t).size(), 2u);
    for (const auto& b : stats.table(t)) EXPECT_NEAR(double(b.count) / double(stats.total()), 0.5, 0.01);
  }
  const BlockEntropyCurve curve = block_entropy_curve(stats);
  for (int L = 1; L <= curve.max_length(); ++L) EXPECT_NEAR(curve.at(L), kLn2, 1e-4);
}

TEST(PathStats, IidStreamEntropyGrowsLinearly) {
  const std::size_t n = 3;
  const PathStats stats = iid_stats(n, 4, 200000, 22);
  const BlockEntropyCurve curve = block_entropy_curve(stats);
  for (int L = 1; L <= 5; ++L) EXPECT_NEAR(curve.at(L), L * std::log(double(n)), 5e-3) << L;
}

TEST(PathStats, TablesMarginalizeExactly) {
  const PathStats stats = iid_stats(4, 5, 20000, 23);
  for (int t = 1; t <= 5; ++t) {
    std::map<BlockKey, std::uint64_t> folded;
    for (const auto& b : stats.table(t)) folded[block_prefix(b.key, stats.bits())] += b.count;
    ASSERT_EQ(folded.size(), stats.table(t - 1).size());
    for (const auto& b : stats.table(t - 1)) EXPECT_EQ(folded[b.key], b.count);
  }
}

TEST(PathStats, ConditionalsAndMarginalsAreNormalized) {
  KickedTop top(kPi / 2, 5.0);
  const Ensemble e = sample_canonical(top, {0.0, 0.0, 20000, 24});
  const PathStats stats =
      collect_path_stats(top, ControlProtocol::constant(0.0, 4), part(top, "grid:sphere:2x2"), e, 4);
  for (int t = 0; t <= 4; ++t) {
    double total = 0.0;
    for (double p : stats.marginal(t)) total += p;
    EXPECT_NEAR(total, 1.0, 1e-12);
    std::map<BlockKey, double> by_prefix;
    for (const auto& b : stats.table(t)) by_prefix[block_prefix(b.key, stats.bits())] += stats.conditional(t, b.key);
    for (const auto& [prefix, sum] : by_prefix) EXPECT_NEAR(sum, 1.0, 1e-12);
  }
}

TEST(PathStats, MergeIsOrderIndependent) {
  const PathStats a = iid_stats(3, 3, 5000, 25);
  const PathStats b = iid_stats(3, 3, 7000, 26);
  const PathStats ab = PathStats::merge(a, b), ba = PathStats::merge(b, a);
  EXPECT_EQ(ab.total(), 12000u);
  for (int t = 0; t <= 3; ++t) {
    ASSERT_EQ(ab.table(t).size(), ba.table(t).size());
    for (std::size_t i = 0; i < ab.table(t).size(); ++i) {
      EXPECT_TRUE(ab.table(t)[i].key == ba.table(t)[i].key);
      EXPECT_EQ(ab.table(t)[i].count, ba.table(t)[i].count);
    }
  }
}

TEST(PathStats, KeyBudgetIsEnforced) {
  EXPECT_NO_THROW(check_table_budget(16, 31));
  EXPECT_THROW(check_table_budget(16, 32), TableOverflow);
  EXPECT_NO_THROW(check_table_budget(1, 10000));
  const Symbol path[] = {3, 1, 2};
  EXPECT_EQ(unpack_block(pack_block(path, 2), 3, 2), std::vector<Symbol>(path, path + 3));
}

// Block entropy never decreases with length, and for a stationary orbit its
// increments (conditional entropies) never increase.
TEST(BlockEntropy, MonotoneWithConcaveIncrements) {
  KickedTop top(kPi / 2, 5.0);
  const PathStats stats =
      collect_orbit_stats(top, 0.0, part(top, "grid:sphere:2x2"), PhaseState::spin(0.3, 0.4, std::sqrt(0.75)),
                          400000, 8);
  CurveOptions plug;
  plug.miller_madow = false;
  const BlockEntropyCurve curve = block_entropy_curve(stats, plug);
  for (int L = 1; L <= curve.max_length(); ++L) {
    EXPECT_GE(curve.at(L), curve.at(L - 1) - 1e-12);
    if (L >= 2) EXPECT_LE(curve.increment(L), curve.increment(L - 1) + 1e-3) << L;
  }
  for (int t = 1; t <= 8; ++t)
    EXPECT_LE(conditional_entropy(stats, t), conditional_entropy(stats, t - 1) + 1e-3);
}

TEST(BlockEntropy, OracleConditionalEntropiesNeverIncrease) {
  Engine rng = substream(27, Stream::kOracle, 0);
  for (int k = 0; k < 50; ++k) {
    const auto terms = exact_terms(random_discrete_system(rng, 8), 10);
    for (std::size_t t = 1; t < terms.size(); ++t)
      EXPECT_LE(terms[t].conditional_entropy, terms[t - 1].conditional_entropy + 1e-12);
  }
}

TEST(Kse, DiskRotationHasZeroRate) {
  std::vector<NamedCurve> curves;
  for (const char* spec : {"halves:q", "grid:2x4", "grid:4x4"})
    curves.push_back({PartitionSpec::parse(spec).id(), block_entropy_curve(disk_stats(spec, 8))});
  const KseEstimate h = kse_estimate(curves);
  EXPECT_NEAR(h.h, 0.0, 1e-3);
}

TEST(Kse, IdentityMapHasExactlyZeroRate) {
  DiscreteSystem sys;
  sys.perm = {0, 1, 2, 3};
  sys.volumes = {0.25, 0.25, 0.25, 0.25};
  sys.p0 = {0.1, 0.2, 0.3, 0.4};
  DiscreteSystemModel model(sys);
  const Ensemble e = sample_canonical(model, {1.0, 0.0, 10000, 28});
  const PathStats stats = collect_path_stats(model, ControlProtocol::constant(0.0, 6), model.partition(), e, 6);
  CurveOptions plug;
  plug.miller_madow = false;
  const NamedCurve curve{"cells", block_entropy_curve(stats, plug)};
  const KseEstimate h = kse_estimate(std::span(&curve, 1));
  EXPECT_EQ(h.h, 0.0);
}

TEST(Kse, KickedTopRateFromOrbit) {
  KickedTop top(kPi / 2, 5.0);
  std::vector<NamedCurve> curves;
  for (const char* spec : {"grid:sphere:2x4", "grid:sphere:4x4"}) {
    const PathStats stats = collect_orbit_stats(top, 0.0, part(top, spec),
                                                PhaseState::spin(0.3, 0.4, std::sqrt(0.75)), 2000000, 12);
    curves.push_back({PartitionSpec::parse(spec).id(), block_entropy_curve(stats)});
  }
  const KseEstimate h = kse_estimate(curves);
  EXPECT_GE(h.h, 0.80);
  EXPECT_LE(h.h, 0.95);
}

TEST(Kse, RefusesWhenNothingIsReliable) {
  KickedTop top(kPi / 2, 5.0);
  const PathStats stats =
      collect_orbit_stats(top, 0.0, part(top, "grid:sphere:4x8"), PhaseState::spin(0.6, 0.0, 0.8), 200, 6);
  const NamedCurve curve{"grid-4x8", block_entropy_curve(stats)};
  EXPECT_THROW(kse_estimate(std::span(&curve, 1)), EstimatorRefusal);
}

// H_L / L and the increment rate approach the same limit where the curve
// saturates quickly.
TEST(Kse, QuotientAndIncrementAgree) {
  const NamedCurve disk{"halves-q", block_entropy_curve(disk_stats("halves:q", 32, 20000))};
  const KseEstimate a = kse_estimate(std::span(&disk, 1));
  ASSERT_EQ(a.partitions.size(), 1u);
  EXPECT_TRUE(a.partitions[0].agree) << a.partitions[0].agreement_gap;

  DiscreteSystemModel model(small_system());
  const Ensemble e = sample_canonical(model, {1.0, 0.0, 20000, 29});
  const PathStats stats = collect_path_stats(model, ControlProtocol::constant(0.0, 40), model.partition(), e, 40);
  const NamedCurve oracle{"cells", block_entropy_curve(stats)};
  const KseEstimate b = kse_estimate(std::span(&oracle, 1));
  EXPECT_TRUE(b.partitions[0].agree) << b.partitions[0].agreement_gap;
}

TEST(CTerm, DiskHalvesGiveMinusOneAfterTheStart) {
  DiskRotation disk;
  const Partition halves = part(disk, "halves:q");
  const auto protocol = ControlProtocol::constant(0.0, 5);
  const PathStats stats = disk_stats("halves:q", 5);
  const auto volumes = ReversedVolumeTable::build(disk, protocol, halves, 5, 20000, 30);
  const auto c = c_terms(stats, volumes);
  ASSERT_EQ(c.size(), 6u);
  EXPECT_EQ(c[0].value, 0.0);
  for (int t = 1; t <= 5; ++t) EXPECT_NEAR(c[std::size_t(t)].value, -1.0, 1e-12);
}

TEST(DTerm, EqualHalvesGiveLogTwo) {
  const double v[] = {0.5, 0.5}, p[] = {0.5, 0.5};
  EXPECT_NEAR(d_term(v, p, 1000).value, kLn2, 1e-15);
  const double v2[] = {0.25, 0.75}, p2[] = {1.0, 0.0};
  EXPECT_NEAR(d_term(v2, p2, 1000).value, std::log(4.0), 1e-15);
}

TEST(InfoTerm, CombinesTermsAndErrors) {
  const Estimate i = info_term({0.0, 0.0}, {-1.0, 0.0}, {kLn2, 0.0});
  EXPECT_NEAR(i.value, 1.0 - kLn2, 1e-15);
  const Estimate j = info_term({0.5, 0.03}, {0.1, 0.04}, {0.2, 0.0});
  EXPECT_NEAR(j.value, 0.2, 1e-15);
  EXPECT_NEAR(j.stderr, 0.05, 1e-15);
}

// The sampling pipeline on the interval model against exact enumeration.
TEST(Pipeline, DiscreteModelMatchesExactTerms) {
  const DiscreteSystem sys = small_system();
  DiscreteSystemModel model(sys);
  const int depth = 4;
  const auto protocol = ControlProtocol::constant(0.0, depth);
  const Ensemble e = sample_canonical(model, {1.0, 0.0, 100000, 31});
  const Partition cells = model.partition();
  const PathStats stats = collect_path_stats(model, protocol, cells, e, depth);
  const auto volumes = ReversedVolumeTable::build(model, protocol, cells, depth, 100000, 32);
  const auto c = c_terms(stats, volumes);
  const auto exact = exact_terms(sys, depth);
  const double m = double(stats.total());
  for (int t = 0; t <= depth; ++t) {
    const auto& x = exact[std::size_t(t)];
    const auto& ct = c[std::size_t(t)];
    EXPECT_NEAR(ct.value, x.c_forward, 3.0 * ct.stderr + 1e-12) << t;
    const auto marginal = stats.marginal(t);
    const Estimate d = d_term(sys.volumes, marginal, stats.total());
    EXPECT_NEAR(d.value, x.d, 3.0 * d.stderr + 1e-12) << t;
    const ConditionalEntropy h = conditional_entropy_stats(stats, t);
    EXPECT_NEAR(h.value, x.conditional_entropy, 3.0 * h.stderr + h.bias_bound + 1e-12) << t;
    // E S[rho_cg] over histories; binomial noise on the few block weights.
    EXPECT_NEAR(coarse_grained_entropy(stats, sys.volumes, t), x.coarse_differential, 10.0 / std::sqrt(m)) << t;
  }
}
