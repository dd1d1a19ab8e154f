#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ksd/ensemble.hpp"
#include "ksd/estimate.hpp"
#include "ksd/path_stats.hpp"

namespace ksd {

// z(x) = -x ln x with z(0) = 0.
double z_log(double x);

// S = sum z(p). Throws InvariantViolation on negative entries or a sum off by more than 1e-9.
double partition_entropy(std::span<const double> probabilities);

// Symbolizes every ensemble member over `depth` steps.
PathStats collect_path_stats(const SystemModel& system, const ControlProtocol& protocol,
                             const Partition& partition, const Ensemble& ensemble, int depth,
                             unsigned threads = 1);

// One orbit of `windows + depth` states from s0 at fixed lambda, counted
// with sliding windows.
PathStats collect_orbit_stats(const SystemModel& system, double lambda, const Partition& partition,
                              const PhaseState& s0, std::size_t windows, int depth,
                              std::size_t burn_in = 1000);

struct CurveOptions {
  bool miller_madow = true;
  // A block length is reliable while samples / distinct blocks >= min_mean_count.
  // With min_mean_count <= 0 the square-root rule (distinct <= sqrt(samples)) is used.
  double min_mean_count = 20.0;
};

// H_L = entropy of blocks of length L, L = 1..depth+1.
struct BlockEntropyCurve {
  std::vector<double> entropy;  // bias-corrected when miller_madow, capped at L ln|A|
  std::vector<double> plugin;
  std::vector<std::size_t> distinct;
  std::vector<bool> flagged;
  std::uint64_t samples = 0;
  std::size_t alphabet = 1;
  bool miller_madow = true;
  std::string rule;

  int max_length() const { return static_cast<int>(entropy.size()); }
  // H_0 = 0.
  double at(int length) const { return length == 0 ? 0.0 : entropy.at(std::size_t(length - 1)); }
  double increment(int length) const { return at(length) - at(length - 1); }
  // Longest L with every length up to L unflagged.
  int reliable_length() const;
};

BlockEntropyCurve block_entropy_curve(const PathStats& stats, const CurveOptions& options = {});

struct NamedCurve {
  std::string partition_id;
  BlockEntropyCurve curve;
};

struct KseOptions {
  int tail = 3;                      // increments averaged at the deep end of the reliable range
  double agreement_tolerance = 0.05; // quotient vs increment, as a fraction of ln|A|
};

struct PartitionRate {
  std::string partition_id;
  std::size_t cells = 0;
  bool reliable = false;
  int reliable_length = 0;
  int window_first = 0;  // block lengths whose increments form the window
  int window_last = 0;
  double rate = 0.0;     // mean increment over the window
  double spread = 0.0;   // sample standard deviation of those increments
  double quotient = 0.0; // H_L / L at the reliable length
  double agreement_gap = 0.0;
  bool agree = false;
};

struct KseEstimate {
  std::vector<PartitionRate> partitions;
  double h = 0.0;
  double stderr = 0.0;
  std::string best_partition;
  std::string family;
  std::string rule;
};

// h = max over reliable partitions of the windowed increment rate.
// Throws EstimatorRefusal when no partition has two reliable lengths.
KseEstimate kse_estimate(std::span<const NamedCurve> curves, const KseOptions& options = {});

// v~(a_{t-1}..a_0 | a_t) for every backward itinerary seen among uniform
// samples on the domain. The k-th inverse step from time t uses lambda_{t-k}.
class ReversedVolumeTable {
 public:
  static ReversedVolumeTable build(const SystemModel& system, const ControlProtocol& protocol,
                                   const Partition& partition, int depth, std::size_t samples,
                                   std::uint64_t seed, unsigned threads = 1);

  int depth() const { return static_cast<int>(tables_.size()) - 1; }
  std::size_t samples() const { return samples_; }
  // Block key in forward order (a_0..a_t). t = 0 gives exactly 1.
  Estimate conditional_volume(int t, BlockKey key) const;
  std::uint64_t cell_samples(int t, Symbol cell) const;

 private:
  int bits_ = 0;
  std::size_t samples_ = 0;
  std::vector<std::vector<BlockCount>> tables_;
  std::vector<std::vector<std::uint64_t>> cell_counts_;
};

struct CTerm {
  double value = 0.0;
  double stderr = 0.0;
  double omitted_mass = 0.0;  // Good-Turing estimate of unobserved block mass
};

// c_t = 1 - sum over observed blocks of p(a_t | history) v~(history | a_t); c_0 = 0.
CTerm c_term(const PathStats& stats, const ReversedVolumeTable& volumes, int t);
std::vector<CTerm> c_terms(const PathStats& stats, const ReversedVolumeTable& volumes);

// d_t = -sum p(a) ln v(a).
Estimate d_term(std::span<const double> volumes, std::span<const double> probabilities,
                std::uint64_t samples);

// I = h - c - d with propagated error.
Estimate info_term(Estimate h, Estimate c_bar, Estimate d_bar);

// H(a_t | a_0..a_{t-1}) averaged over histories; H(a_0) at t = 0.
double conditional_entropy(const PathStats& stats, int t);

// The same plug-in value with its delta-method standard error and a bound
// on its downward bias: over k free block probabilities the plug-in
// deficit is about chi2_k / 2M, bounded here by (k + 3 sqrt(2k)) / 2M.
struct ConditionalEntropy {
  double value = 0.0;
  double stderr = 0.0;
  double bias_bound = 0.0;
};
ConditionalEntropy conditional_entropy_stats(const PathStats& stats, int t);

// Expected differential entropy of the conditional coarse-grained density,
// sum_hist p(hist) S[rho_cg(.|hist)].
double coarse_grained_entropy(const PathStats& stats, std::span<const double> volumes, int t);

}  // namespace ksd
