#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ksd/ensemble.hpp"
#include "ksd/entropy.hpp"
#include "ksd/estimate.hpp"

namespace ksd {

struct WorkRecord {
  std::vector<double> work;  // W = H(s_T; lambda_T) - H(s_0; lambda_0) per trajectory
  Estimate mean_work;
  double delta_f = 0.0;      // F(lambda_T) - F(lambda_0)
  Estimate dissipated;       // <W> - delta_f
  Estimate initial_energy;   // <H>_{rho_0}
  Estimate final_energy;     // <H>_{rho_T}
  double beta = 0.0;
  int horizon = 0;
};

// Throws ConfigError at beta = 0 with a driven protocol (no free energy).
WorkRecord work_ensemble(const SystemModel& system, const ControlProtocol& protocol,
                         const Ensemble& ensemble, double beta, unsigned threads = 1);

struct JarzynskiResult {
  double mean_exp_work = 0.0;  // <exp(-beta W)>
  double target = 0.0;         // exp(-beta delta_f)
  double deviation = 0.0;
  double stderr = 0.0;         // bootstrap
  bool pass = false;           // deviation <= 3 stderr (+1e-9 absolute)
};

JarzynskiResult jarzynski_check(const WorkRecord& record, double beta, std::uint64_t seed = 0,
                                int resamples = 200);

struct CellHistogram {
  std::vector<double> probability;
  std::uint64_t samples = 0;  // 0 marks an exact (quadrature) histogram
};

CellHistogram cell_histogram(std::span<const PhaseState> states, const Partition& partition);

// Exact canonical cell probabilities by per-cell quadrature on the chart
// (node binning when the partition has no geometry).
CellHistogram canonical_cell_probabilities(const SystemModel& system, const Partition& partition,
                                           double beta, double lambda);

// Backward protocol: step k uses lambda_{T-1-k}.
ControlProtocol backward_protocol(const ControlProtocol& protocol);

// Backward-process density at forward time t_c, momenta reversed back:
// canonical at lambda_T, evolved T - t_c steps under the backward protocol,
// then mapped through the time reversal. Exact at t_c = T.
CellHistogram backward_histogram(const SystemModel& system, const ControlProtocol& protocol,
                                 const Partition& partition, double beta, int comparison_time,
                                 std::size_t samples, std::uint64_t seed, unsigned threads = 1);

struct RelativeEntropyEstimate {
  double value = 0.0;
  double stderr = 0.0;
  std::size_t clipped = 0;  // cells with forward mass but no backward mass
};

// Coarse-grained S(rho || rho~) on one partition.
RelativeEntropyEstimate relative_entropy_dissipation(const CellHistogram& forward,
                                                     const CellHistogram& backward);

struct BoundOptions {
  int depth = 32;
  CurveOptions curve;
  std::size_t volume_samples = 100000;
  std::uint64_t seed = 0;
  unsigned threads = 1;
};

// Per-time series t = 0..T behind one bound report.
struct BoundSeries {
  std::vector<double> lhs;       // beta <W_d>_t
  std::vector<double> lhs_err;
  std::vector<double> energy;    // beta (<H>_t - F_t)
  std::vector<double> energy_err;
  std::vector<CTerm> c;
  std::vector<Estimate> d;
  std::vector<double> conditional_entropy;  // H(a_t | history)
  std::vector<double> conditional_err;      // its standard error
  std::vector<double> conditional_bias;     // bound on its plug-in deficit
  std::vector<double> coarse_entropy;       // E S[rho_cg], differential
  std::vector<double> marginal_entropy;     // S of p_t over cells
  BlockEntropyCurve curve;                  // block lengths 1..T+1 of the same paths
  double shared_noise = 0.0;  // beta * stderr of <H>_0, common to lhs and energy
};

struct BoundReport {
  std::string partition_id;
  std::string system;
  int horizon = 0;
  double beta = 0.0;
  double entropy_s0 = 0.0;
  bool energy_identity = false;  // beta(<H> - F) = S0 used exactly
  Estimate lhs;
  Estimate energy_term;
  Estimate h;
  Estimate c_bar;
  Estimate d_bar;
  Estimate info;
  Estimate rhs;
  Estimate slack;
  double omitted_mass = 0.0;  // largest Good-Turing unobserved mass over t
  // H(a_t|history) - S0 - c_t - d_t for t = 0..T; tolerance 3 sigma of the
  // three terms plus the plug-in entropy deficit bound.
  std::vector<double> appendix_gap;
  std::vector<double> appendix_tolerance;
  BoundSeries series;
};

BoundReport bound_report(const SystemModel& system, const ControlProtocol& protocol,
                         const Partition& partition, const Ensemble& ensemble,
                         const CanonicalSpec& canonical, Estimate h, const BoundOptions& options);

// Report restricted to the first `horizon` steps of an existing series.
BoundReport assemble_bound(const BoundReport& full, int horizon);

}  // namespace ksd
