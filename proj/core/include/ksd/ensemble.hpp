#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "ksd/estimate.hpp"
#include "ksd/partition.hpp"
#include "ksd/system.hpp"

namespace ksd {

// beta = 0 means the uniform state on the (bounded) domain.
struct CanonicalSpec {
  double beta = 0.0;
  double lambda0 = 0.0;
  std::size_t samples = 0;
  std::uint64_t seed = 0;
};

struct Ensemble {
  std::vector<PhaseState> states;
  std::size_t size() const { return states.size(); }
};

// i.i.d. draws from exp(-beta H)/Z. Exact for the oscillator, rejection
// against the uniform proposal otherwise. Sample i depends only on
// (seed, i / kChunkSize), never on the thread count.
Ensemble sample_canonical(const SystemModel& system, const CanonicalSpec& spec, unsigned threads = 1);

// Every state advanced by `steps` steps of the protocol.
Ensemble evolve_ensemble(const SystemModel& system, const ControlProtocol& protocol,
                         const Ensemble& ensemble, int steps, unsigned threads = 1);

struct QuadratureResult {
  double value = 0.0;
  double error = 0.0;    // change between the last two resolutions
  int resolution = 0;    // midpoints per axis
};

struct QuadratureNode {
  PhaseState state;
  double weight = 0.0;  // volume element
};

// Midpoint nodes over the chart (or the system's quadrature box).
std::vector<QuadratureNode> quadrature_nodes(const SystemModel& system, double beta, double lambda,
                                             int per_axis);

// Z(lambda) = ∫ exp(-beta H) ds, resolution doubled until the relative change is < 1e-6.
QuadratureResult partition_function(const SystemModel& system, double beta, double lambda);
// <H> under the canonical density.
QuadratureResult mean_energy(const SystemModel& system, double beta, double lambda);
// -∫ rho ln rho evaluated directly on the quadrature grid.
QuadratureResult differential_entropy(const SystemModel& system, double beta, double lambda);

// F = -ln(Z) / beta. Throws ConfigError at beta = 0.
double free_energy(double beta, double z);

// S[rho_0] = beta(<H> - F) = ln Z + beta <H>; ln v(Gamma) at beta = 0.
double canonical_entropy(const SystemModel& system, double beta, double lambda);

// Fraction of evolved samples in the cell at time t.
Estimate pushforward_cell_probability(const Ensemble& ensemble, const SystemModel& system,
                                      const ControlProtocol& protocol, const Partition& partition,
                                      int cell, int t, unsigned threads = 1);

// CSV with header sample_id,<coordinates...>.
void write_state_table(std::ostream& os, const Ensemble& ensemble);
Ensemble read_state_table(std::istream& is);

}  // namespace ksd
