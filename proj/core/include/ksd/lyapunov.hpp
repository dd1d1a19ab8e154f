#pragma once

#include <cstdint>
#include <vector>

#include "ksd/system.hpp"

namespace ksd {

struct LyapunovOptions {
  std::size_t iterations = 1'000'000;
  int reorth_period = 1;
  std::size_t transient = 1000;
  std::size_t trace_every = 1000;
  std::uint64_t seed = 0;
};

struct LyapunovSample {
  std::size_t iteration = 0;
  std::vector<double> exponents;
};

struct LyapunovReport {
  std::vector<double> exponents;  // descending, nats per step
  std::size_t iterations = 0;
  int reorth_period = 1;
  std::vector<LyapunovSample> history;
  double leading_stderr = 0.0;  // batch-means error of the leading exponent

  // Last two running estimates differ by less than tol in every exponent.
  bool converged(double tol = 1e-3) const;
};

// Tangent vectors are projected onto the tangent space after every step
// and Gram-Schmidt reorthonormalized every reorth_period steps.
LyapunovReport lyapunov_spectrum(const SystemModel& system, double lambda, const PhaseState& s0,
                                 const LyapunovOptions& options = {});

// Sum of positive exponents. Throws EstimatorRefusal for non-converged reports.
double pesin_kse(const LyapunovReport& report);

}  // namespace ksd
