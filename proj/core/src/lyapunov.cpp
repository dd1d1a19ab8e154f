#include "ksd/lyapunov.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <string>

#include "ksd/errors.hpp"

namespace ksd {

bool LyapunovReport::converged(double tol) const {
  if (history.size() < 2) return false;
  const auto& a = history[history.size() - 1].exponents;
  const auto& b = history[history.size() - 2].exponents;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (std::abs(a[i] - b[i]) >= tol) return false;
  return true;
}

namespace {

// Modified Gram-Schmidt; returns the norms removed from each vector.
std::vector<double> orthonormalize(std::vector<Eigen::Vector3d>& v) {
  std::vector<double> norms(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    for (std::size_t j = 0; j < i; ++j) v[i] -= v[i].dot(v[j]) * v[j];
    norms[i] = v[i].norm();
    if (!std::isfinite(norms[i]) || norms[i] > 1e300)
      throw ConfigError("tangent vectors overflowed between reorthonormalizations; shorten the period");
    if (norms[i] == 0.0) throw InvariantViolation("tangent vector collapsed to zero");
    v[i] /= norms[i];
  }
  return norms;
}

}  // namespace

LyapunovReport lyapunov_spectrum(const SystemModel& system, double lambda, const PhaseState& s0,
                                 const LyapunovOptions& options) {
  if (options.reorth_period < 1) throw ConfigError("reorthonormalization period must be >= 1");
  if (options.iterations == 0) throw ConfigError("lyapunov needs iterations > 0");
  if (!system.in_domain(s0)) throw DomainError("lyapunov start outside the domain");

  const int d = system.tangent_dimension();
  Engine rng = substream(options.seed, Stream::kLyapunov, 0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<Eigen::Vector3d> v(static_cast<std::size_t>(d));
  for (auto& x : v) {
    x = Eigen::Vector3d(gauss(rng), gauss(rng), s0.dim == 3 ? gauss(rng) : 0.0);
    x = system.project_tangent(s0, x);
  }
  orthonormalize(v);

  PhaseState s = s0;
  auto advance = [&] {
    const Eigen::Matrix3d J = system.tangent(s, lambda);
    s = system.step(s, lambda);
    for (auto& x : v) x = system.project_tangent(s, J * x);
  };
  for (std::size_t i = 0; i < options.transient; ++i) {
    advance();
    orthonormalize(v);
  }

  LyapunovReport report;
  report.iterations = options.iterations;
  report.reorth_period = options.reorth_period;
  std::vector<double> sums(static_cast<std::size_t>(d), 0.0);
  constexpr int kBatches = 10;
  const std::size_t batch_len = std::max<std::size_t>(1, options.iterations / kBatches);
  std::vector<double> batch_sums;
  double batch_acc = 0.0;
  std::size_t batch_steps = 0;

  for (std::size_t i = 1; i <= options.iterations; ++i) {
    advance();
    if (i % std::size_t(options.reorth_period) == 0 || i == options.iterations) {
      const auto norms = orthonormalize(v);
      for (std::size_t j = 0; j < norms.size(); ++j) sums[j] += std::log(norms[j]);
      batch_acc += std::log(norms[0]);
    }
    if (++batch_steps == batch_len) {
      batch_sums.push_back(batch_acc / double(batch_len));
      batch_acc = 0.0;
      batch_steps = 0;
    }
    if (options.trace_every > 0 && (i % options.trace_every == 0 || i == options.iterations)) {
      LyapunovSample sample{i, {}};
      for (double x : sums) sample.exponents.push_back(x / double(i));
      std::sort(sample.exponents.begin(), sample.exponents.end(), std::greater<>());
      if (report.history.empty() || report.history.back().iteration != i)
        report.history.push_back(std::move(sample));
    }
  }
  for (double x : sums) report.exponents.push_back(x / double(options.iterations));
  std::sort(report.exponents.begin(), report.exponents.end(), std::greater<>());

  if (batch_sums.size() >= 2) {
    double mean = 0.0;
    for (double b : batch_sums) mean += b;
    mean /= double(batch_sums.size());
    double ss = 0.0;
    for (double b : batch_sums) ss += (b - mean) * (b - mean);
    report.leading_stderr = std::sqrt(ss / double(batch_sums.size() - 1) / double(batch_sums.size()));
  }
  return report;
}

double pesin_kse(const LyapunovReport& report) {
  if (!report.converged())
    throw EstimatorRefusal("Lyapunov report not converged: last two running estimates differ by >= 1e-3");
  double h = 0.0;
  for (double x : report.exponents)
    if (x > 0.0) h += x;
  return h;
}

}  // namespace ksd
