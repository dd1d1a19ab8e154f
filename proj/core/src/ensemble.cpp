#include "ksd/ensemble.hpp"

#include <spdlog/spdlog.h>

#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include "ksd/errors.hpp"
#include "ksd/parallel.hpp"

namespace ksd {

namespace {

constexpr int kFirstResolution = 32;
constexpr int kMaxResolution = 4096;
constexpr double kQuadratureTolerance = 1e-6;

struct Moments {
  double z = 0.0;
  double mean_h = 0.0;
  double entropy = 0.0;
};

Moments moments_at(const SystemModel& system, double beta, double lambda, int n) {
  const auto nodes = quadrature_nodes(system, beta, lambda, n);
  const double emin = system.energy_lower_bound(lambda);
  double s0 = 0.0, s1 = 0.0;
  std::vector<double> g(nodes.size());
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const double h = system.hamiltonian(nodes[i].state, lambda);
    g[i] = std::exp(-beta * (h - emin));
    s0 += nodes[i].weight * g[i];
    s1 += nodes[i].weight * g[i] * h;
  }
  double ent = 0.0;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const double rho = g[i] / s0;
    if (rho > 0.0) ent -= nodes[i].weight * rho * std::log(rho);
  }
  return {s0 * std::exp(-beta * emin), s1 / s0, ent};
}

template <class Pick>
QuadratureResult converge(const SystemModel& system, double beta, double lambda, Pick pick) {
  if (beta < 0.0) throw ConfigError("beta must be nonnegative");
  int n = kFirstResolution;
  double prev = pick(moments_at(system, beta, lambda, n));
  for (;;) {
    const int next = 2 * n;
    const double cur = pick(moments_at(system, beta, lambda, next));
    const double change = std::abs(cur - prev);
    if (change <= kQuadratureTolerance * std::max(std::abs(cur), 1e-300) || next >= kMaxResolution) {
      if (change > kQuadratureTolerance * std::max(std::abs(cur), 1e-300))
        spdlog::warn("quadrature for {} stopped at {} nodes per axis, change {:.3g}", system.name(),
                     next, change);
      return {cur, change, next};
    }
    prev = cur;
    n = next;
  }
}

const char* coordinate_header(int dim) {
  switch (dim) {
    case 1: return "sample_id,x";
    case 3: return "sample_id,x,y,z";
    default: return "sample_id,q,theta";
  }
}

}  // namespace

std::vector<QuadratureNode> quadrature_nodes(const SystemModel& system, double beta, double lambda,
                                             int per_axis) {
  std::vector<QuadratureNode> nodes;
  const int n = std::max(per_axis, 1);
  if (const auto box = system.quadrature_box(beta, lambda)) {
    const double dq = (box->q_hi - box->q_lo) / n, dp = (box->p_hi - box->p_lo) / n;
    nodes.reserve(std::size_t(n) * std::size_t(n));
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        const PhaseState s = PhaseState::planar(box->q_lo + (i + 0.5) * dq, box->p_lo + (j + 0.5) * dp);
        if (system.in_domain(s)) nodes.push_back({s, dq * dp});
      }
    }
    return nodes;
  }
  const Chart c = system.chart();
  const double scale = system.domain_volume() / c.area();
  const double da = (c.a_hi() - c.a_lo()) / n;
  if (c.kind == ChartKind::kInterval) {
    for (int i = 0; i < n; ++i)
      nodes.push_back({from_chart(c, {c.a_lo() + (i + 0.5) * da, 0.5}), da * (c.b_hi() - c.b_lo()) * scale});
    return nodes;
  }
  const double db = (c.b_hi() - c.b_lo()) / n;
  nodes.reserve(std::size_t(n) * std::size_t(n));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      nodes.push_back({from_chart(c, {c.a_lo() + (i + 0.5) * da, c.b_lo() + (j + 0.5) * db}), da * db * scale});
  return nodes;
}

QuadratureResult partition_function(const SystemModel& system, double beta, double lambda) {
  if (beta == 0.0) return {system.domain_volume(), 0.0, 0};
  return converge(system, beta, lambda, [](const Moments& m) { return m.z; });
}

QuadratureResult mean_energy(const SystemModel& system, double beta, double lambda) {
  return converge(system, beta, lambda, [](const Moments& m) { return m.mean_h; });
}

QuadratureResult differential_entropy(const SystemModel& system, double beta, double lambda) {
  if (beta == 0.0) return {std::log(system.domain_volume()), 0.0, 0};
  return converge(system, beta, lambda, [](const Moments& m) { return m.entropy; });
}

double free_energy(double beta, double z) {
  if (!(beta > 0.0)) throw ConfigError("free energy is undefined at beta = 0");
  if (!(z > 0.0)) throw ConfigError("partition function must be positive");
  return -std::log(z) / beta;
}

double canonical_entropy(const SystemModel& system, double beta, double lambda) {
  if (beta == 0.0) return std::log(system.domain_volume());
  const double z = partition_function(system, beta, lambda).value;
  const double h = mean_energy(system, beta, lambda).value;
  return std::log(z) + beta * h;
}

Ensemble sample_canonical(const SystemModel& system, const CanonicalSpec& spec, unsigned threads) {
  if (!(spec.beta >= 0.0)) throw ConfigError("beta must be nonnegative");
  if (spec.samples == 0) throw ConfigError("ensemble needs samples > 0");

  Engine probe(0);
  const bool exact = system.sample_canonical_exact(spec.beta, spec.lambda0, probe).has_value();
  const double emin = system.energy_lower_bound(spec.lambda0);
  if (!exact && spec.beta > 0.0) {
    const double z = partition_function(system, spec.beta, spec.lambda0).value;
    const double acceptance = z * std::exp(spec.beta * emin) / system.domain_volume();
    if (acceptance < 1e-4)
      throw ConfigError("rejection acceptance " + std::to_string(acceptance) +
                        " below 1e-4; beta too large for " + system.name());
  }

  Ensemble out;
  out.states.resize(spec.samples);
  const std::size_t chunks = chunk_count(spec.samples, kChunkSize);
  parallel_for(chunks, threads, [&](std::size_t k) {
    Engine rng = substream(spec.seed, Stream::kEnsemble, k);
    const std::size_t end = std::min(spec.samples, (k + 1) * kChunkSize);
    for (std::size_t i = k * kChunkSize; i < end; ++i) {
      if (exact) {
        int tries = 0;
        for (;;) {
          PhaseState s = *system.sample_canonical_exact(spec.beta, spec.lambda0, rng);
          if (system.in_domain(s)) {
            out.states[i] = s;
            break;
          }
          if (++tries > 1000) throw DomainError("canonical draws keep leaving the domain");
        }
      } else {
        for (;;) {
          PhaseState s = system.sample_uniform(rng);
          if (spec.beta == 0.0 ||
              uniform01(rng) < std::exp(-spec.beta * (system.hamiltonian(s, spec.lambda0) - emin))) {
            out.states[i] = s;
            break;
          }
        }
      }
    }
  });
  return out;
}

Ensemble evolve_ensemble(const SystemModel& system, const ControlProtocol& protocol,
                         const Ensemble& ensemble, int steps, unsigned threads) {
  if (steps > protocol.horizon()) throw ConfigError("evolution beyond the protocol horizon");
  Ensemble out;
  out.states.resize(ensemble.size());
  parallel_for(chunk_count(ensemble.size(), kChunkSize), threads, [&](std::size_t k) {
    const std::size_t end = std::min(ensemble.size(), (k + 1) * kChunkSize);
    for (std::size_t i = k * kChunkSize; i < end; ++i) {
      PhaseState s = ensemble.states[i];
      for (int t = 0; t < steps; ++t) s = system.step(s, protocol.at(t));
      if (!s.finite() || !system.in_domain(s))
        throw DomainError(system.name() + " sample " + std::to_string(i) + " left the domain");
      out.states[i] = s;
    }
  });
  return out;
}

Estimate pushforward_cell_probability(const Ensemble& ensemble, const SystemModel& system,
                                      const ControlProtocol& protocol, const Partition& partition,
                                      int cell, int t, unsigned threads) {
  if (ensemble.size() == 0) throw ConfigError("empty ensemble");
  const Ensemble moved = evolve_ensemble(system, protocol, ensemble, t, threads);
  std::size_t hits = 0;
  for (const auto& s : moved.states) hits += partition.locate(s) == cell ? 1 : 0;
  const double n = double(ensemble.size());
  const double p = double(hits) / n;
  return {p, std::sqrt(p * (1.0 - p) / n)};
}

void write_state_table(std::ostream& os, const Ensemble& ensemble) {
  const int dim = ensemble.states.empty() ? 2 : ensemble.states.front().dim;
  os << coordinate_header(dim) << '\n';
  char buf[32];
  for (std::size_t i = 0; i < ensemble.size(); ++i) {
    os << i;
    for (int d = 0; d < dim; ++d) {
      std::snprintf(buf, sizeof buf, "%.17g", ensemble.states[i].x[std::size_t(d)]);
      os << ',' << buf;
    }
    os << '\n';
  }
}

Ensemble read_state_table(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw ConfigError("state table is empty");
  int dim = 0;
  for (int d : {1, 2, 3})
    if (line == coordinate_header(d)) dim = d;
  if (dim == 0) throw ConfigError("unrecognised state table header '" + line + "'");
  Ensemble out;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string field;
    std::getline(row, field, ',');
    PhaseState s{{0.0, 0.0, 0.0}, dim};
    for (int d = 0; d < dim; ++d) {
      if (!std::getline(row, field, ',')) throw ConfigError("short state table row: " + line);
      s.x[std::size_t(d)] = std::stod(field);
    }
    out.states.push_back(s);
  }
  return out;
}

}  // namespace ksd
