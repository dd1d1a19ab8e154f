#include "ksd/thermo.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>
#include <string>

#include "ksd/errors.hpp"
#include "ksd/parallel.hpp"

namespace ksd {

namespace {

Estimate mean_of(const std::vector<double>& x) {
  const double n = double(x.size());
  const double m = std::accumulate(x.begin(), x.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : x) ss += (v - m) * (v - m);
  return {m, x.size() > 1 ? std::sqrt(ss / (n - 1.0) / n) : 0.0};
}

bool driven_within(const ControlProtocol& protocol, int horizon) {
  for (int t = 1; t <= horizon; ++t)
    if (protocol.at(t) != protocol.at(0)) return true;
  return false;
}

// Free energies per distinct lambda, computed once.
class FreeEnergyCache {
 public:
  FreeEnergyCache(const SystemModel& system, double beta) : system_(system), beta_(beta) {}
  double operator()(double lambda) {
    auto it = cache_.find(lambda);
    if (it != cache_.end()) return it->second;
    const double f = free_energy(beta_, partition_function(system_, beta_, lambda).value);
    cache_.emplace(lambda, f);
    return f;
  }

 private:
  const SystemModel& system_;
  double beta_;
  std::map<double, double> cache_;
};

}  // namespace

WorkRecord work_ensemble(const SystemModel& system, const ControlProtocol& protocol,
                         const Ensemble& ensemble, double beta, unsigned threads) {
  if (ensemble.size() == 0) throw ConfigError("empty ensemble");
  const int T = protocol.horizon();
  const bool driven = driven_within(protocol, T);
  if (beta == 0.0 && driven) throw ConfigError("free energy unavailable at beta = 0 with driving");

  WorkRecord rec;
  rec.beta = beta;
  rec.horizon = T;
  rec.work.resize(ensemble.size());
  std::vector<double> h0(ensemble.size()), hT(ensemble.size());
  const double l0 = protocol.initial(), lT = protocol.final();
  parallel_for(chunk_count(ensemble.size(), kChunkSize), threads, [&](std::size_t k) {
    const std::size_t end = std::min(ensemble.size(), (k + 1) * kChunkSize);
    for (std::size_t i = k * kChunkSize; i < end; ++i) {
      PhaseState s = ensemble.states[i];
      for (int t = 0; t < T; ++t) s = system.step(s, protocol.at(t));
      if (!system.in_domain(s)) throw DomainError("work trajectory left the domain");
      h0[i] = system.hamiltonian(ensemble.states[i], l0);
      hT[i] = system.hamiltonian(s, lT);
      rec.work[i] = hT[i] - h0[i];
    }
  });
  rec.mean_work = mean_of(rec.work);
  rec.initial_energy = mean_of(h0);
  rec.final_energy = mean_of(hT);
  if (beta > 0.0 && lT != l0) {
    FreeEnergyCache f(system, beta);
    rec.delta_f = f(lT) - f(l0);
  }
  rec.dissipated = {rec.mean_work.value - rec.delta_f, rec.mean_work.stderr};
  return rec;
}

JarzynskiResult jarzynski_check(const WorkRecord& record, double beta, std::uint64_t seed, int resamples) {
  if (!(beta > 0.0)) throw ConfigError("Jarzynski check needs beta > 0");
  if (record.work.empty()) throw ConfigError("empty work record");
  const std::size_t n = record.work.size();
  std::vector<double> e(n);
  for (std::size_t i = 0; i < n; ++i) e[i] = std::exp(-beta * record.work[i]);
  JarzynskiResult r;
  r.mean_exp_work = std::accumulate(e.begin(), e.end(), 0.0) / double(n);
  r.target = std::exp(-beta * record.delta_f);
  r.deviation = std::abs(r.mean_exp_work - r.target);

  Engine rng = substream(seed, Stream::kBootstrap, 0);
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  std::vector<double> means(static_cast<std::size_t>(std::max(resamples, 2)));
  for (auto& m : means) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += e[pick(rng)];
    m = s / double(n);
  }
  const Estimate spread = mean_of(means);
  r.stderr = spread.stderr * std::sqrt(double(means.size()));
  r.pass = r.deviation <= 3.0 * r.stderr + 1e-9;
  return r;
}

CellHistogram cell_histogram(std::span<const PhaseState> states, const Partition& partition) {
  if (states.empty()) throw ConfigError("histogram of an empty ensemble");
  CellHistogram h;
  h.samples = states.size();
  std::vector<std::uint64_t> counts(partition.size(), 0);
  for (const auto& s : states) {
    const int id = partition.locate(s);
    if (id < 0) throw ConfigError("state outside partition " + partition.id());
    ++counts[std::size_t(id)];
  }
  h.probability.resize(counts.size());
  for (std::size_t i = 0; i < counts.size(); ++i) h.probability[i] = double(counts[i]) / double(h.samples);
  return h;
}

CellHistogram canonical_cell_probabilities(const SystemModel& system, const Partition& partition,
                                           double beta, double lambda) {
  const double emin = system.energy_lower_bound(lambda);
  const Chart c = partition.chart();
  CellHistogram out;
  out.probability.assign(partition.size(), 0.0);
  const bool geometric = std::all_of(partition.cells().begin(), partition.cells().end(),
                                     [](const Cell& x) { return !x.geometry.empty(); });
  if (geometric) {
    auto integrate = [&](const ChartRect& r, int n) {
      const double da = (r.a1 - r.a0) / n, db = (r.b1 - r.b0) / n;
      double s = 0.0;
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
          const PhaseState x = from_chart(c, {r.a0 + (i + 0.5) * da, r.b0 + (j + 0.5) * db});
          s += std::exp(-beta * (system.hamiltonian(x, lambda) - emin));
        }
      return s * da * db;
    };
    for (const auto& cell : partition.cells()) {
      double mass = 0.0;
      for (const auto& r : cell.geometry) {
        int n = 8;
        double prev = integrate(r, n);
        for (;;) {
          const double cur = integrate(r, 2 * n);
          n *= 2;
          const bool done = std::abs(cur - prev) <= 1e-10 * r.area() || n >= 512;
          prev = cur;
          if (done) break;
        }
        mass += prev;
      }
      out.probability[std::size_t(cell.id)] = mass;
    }
  } else {
    for (const auto& node : quadrature_nodes(system, beta, lambda, 1024)) {
      const int id = partition.locate(node.state);
      if (id >= 0)
        out.probability[std::size_t(id)] +=
            node.weight * std::exp(-beta * (system.hamiltonian(node.state, lambda) - emin));
    }
  }
  const double total = std::accumulate(out.probability.begin(), out.probability.end(), 0.0);
  for (double& p : out.probability) p /= total;
  return out;
}

ControlProtocol backward_protocol(const ControlProtocol& protocol) {
  const int T = protocol.horizon();
  std::vector<double> v(static_cast<std::size_t>(T) + 1);
  for (int k = 0; k < T; ++k) v[std::size_t(k)] = protocol.at(T - 1 - k);
  v[std::size_t(T)] = protocol.at(0);
  return ControlProtocol::from_values(std::move(v));
}

CellHistogram backward_histogram(const SystemModel& system, const ControlProtocol& protocol,
                                 const Partition& partition, double beta, int comparison_time,
                                 std::size_t samples, std::uint64_t seed, unsigned threads) {
  const int T = protocol.horizon();
  if (comparison_time < 0 || comparison_time > T) throw ConfigError("comparison time outside [0, T]");
  if (samples == 0) {
    if (comparison_time != T) throw ConfigError("exact backward histogram only at the protocol end");
    return canonical_cell_probabilities(system, partition, beta, protocol.final());
  }
  const Ensemble start = sample_canonical(system, {beta, protocol.final(), samples, seed}, threads);
  const Ensemble moved = evolve_ensemble(system, backward_protocol(protocol), start, T - comparison_time, threads);
  std::vector<PhaseState> flipped(moved.states.size());
  for (std::size_t i = 0; i < flipped.size(); ++i) flipped[i] = system.time_reversed(moved.states[i]);
  return cell_histogram(flipped, partition);
}

RelativeEntropyEstimate relative_entropy_dissipation(const CellHistogram& forward,
                                                     const CellHistogram& backward) {
  if (forward.probability.size() != backward.probability.size())
    throw ConfigError("histograms on different partitions");
  RelativeEntropyEstimate r;
  double d = 0.0, m2 = 0.0, back2 = 0.0;
  for (std::size_t i = 0; i < forward.probability.size(); ++i) {
    const double p = forward.probability[i], q = backward.probability[i];
    if (p <= 0.0) continue;
    if (q <= 0.0) {
      ++r.clipped;
      continue;
    }
    const double l = std::log(p / q);
    d += p * l;
    m2 += p * l * l;
    back2 += p * p / q;
  }
  double var = 0.0;
  if (forward.samples > 0) var += std::max(0.0, m2 - d * d) / double(forward.samples);
  if (backward.samples > 0) var += std::max(0.0, back2 - 1.0) / double(backward.samples);
  r.value = std::max(d, 0.0);
  r.stderr = std::sqrt(var);
  return r;
}

// ---------------------------------------------------------------- bound

BoundReport bound_report(const SystemModel& system, const ControlProtocol& protocol,
                         const Partition& partition, const Ensemble& ensemble,
                         const CanonicalSpec& canonical, Estimate h, const BoundOptions& options) {
  const int T = options.depth;
  if (T < 1) throw ConfigError("bound depth must be at least 1");
  if (T > protocol.horizon())
    throw ConfigError("bound depth " + std::to_string(T) + " exceeds protocol horizon " +
                      std::to_string(protocol.horizon()));
  if (ensemble.size() == 0) throw ConfigError("empty ensemble");
  if (!std::isfinite(h.value)) throw EstimatorRefusal("no KSE estimate available for the bound");
  const double beta = canonical.beta;
  const bool driven = driven_within(protocol, T);
  if (beta == 0.0 && driven) throw ConfigError("free energy unavailable at beta = 0 with driving");
  check_table_budget(partition.size(), T);

  // Evolve once: symbols for the path statistics, energies for the thermodynamic terms.
  const std::size_t M = ensemble.size();
  const std::size_t stride = std::size_t(T) + 1;
  const std::size_t chunks = chunk_count(M, kChunkSize);
  struct Partial {
    PathStats stats;
    std::vector<double> h_sum, h_sq, w_sum, w_sq;
    double max_abs_w = 0.0, abs_h0 = 0.0;
  };
  std::vector<Partial> parts(chunks);
  parallel_for(chunks, options.threads, [&](std::size_t k) {
    Partial& p = parts[k];
    p.h_sum.assign(stride, 0.0);
    p.h_sq.assign(stride, 0.0);
    p.w_sum.assign(stride, 0.0);
    p.w_sq.assign(stride, 0.0);
    const std::size_t begin = k * kChunkSize, end = std::min(M, begin + kChunkSize);
    std::vector<Symbol> rows((end - begin) * stride);
    for (std::size_t i = begin; i < end; ++i) {
      const Trajectory traj = evolve(system, ensemble.states[i], protocol, T);
      const double h0 = system.hamiltonian(traj[0], protocol.at(0));
      p.abs_h0 += std::abs(h0);
      for (int t = 0; t <= T; ++t) {
        const int id = partition.locate(traj[std::size_t(t)]);
        if (id < 0) throw ConfigError("state lies in no cell of partition " + partition.id());
        rows[(i - begin) * stride + std::size_t(t)] = Symbol(id);
        const double ht = system.hamiltonian(traj[std::size_t(t)], protocol.at(t));
        const double w = ht - h0;
        p.h_sum[std::size_t(t)] += ht;
        p.h_sq[std::size_t(t)] += ht * ht;
        p.w_sum[std::size_t(t)] += w;
        p.w_sq[std::size_t(t)] += w * w;
        p.max_abs_w = std::max(p.max_abs_w, std::abs(w));
      }
    }
    p.stats = PathStats::from_paths(rows, end - begin, stride, partition.size(), T);
  });
  PathStats stats = std::move(parts[0].stats);
  std::vector<double> h_sum(stride, 0.0), h_sq(stride, 0.0), w_sum(stride, 0.0), w_sq(stride, 0.0);
  double max_abs_w = 0.0, abs_h0 = 0.0;
  for (std::size_t k = 0; k < chunks; ++k) {
    if (k > 0) stats = PathStats::merge(stats, parts[k].stats);
    for (std::size_t t = 0; t < stride; ++t) {
      h_sum[t] += parts[k].h_sum[t];
      h_sq[t] += parts[k].h_sq[t];
      w_sum[t] += parts[k].w_sum[t];
      w_sq[t] += parts[k].w_sq[t];
    }
    max_abs_w = std::max(max_abs_w, parts[k].max_abs_w);
    abs_h0 += parts[k].abs_h0;
  }
  const double m = double(M);
  auto se = [&](double sum, double sq) {
    const double mean = sum / m;
    return M > 1 ? std::sqrt(std::max(0.0, sq / m - mean * mean) / (m - 1.0)) : 0.0;
  };

  BoundReport full;
  full.partition_id = partition.id();
  full.system = system.name();
  full.beta = beta;
  full.h = h;
  full.entropy_s0 = canonical_entropy(system, beta, protocol.at(0));
  full.energy_identity = beta == 0.0 || (!driven && max_abs_w <= 1e-9 * (1.0 + abs_h0 / m));

  BoundSeries& s = full.series;
  FreeEnergyCache free(system, beta > 0.0 ? beta : 1.0);
  const double f0 = beta > 0.0 ? free(protocol.at(0)) : 0.0;
  for (int t = 0; t <= T; ++t) {
    const std::size_t i = std::size_t(t);
    if (full.energy_identity) {
      s.lhs.push_back(beta * w_sum[i] / m);
      s.lhs_err.push_back(beta * se(w_sum[i], w_sq[i]));
      s.energy.push_back(full.entropy_s0);
      s.energy_err.push_back(0.0);
    } else {
      const double ft = free(protocol.at(t));
      s.lhs.push_back(beta * (w_sum[i] / m - (ft - f0)));
      s.lhs_err.push_back(beta * se(w_sum[i], w_sq[i]));
      s.energy.push_back(beta * (h_sum[i] / m - ft));
      s.energy_err.push_back(beta * se(h_sum[i], h_sq[i]));
    }
  }
  s.shared_noise = full.energy_identity ? 0.0 : beta * se(h_sum[0], h_sq[0]);

  const auto volumes = ReversedVolumeTable::build(system, protocol, partition, T, options.volume_samples,
                                                  options.seed, options.threads);
  s.c = c_terms(stats, volumes);
  s.curve = block_entropy_curve(stats, options.curve);
  const auto cell_volumes = partition.volumes();
  for (int t = 0; t <= T; ++t) {
    const auto marginal = stats.marginal(t);
    s.d.push_back(d_term(cell_volumes, marginal, stats.total()));
    const ConditionalEntropy ce = conditional_entropy_stats(stats, t);
    s.conditional_entropy.push_back(ce.value);
    s.conditional_err.push_back(ce.stderr);
    s.conditional_bias.push_back(ce.bias_bound);
    s.coarse_entropy.push_back(coarse_grained_entropy(stats, cell_volumes, t));
    s.marginal_entropy.push_back(partition_entropy(marginal));
  }
  return assemble_bound(full, T);
}

BoundReport assemble_bound(const BoundReport& full, int horizon) {
  const BoundSeries& s = full.series;
  const int available = static_cast<int>(s.lhs.size()) - 1;
  if (horizon < 1 || horizon > available) throw ConfigError("bound horizon outside the series");
  BoundReport r = full;
  r.horizon = horizon;
  const double n = double(horizon);
  auto avg = [&](auto get) {
    double v = 0.0;
    for (int t = 1; t <= horizon; ++t) v += get(std::size_t(t));
    return v / n;
  };
  r.lhs = {avg([&](std::size_t t) { return s.lhs[t]; }), avg([&](std::size_t t) { return s.lhs_err[t]; })};
  r.energy_term = {avg([&](std::size_t t) { return s.energy[t]; }),
                   avg([&](std::size_t t) { return s.energy_err[t]; })};
  // Errors of the Cesaro means are taken as the mean per-step error (fully correlated steps).
  r.c_bar = {avg([&](std::size_t t) { return s.c[t].value; }), avg([&](std::size_t t) { return s.c[t].stderr; })};
  r.d_bar = {avg([&](std::size_t t) { return s.d[t].value; }), avg([&](std::size_t t) { return s.d[t].stderr; })};
  r.info = info_term(r.h, r.c_bar, r.d_bar);
  r.rhs = {r.energy_term.value - r.info.value, std::hypot(r.energy_term.stderr, r.info.stderr)};
  r.slack.value = r.lhs.value - r.rhs.value;
  r.slack.stderr = std::sqrt(r.h.stderr * r.h.stderr + r.c_bar.stderr * r.c_bar.stderr +
                             r.d_bar.stderr * r.d_bar.stderr + s.shared_noise * s.shared_noise);
  r.omitted_mass = 0.0;
  r.appendix_gap.clear();
  r.appendix_tolerance.clear();
  for (int t = 0; t <= horizon; ++t) {
    const std::size_t i = std::size_t(t);
    r.omitted_mass = std::max(r.omitted_mass, s.c[i].omitted_mass);
    r.appendix_gap.push_back(s.conditional_entropy[i] - r.entropy_s0 - s.c[i].value - s.d[i].value);
    const double sigma = std::sqrt(s.c[i].stderr * s.c[i].stderr + s.d[i].stderr * s.d[i].stderr +
                                   s.conditional_err[i] * s.conditional_err[i]);
    r.appendix_tolerance.push_back(3.0 * sigma + s.conditional_bias[i] + 1e-9);
  }
  return r;
}

}  // namespace ksd
