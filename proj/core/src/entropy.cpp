#include "ksd/entropy.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "ksd/errors.hpp"
#include "ksd/parallel.hpp"

namespace ksd {

double z_log(double x) { return x > 0.0 ? -x * std::log(x) : 0.0; }

double partition_entropy(std::span<const double> probabilities) {
  double sum = 0.0, s = 0.0;
  for (double p : probabilities) {
    if (p < 0.0 || !std::isfinite(p)) throw InvariantViolation("negative or non-finite probability");
    sum += p;
    s += z_log(p);
  }
  if (std::abs(sum - 1.0) > 1e-9)
    throw InvariantViolation("probabilities sum to " + std::to_string(sum) + ", not 1");
  return s;
}

PathStats collect_path_stats(const SystemModel& system, const ControlProtocol& protocol,
                             const Partition& partition, const Ensemble& ensemble, int depth,
                             unsigned threads) {
  if (ensemble.size() == 0) throw ConfigError("empty ensemble");
  if (depth > protocol.horizon())
    throw ConfigError("depth " + std::to_string(depth) + " exceeds protocol horizon " +
                      std::to_string(protocol.horizon()));
  const std::size_t stride = std::size_t(depth) + 1;
  const std::size_t chunks = chunk_count(ensemble.size(), kChunkSize);
  std::vector<PathStats> partial(chunks);
  parallel_for(chunks, threads, [&](std::size_t k) {
    const std::size_t begin = k * kChunkSize;
    const std::size_t end = std::min(ensemble.size(), begin + kChunkSize);
    std::vector<Symbol> rows((end - begin) * stride);
    for (std::size_t i = begin; i < end; ++i) {
      const Trajectory traj = evolve(system, ensemble.states[i], protocol, depth);
      const SymbolPath path = symbolize(traj, partition);
      std::copy(path.symbols.begin(), path.symbols.end(), rows.begin() + std::ptrdiff_t((i - begin) * stride));
    }
    partial[k] = PathStats::from_paths(rows, end - begin, stride, partition.size(), depth);
  });
  PathStats out = std::move(partial[0]);
  for (std::size_t k = 1; k < chunks; ++k) out = PathStats::merge(out, partial[k]);
  return out;
}

PathStats collect_orbit_stats(const SystemModel& system, double lambda, const Partition& partition,
                              const PhaseState& s0, std::size_t windows, int depth,
                              std::size_t burn_in) {
  if (windows == 0) throw ConfigError("orbit needs at least one window");
  if (!system.in_domain(s0)) throw DomainError("orbit start outside the domain");
  PhaseState s = s0;
  for (std::size_t i = 0; i < burn_in; ++i) s = system.step(s, lambda);
  std::vector<Symbol> orbit(windows + std::size_t(depth));
  for (std::size_t i = 0; i < orbit.size(); ++i) {
    const int id = partition.locate(s);
    if (id < 0 || !system.in_domain(s))
      throw DomainError("orbit left the domain at step " + std::to_string(burn_in + i));
    orbit[i] = Symbol(id);
    s = system.step(s, lambda);
  }
  return PathStats::from_orbit(orbit, partition.size(), depth);
}

// ---------------------------------------------------------------- curves

int BlockEntropyCurve::reliable_length() const {
  int L = 0;
  while (L < max_length() && !flagged[std::size_t(L)]) ++L;
  return L;
}

BlockEntropyCurve block_entropy_curve(const PathStats& stats, const CurveOptions& options) {
  BlockEntropyCurve c;
  c.samples = stats.total();
  c.alphabet = stats.alphabet();
  c.miller_madow = options.miller_madow;
  c.rule = options.min_mean_count > 0.0
               ? "samples/distinct>=" + std::to_string(options.min_mean_count)
               : std::string("distinct<=sqrt(samples)");
  const double m = double(stats.total());
  const double ln_a = std::log(double(stats.alphabet()));
  for (int t = 0; t <= stats.depth(); ++t) {
    const auto table = stats.table(t);
    double h = 0.0;
    for (const auto& bc : table) h += z_log(double(bc.count) / m);
    const std::size_t blocks = table.size();
    double corrected = h;
    if (options.miller_madow) corrected += double(blocks - 1) / (2.0 * m);
    corrected = std::min(corrected, double(t + 1) * ln_a);
    c.plugin.push_back(h);
    c.entropy.push_back(corrected);
    c.distinct.push_back(blocks);
    const bool flag = options.min_mean_count > 0.0 ? m / double(blocks) < options.min_mean_count
                                                   : double(blocks) > std::sqrt(m);
    c.flagged.push_back(flag);
  }
  return c;
}

KseEstimate kse_estimate(std::span<const NamedCurve> curves, const KseOptions& options) {
  if (options.tail < 1) throw ConfigError("kse tail must be at least 1");
  KseEstimate est;
  double best = -1.0;
  double ln_max = 0.0;
  for (const auto& nc : curves) {
    const auto& c = nc.curve;
    if (!est.family.empty()) est.family += ",";
    est.family += nc.partition_id;
    est.rule = c.rule;
    ln_max = std::max(ln_max, std::log(double(c.alphabet)));

    PartitionRate r;
    r.partition_id = nc.partition_id;
    r.cells = c.alphabet;
    r.reliable_length = c.reliable_length();
    r.reliable = r.reliable_length >= 2;
    if (r.reliable) {
      r.window_last = r.reliable_length;
      r.window_first = std::max(2, r.reliable_length - options.tail + 1);
      std::vector<double> inc;
      for (int L = r.window_first; L <= r.window_last; ++L) inc.push_back(c.increment(L));
      r.rate = std::accumulate(inc.begin(), inc.end(), 0.0) / double(inc.size());
      double ss = 0.0;
      for (double x : inc) ss += (x - r.rate) * (x - r.rate);
      r.spread = inc.size() > 1 ? std::sqrt(ss / double(inc.size() - 1)) : 0.0;
      r.quotient = c.at(r.reliable_length) / r.reliable_length;
      r.agreement_gap = std::abs(r.quotient - r.rate);
      r.agree = r.agreement_gap <= options.agreement_tolerance * std::log(double(c.alphabet));
      if (r.rate > best) {
        best = r.rate;
        est.best_partition = r.partition_id;
        est.stderr = r.spread;
      }
    }
    est.partitions.push_back(r);
  }
  if (best < 0.0 && est.best_partition.empty())
    throw EstimatorRefusal("no partition has two reliable block lengths (" + est.rule + ")");
  est.h = std::clamp(best, 0.0, ln_max);
  return est;
}

// ---------------------------------------------------------------- reversed volumes

ReversedVolumeTable ReversedVolumeTable::build(const SystemModel& system, const ControlProtocol& protocol,
                                               const Partition& partition, int depth, std::size_t samples,
                                               std::uint64_t seed, unsigned threads) {
  if (depth < 0) throw ConfigError("depth must be nonnegative");
  if (samples == 0) throw ConfigError("reversed volumes need samples > 0");
  if (depth > 0 && depth - 1 > protocol.horizon()) throw ConfigError("depth beyond the protocol");
  const std::size_t n = partition.size();
  const int bits = symbol_bits(n);
  if (long(depth + 1) * bits > kBlockKeyBits)
    throw TableOverflow("reversed volume table depth " + std::to_string(depth) + " too deep");

  ReversedVolumeTable out;
  out.bits_ = bits;
  out.samples_ = samples;
  out.tables_.resize(std::size_t(depth) + 1);
  out.cell_counts_.assign(std::size_t(depth) + 1, std::vector<std::uint64_t>(n, 0));

  bool stationary = system.autonomous();
  if (!stationary && depth > 0) {
    stationary = true;
    for (int t = 1; t < depth; ++t) stationary = stationary && protocol.at(t) == protocol.at(0);
  }

  const std::size_t chunks = chunk_count(samples, kChunkSize);
  // One backward pass of `steps` inverse steps ending at time `t_end`.
  // Returns per-sample symbols b_0..b_steps and the first escaped index.
  auto pass = [&](int t_end, int steps, std::uint64_t pass_id, std::vector<Symbol>& sym,
                  std::vector<int>& escaped) {
    const std::size_t stride = std::size_t(steps) + 1;
    sym.assign(samples * stride, 0);
    escaped.assign(samples, steps + 1);
    parallel_for(chunks, threads, [&](std::size_t k) {
      Engine rng = substream(seed, Stream::kReversedVolume, (pass_id << 32) | k);
      const std::size_t end = std::min(samples, (k + 1) * kChunkSize);
      for (std::size_t i = k * kChunkSize; i < end; ++i) {
        PhaseState s = system.sample_uniform(rng);
        for (int j = 0; j <= steps; ++j) {
          if (j > 0) s = system.inverse_step(s, protocol.at(t_end - j));
          const int id = system.in_domain(s) ? partition.locate(s) : -1;
          if (id < 0) {
            escaped[i] = j;
            break;
          }
          sym[i * stride + std::size_t(j)] = Symbol(id);
        }
      }
    });
  };
  auto tabulate = [&](int t, const std::vector<Symbol>& sym, const std::vector<int>& escaped,
                      std::size_t stride) {
    std::vector<BlockKey> keys;
    keys.reserve(samples);
    for (std::size_t i = 0; i < samples; ++i) {
      if (escaped[i] == 0) continue;
      ++out.cell_counts_[std::size_t(t)][sym[i * stride]];
      if (escaped[i] <= t) continue;
      BlockKey key = 0;
      for (int j = t; j >= 0; --j) key = push_symbol(key, sym[i * stride + std::size_t(j)], bits);
      keys.push_back(key);
    }
    out.tables_[std::size_t(t)] = count_keys(keys);
  };

  std::vector<Symbol> sym;
  std::vector<int> escaped;
  if (stationary) {
    pass(depth, depth, 0, sym, escaped);
    for (int t = 0; t <= depth; ++t) tabulate(t, sym, escaped, std::size_t(depth) + 1);
  } else {
    for (int t = 0; t <= depth; ++t) {
      pass(t, t, std::uint64_t(t) + 1, sym, escaped);
      tabulate(t, sym, escaped, std::size_t(t) + 1);
    }
  }
  return out;
}

std::uint64_t ReversedVolumeTable::cell_samples(int t, Symbol cell) const {
  return cell_counts_.at(std::size_t(t)).at(cell);
}

Estimate ReversedVolumeTable::conditional_volume(int t, BlockKey key) const {
  if (t == 0) return {1.0, 0.0};
  if (t > depth()) throw ConfigError("reversed volume requested beyond table depth");
  const Symbol last = block_last(key, bits_);
  const std::uint64_t n = cell_samples(t, last);
  if (n == 0)
    throw EstimatorRefusal("no reversed-volume samples landed in cell " + std::to_string(last) +
                           "; raise volume_samples");
  const auto& tab = tables_[std::size_t(t)];
  auto it = std::lower_bound(tab.begin(), tab.end(), BlockCount{key, 0},
                             [](const BlockCount& a, const BlockCount& b) { return a.key < b.key; });
  const std::uint64_t k = it != tab.end() && it->key == key ? it->count : 0;
  const double v = double(k) / double(n);
  const double nd = double(n);
  return {v, std::sqrt(std::max(v, 1.0 / nd) * (1.0 - v) / nd)};
}

// ---------------------------------------------------------------- c, d, I

CTerm c_term(const PathStats& stats, const ReversedVolumeTable& volumes, int t) {
  if (t == 0) return {};
  if (t > stats.depth() || t > volumes.depth()) throw ConfigError("c_t requested beyond available depth");
  const auto table = stats.table(t);
  const int bits = stats.bits();
  double sum = 0.0, var = 0.0;
  std::size_t singletons = 0;
  std::size_t i = 0;
  while (i < table.size()) {
    const BlockKey prefix = block_prefix(table[i].key, bits);
    std::size_t j = i;
    std::uint64_t n_prefix = 0;
    while (j < table.size() && block_prefix(table[j].key, bits) == prefix) n_prefix += table[j++].count;
    const double np = double(n_prefix);
    for (std::size_t k = i; k < j; ++k) {
      const double p = double(table[k].count) / np;
      const Estimate v = volumes.conditional_volume(t, table[k].key);
      sum += p * v.value;
      const double var_p = std::max(p, 1.0 / np) * (1.0 - p) / np;
      var += v.value * v.value * var_p + p * p * v.stderr * v.stderr;
      singletons += table[k].count == 1 ? 1 : 0;
    }
    i = j;
  }
  return {1.0 - sum, std::sqrt(var), double(singletons) / double(stats.total())};
}

std::vector<CTerm> c_terms(const PathStats& stats, const ReversedVolumeTable& volumes) {
  std::vector<CTerm> out;
  const int depth = std::min(stats.depth(), volumes.depth());
  for (int t = 0; t <= depth; ++t) out.push_back(c_term(stats, volumes, t));
  return out;
}

Estimate d_term(std::span<const double> volumes, std::span<const double> probabilities,
                std::uint64_t samples) {
  if (volumes.size() != probabilities.size()) throw ConfigError("d_t needs one probability per cell");
  double m1 = 0.0, m2 = 0.0;
  for (std::size_t i = 0; i < volumes.size(); ++i) {
    const double p = probabilities[i];
    if (p <= 0.0) continue;
    if (!(volumes[i] > 0.0))
      throw InvariantViolation("cell " + std::to_string(i) + " has probability but no volume");
    const double lv = std::log(volumes[i]);
    m1 += p * lv;
    m2 += p * lv * lv;
  }
  const double var = samples > 0 ? std::max(0.0, m2 - m1 * m1) / double(samples) : 0.0;
  return {-m1, std::sqrt(var)};
}

Estimate info_term(Estimate h, Estimate c_bar, Estimate d_bar) { return h - c_bar - d_bar; }

namespace {

// Calls f(prefix_count, span of blocks sharing that prefix) for table t.
template <class F>
void for_each_history(const PathStats& stats, int t, F f) {
  const auto table = stats.table(t);
  const int bits = stats.bits();
  std::size_t i = 0;
  while (i < table.size()) {
    std::size_t j = i;
    std::uint64_t n = 0;
    if (t == 0) {
      j = table.size();
      n = stats.total();
    } else {
      const BlockKey prefix = block_prefix(table[i].key, bits);
      while (j < table.size() && block_prefix(table[j].key, bits) == prefix) n += table[j++].count;
    }
    f(n, table.subspan(i, j - i));
    i = j;
  }
}

}  // namespace

double conditional_entropy(const PathStats& stats, int t) {
  const double m = double(stats.total());
  double s = 0.0;
  for_each_history(stats, t, [&](std::uint64_t n, std::span<const BlockCount> blocks) {
    double h = 0.0;
    for (const auto& bc : blocks) h += z_log(double(bc.count) / double(n));
    s += double(n) / m * h;
  });
  return s;
}

ConditionalEntropy conditional_entropy_stats(const PathStats& stats, int t) {
  const double m = double(stats.total());
  double h = 0.0, sq = 0.0, free_cells = 0.0;
  for_each_history(stats, t, [&](std::uint64_t n, std::span<const BlockCount> blocks) {
    free_cells += double(blocks.size()) - 1.0;
    for (const auto& bc : blocks) {
      const double p = double(bc.count) / double(n);
      const double w = double(bc.count) / m;
      h -= w * std::log(p);
      sq += w * std::log(p) * std::log(p);
    }
  });
  ConditionalEntropy out;
  out.value = h;
  out.stderr = m > 1.0 ? std::sqrt(std::max(0.0, sq - h * h) / m) : 0.0;
  out.bias_bound = (free_cells + 3.0 * std::sqrt(2.0 * free_cells)) / (2.0 * m);
  return out;
}

double coarse_grained_entropy(const PathStats& stats, std::span<const double> volumes, int t) {
  if (volumes.size() != stats.alphabet()) throw ConfigError("one volume per cell required");
  const double m = double(stats.total());
  const int bits = stats.bits();
  double s = 0.0;
  for_each_history(stats, t, [&](std::uint64_t n, std::span<const BlockCount> blocks) {
    double h = 0.0;
    for (const auto& bc : blocks) {
      const double p = double(bc.count) / double(n);
      h += z_log(p) + p * std::log(volumes[block_last(bc.key, bits)]);
    }
    s += double(n) / m * h;
  });
  return s;
}

}  // namespace ksd
