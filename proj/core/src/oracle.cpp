#include "ksd/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <random>
#include <string>

#include "ksd/entropy.hpp"
#include "ksd/errors.hpp"
#include "ksd/parallel.hpp"

namespace ksd {

void DiscreteSystem::validate() const {
  const std::size_t n = perm.size();
  if (n == 0) throw ConfigError("discrete system needs at least one cell");
  if (volumes.size() != n || p0.size() != n) throw ConfigError("discrete system arrays differ in size");
  std::vector<bool> seen(n, false);
  for (int j : perm) {
    if (j < 0 || std::size_t(j) >= n || seen[std::size_t(j)]) throw ConfigError("perm is not a bijection");
    seen[std::size_t(j)] = true;
  }
  double sv = 0.0, sp = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!(volumes[i] > 0.0)) throw ConfigError("discrete volumes must be positive");
    if (!(p0[i] >= 0.0)) throw ConfigError("discrete p0 must be nonnegative");
    sv += volumes[i];
    sp += p0[i];
  }
  if (std::abs(sv - 1.0) > 1e-9) throw ConfigError("discrete volumes must sum to 1");
  if (std::abs(sp - 1.0) > 1e-9) throw ConfigError("discrete p0 must sum to 1");
}

namespace {

void check_budget(const DiscreteSystem& sys, int depth) {
  sys.validate();
  if (sys.size() > std::size_t(kOracleMaxCells) || depth < 0 || depth > kOracleMaxDepth)
    throw ConfigError("oracle budget exceeded: N <= " + std::to_string(kOracleMaxCells) +
                      ", depth <= " + std::to_string(kOracleMaxDepth));
}

std::vector<int> inverse_of(const std::vector<int>& perm) {
  std::vector<int> inv(perm.size());
  for (std::size_t i = 0; i < perm.size(); ++i) inv[std::size_t(perm[i])] = int(i);
  return inv;
}

double mask_volume(const DiscreteSystem& sys, std::uint32_t mask) {
  double v = 0.0;
  for (std::size_t i = 0; i < sys.size(); ++i)
    if (mask & (1u << i)) v += sys.volumes[i];
  return v;
}

}  // namespace

std::vector<ExactPath> exact_path_distribution(const DiscreteSystem& sys, int depth) {
  check_budget(sys, depth);
  std::vector<ExactPath> out;
  for (std::size_t i = 0; i < sys.size(); ++i) {
    if (sys.p0[i] <= 0.0) continue;
    ExactPath p;
    p.probability = sys.p0[i];
    int c = int(i);
    for (int t = 0; t <= depth; ++t) {
      p.cells.push_back(c);
      c = sys.perm[std::size_t(c)];
    }
    out.push_back(std::move(p));
  }
  return out;
}

std::vector<OracleTerms> exact_terms(const DiscreteSystem& sys, int depth) {
  const auto paths = exact_path_distribution(sys, depth);
  const auto inv = inverse_of(sys.perm);
  const std::size_t n = sys.size();
  std::vector<OracleTerms> out;
  std::vector<double> pt = sys.p0;
  for (int t = 0; t <= depth; ++t) {
    OracleTerms r;
    r.t = t;
    // Block and history probabilities.
    std::map<std::vector<int>, double> blocks, histories;
    for (const auto& p : paths) {
      std::vector<int> b(p.cells.begin(), p.cells.begin() + t + 1);
      blocks[b] += p.probability;
      b.pop_back();
      histories[b] += p.probability;
    }
    for (const auto& [b, p] : blocks) r.block_entropy += z_log(p);

    double sum_fwd = 0.0, sum_rev = 0.0;
    for (const auto& [b, p] : blocks) {
      const double ph = t == 0 ? 1.0 : histories.at(std::vector<int>(b.begin(), b.end() - 1));
      const double pc = p / ph;
      const int last = b.back();
      const double v_last = sys.volumes[std::size_t(last)];
      r.conditional_entropy += ph * z_log(pc);
      r.coarse_differential += ph * (z_log(pc) + pc * std::log(v_last));
      if (t == 0) continue;
      // Forward route: a_t ∩ phi^k(a_{t-k}).
      std::uint32_t fwd = 1u << last;
      for (int k = 1; k <= t; ++k) {
        int c = b[std::size_t(t - k)];
        for (int j = 0; j < k; ++j) c = sys.perm[std::size_t(c)];
        fwd &= 1u << c;
      }
      sum_fwd += pc * mask_volume(sys, fwd) / v_last;
      // Reversed route: follow psi from a_t and require psi^k(a_t) = a_{t-k}.
      int c = last;
      bool inside = true;
      for (int k = 1; k <= t && inside; ++k) {
        c = inv[std::size_t(c)];
        inside = c == b[std::size_t(t - k)];
      }
      sum_rev += pc * (inside ? 1.0 : 0.0);
    }
    r.c_forward = t == 0 ? 0.0 : 1.0 - sum_fwd;
    r.c_reversed = t == 0 ? 0.0 : 1.0 - sum_rev;

    for (std::size_t i = 0; i < n; ++i) {
      if (pt[i] <= 0.0) continue;
      r.d -= pt[i] * std::log(sys.volumes[i]);
      r.entropy += sys.volumes[i] * z_log(pt[i] / sys.volumes[i]);
    }
    r.appendix_gap = r.conditional_entropy - r.entropy - r.c_forward - r.d;
    out.push_back(r);

    std::vector<double> next(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) next[std::size_t(sys.perm[i])] += pt[i];
    pt = std::move(next);
  }
  return out;
}

DiscreteSystem random_discrete_system(Engine& rng, int max_cells) {
  max_cells = std::clamp(max_cells, 2, kOracleMaxCells);
  std::uniform_int_distribution<int> size(2, max_cells);
  const int n = size(rng);
  DiscreteSystem sys;
  sys.perm.resize(std::size_t(n));
  std::iota(sys.perm.begin(), sys.perm.end(), 0);
  for (int i = n - 1; i > 0; --i) {
    std::uniform_int_distribution<int> pick(0, i);
    std::swap(sys.perm[std::size_t(i)], sys.perm[std::size_t(pick(rng))]);
  }
  std::exponential_distribution<double> expo(1.0);
  auto normalize = [](std::vector<double>& v) {
    const double s = std::accumulate(v.begin(), v.end(), 0.0);
    for (double& x : v) x /= s;
  };
  for (int i = 0; i < n; ++i) sys.volumes.push_back(expo(rng) + 1e-3);
  normalize(sys.volumes);
  for (int i = 0; i < n; ++i) sys.p0.push_back(uniform01(rng) < 0.25 ? 0.0 : expo(rng));
  if (std::all_of(sys.p0.begin(), sys.p0.end(), [](double x) { return x == 0.0; })) sys.p0[0] = 1.0;
  normalize(sys.p0);
  return sys;
}

OracleSweep oracle_property_sweep(std::size_t instances, int max_cells, int max_depth,
                                  std::size_t lemma_pairs, std::uint64_t seed, unsigned threads,
                                  double tolerance) {
  OracleSweep sweep;
  sweep.instances = instances;
  sweep.lemma_pairs = lemma_pairs;
  struct Result {
    double gap = std::numeric_limits<double>::infinity();
    double route = 0.0;
    std::size_t violations = 0;
  };
  std::vector<Result> results(instances);
  parallel_for(instances, threads, [&](std::size_t i) {
    Engine rng = substream(seed, Stream::kOracle, i);
    const DiscreteSystem sys = random_discrete_system(rng, max_cells);
    std::uniform_int_distribution<int> pick_depth(1, std::max(1, max_depth));
    const auto terms = exact_terms(sys, pick_depth(rng));
    for (const auto& t : terms) {
      results[i].gap = std::min(results[i].gap, t.appendix_gap);
      results[i].route = std::max(results[i].route, std::abs(t.c_forward - t.c_reversed));
      if (t.appendix_gap < -tolerance) ++results[i].violations;
    }
  });
  sweep.min_appendix_gap = std::numeric_limits<double>::infinity();
  for (const auto& r : results) {
    sweep.min_appendix_gap = std::min(sweep.min_appendix_gap, r.gap);
    sweep.max_route_disagreement = std::max(sweep.max_route_disagreement, r.route);
    sweep.violations += r.violations;
  }

  // x (ln x - ln y) >= x - y on log-uniform pairs in [1e-6, 1e6].
  Engine rng = substream(seed, Stream::kOracle, std::uint64_t(1) << 40);
  std::uniform_real_distribution<double> log10(-6.0, 6.0);
  sweep.min_lemma_gap = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < lemma_pairs; ++j) {
    const double x = std::pow(10.0, log10(rng));
    const double y = std::pow(10.0, log10(rng));
    const double gap = x * (std::log(x) - std::log(y)) - (x - y);
    const double scale = std::max({1.0, x, y, std::abs(x * std::log(x / y))});
    sweep.min_lemma_gap = std::min(sweep.min_lemma_gap, gap / scale);
    if (gap < -tolerance * scale) ++sweep.lemma_violations;
  }
  return sweep;
}

// ---------------------------------------------------------------- adapter

namespace {

class IntervalLocator final : public CellLocator {
 public:
  explicit IntervalLocator(std::vector<double> starts) : starts_(std::move(starts)) {}
  int locate(const PhaseState& s) const override {
    const double x = s.x[0];
    if (!(x >= 0.0) || !(x < 1.0)) return -1;
    const auto it = std::upper_bound(starts_.begin() + 1, starts_.end() - 1, x);
    return int(it - starts_.begin()) - 1;
  }

 private:
  std::vector<double> starts_;
};

}  // namespace

DiscreteSystemModel::DiscreteSystemModel(DiscreteSystem sys) : sys_(std::move(sys)) {
  sys_.validate();
  starts_.assign(sys_.size() + 1, 0.0);
  for (std::size_t i = 0; i < sys_.size(); ++i) starts_[i + 1] = starts_[i] + sys_.volumes[i];
  starts_.back() = 1.0;
  inverse_ = inverse_of(sys_.perm);
}

int DiscreteSystemModel::cell_of(double x) const {
  const auto it = std::upper_bound(starts_.begin() + 1, starts_.end() - 1, x);
  return int(it - starts_.begin()) - 1;
}

Partition DiscreteSystemModel::partition() const {
  std::vector<Cell> cells;
  for (std::size_t i = 0; i < sys_.size(); ++i) {
    Cell c;
    c.id = int(i);
    c.volume = starts_[i + 1] - starts_[i];
    c.geometry = {{starts_[i], starts_[i + 1], 0.0, 1.0}};
    cells.push_back(std::move(c));
  }
  return Partition("cells", chart(), 1.0, std::move(cells), std::make_shared<IntervalLocator>(starts_));
}

double DiscreteSystemModel::hamiltonian(const PhaseState& s, double) const {
  const std::size_t i = std::size_t(cell_of(s.x[0]));
  if (sys_.p0[i] <= 0.0) return std::numeric_limits<double>::infinity();
  return -std::log(sys_.p0[i] / sys_.volumes[i]);
}

double DiscreteSystemModel::energy_lower_bound(double) const {
  double e = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < sys_.size(); ++i)
    if (sys_.p0[i] > 0.0) e = std::min(e, -std::log(sys_.p0[i] / sys_.volumes[i]));
  return e;
}

PhaseState DiscreteSystemModel::step(const PhaseState& s, double) const {
  const int i = cell_of(s.x[0]);
  const int j = sys_.perm[std::size_t(i)];
  const double offset = (s.x[0] - starts_[std::size_t(i)]) / (starts_[std::size_t(i) + 1] - starts_[std::size_t(i)]);
  double x = starts_[std::size_t(j)] + offset * (starts_[std::size_t(j) + 1] - starts_[std::size_t(j)]);
  x = std::min(x, std::nextafter(starts_[std::size_t(j) + 1], 0.0));
  return PhaseState{{x, 0.0, 0.0}, 1};
}

PhaseState DiscreteSystemModel::inverse_step(const PhaseState& s, double) const {
  const int j = cell_of(s.x[0]);
  const int i = inverse_[std::size_t(j)];
  const double offset = (s.x[0] - starts_[std::size_t(j)]) / (starts_[std::size_t(j) + 1] - starts_[std::size_t(j)]);
  double x = starts_[std::size_t(i)] + offset * (starts_[std::size_t(i) + 1] - starts_[std::size_t(i)]);
  x = std::min(x, std::nextafter(starts_[std::size_t(i) + 1], 0.0));
  return PhaseState{{x, 0.0, 0.0}, 1};
}

Eigen::Matrix3d DiscreteSystemModel::tangent(const PhaseState& s, double) const {
  const std::size_t i = std::size_t(cell_of(s.x[0]));
  const std::size_t j = std::size_t(sys_.perm[i]);
  Eigen::Matrix3d m = Eigen::Matrix3d::Identity();
  m(0, 0) = sys_.volumes[j] / sys_.volumes[i];
  return m;
}

bool DiscreteSystemModel::in_domain(const PhaseState& s) const {
  return s.dim == 1 && s.x[0] >= 0.0 && s.x[0] < 1.0;
}

}  // namespace ksd
