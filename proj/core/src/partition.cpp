#include "ksd/partition.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numbers>
#include <sstream>

#include "ksd/errors.hpp"
#include "ksd/parallel.hpp"

namespace ksd {

namespace {

constexpr double kPi = std::numbers::pi;

class TrivialLocator final : public CellLocator {
 public:
  int locate(const PhaseState&) const override { return 0; }
};

class HalvesLocator final : public CellLocator {
 public:
  explicit HalvesLocator(int axis) : axis_(axis) {}
  int locate(const PhaseState& s) const override { return s.x[axis_] > 0.0 ? 0 : 1; }

 private:
  int axis_;
};

class GridLocator final : public CellLocator {
 public:
  GridLocator(Chart chart, int rows, int cols, double inner)
      : chart_(chart), rows_(rows), cols_(cols), inner_(inner) {}

  int locate(const PhaseState& s) const override {
    const ChartPoint p = to_chart(chart_, s);
    const double an = (p.a - chart_.a_lo()) / (chart_.a_hi() - chart_.a_lo());
    const double bn = (p.b - chart_.b_lo()) / (chart_.b_hi() - chart_.b_lo());
    if (!(an >= 0.0) || !(bn >= 0.0) || an > 1.0 || bn > 1.0 + 1e-9) return -1;
    if (bn >= inner_) return rows_ * cols_;
    const int col = std::min(static_cast<int>(an * cols_), cols_ - 1);
    const int row = std::min(static_cast<int>(bn / inner_ * rows_), rows_ - 1);
    return row * cols_ + col;
  }

 private:
  Chart chart_;
  int rows_;
  int cols_;
  double inner_;  // normalized b where the outer ring starts (1: none)
};

class RefinedLocator final : public CellLocator {
 public:
  RefinedLocator(std::shared_ptr<const Partition> a, std::shared_ptr<const Partition> b,
                 std::vector<int> table)
      : a_(std::move(a)), b_(std::move(b)), table_(std::move(table)) {}

  int locate(const PhaseState& s) const override {
    const int ia = a_->locate(s);
    const int ib = b_->locate(s);
    if (ia < 0 || ib < 0) return -1;
    return table_[static_cast<std::size_t>(ia) * b_->size() + static_cast<std::size_t>(ib)];
  }

 private:
  std::shared_ptr<const Partition> a_;
  std::shared_ptr<const Partition> b_;
  std::vector<int> table_;
};

ChartRect full_rect(const Chart& c) { return {c.a_lo(), c.a_hi(), c.b_lo(), c.b_hi()}; }

double rect_volume(const Chart& c, double dv, const std::vector<ChartRect>& rects) {
  double area = 0.0;
  for (const auto& r : rects) area += r.area();
  return area / c.area() * dv;
}

Cell analytic_cell(int id, const Chart& c, double dv, std::vector<ChartRect> rects) {
  Cell cell;
  cell.id = id;
  cell.volume = rect_volume(c, dv, rects);
  cell.analytic = true;
  cell.geometry = std::move(rects);
  return cell;
}

int parse_int(std::string_view s, std::string_view what) {
  int v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || v <= 0)
    throw ConfigError("bad " + std::string(what) + " '" + std::string(s) + "' in partition spec");
  return v;
}

std::string format_radius(double r) {
  std::ostringstream os;
  os << r;
  return os.str();
}

}  // namespace

// ---------------------------------------------------------------- Partition

Partition::Partition(std::string id, Chart chart, double domain_volume, std::vector<Cell> cells,
                     std::shared_ptr<const CellLocator> locator)
    : id_(std::move(id)),
      chart_(chart),
      domain_volume_(domain_volume),
      cells_(std::move(cells)),
      locator_(std::move(locator)) {
  if (cells_.empty()) throw ConfigError("partition " + id_ + " has no cells");
  if (cells_.size() > 65535) throw ConfigError("partition " + id_ + " has too many cells");
  for (std::size_t i = 0; i < cells_.size(); ++i) {
    if (cells_[i].id != static_cast<int>(i)) throw ConfigError("partition cell ids must be 0..n-1");
    if (!(cells_[i].volume > 0.0)) throw ConfigError("partition " + id_ + " has a zero-volume cell");
  }
}

std::vector<double> Partition::volumes() const {
  std::vector<double> v;
  v.reserve(cells_.size());
  for (const auto& c : cells_) v.push_back(c.volume);
  return v;
}

bool Partition::analytic() const {
  return std::all_of(cells_.begin(), cells_.end(), [](const Cell& c) { return c.analytic; });
}

PhaseState Partition::sample_in_cell(const SystemModel& system, int id, Engine& rng) const {
  const Cell& c = cell(id);
  if (!c.geometry.empty()) {
    double total = 0.0;
    for (const auto& r : c.geometry) total += r.area();
    for (int attempt = 0; attempt < 1000; ++attempt) {
      double pick = uniform01(rng) * total;
      const ChartRect* rect = &c.geometry.back();
      for (const auto& r : c.geometry) {
        if (pick < r.area()) {
          rect = &r;
          break;
        }
        pick -= r.area();
      }
      const double a = rect->a0 + (rect->a1 - rect->a0) * uniform01(rng);
      const double b = rect->b0 + (rect->b1 - rect->b0) * uniform01(rng);
      const PhaseState s = from_chart(chart_, {a, b});
      if (locate(s) == id) return s;
    }
    throw InvariantViolation("cell geometry disagrees with its predicate in partition " + id_);
  }
  const double fraction = c.volume / domain_volume_;
  const auto limit = static_cast<std::size_t>(std::max(1e6, 1e3 / fraction));
  for (std::size_t i = 0; i < limit; ++i) {
    const PhaseState s = system.sample_uniform(rng);
    if (locate(s) == id) return s;
  }
  throw EstimatorRefusal("could not sample inside cell " + std::to_string(id) + " of " + id_);
}

// ---------------------------------------------------------------- specs

PartitionSpec PartitionSpec::parse(std::string_view text) {
  PartitionSpec spec;
  auto next = [&](std::string_view& rest) {
    const auto pos = rest.find(':');
    std::string_view head = rest.substr(0, pos);
    rest = pos == std::string_view::npos ? std::string_view{} : rest.substr(pos + 1);
    return head;
  };
  std::string_view rest = text;
  const std::string_view type = next(rest);
  if (type == "trivial") {
    spec.type = Type::kTrivial;
  } else if (type == "halves") {
    spec.type = Type::kHalves;
    const std::string_view axis = next(rest);
    if (axis == "q" || axis == "x") spec.axis = 0;
    else if (axis == "theta" || axis == "p" || axis == "y") spec.axis = 1;
    else if (axis == "z") spec.axis = 2;
    else throw ConfigError("unknown halves axis '" + std::string(axis) + "'");
  } else if (type == "grid") {
    spec.type = Type::kGrid;
    std::string_view dims = next(rest);
    if (dims == "disk" || dims == "sphere" || dims == "interval") {
      spec.chart = std::string(dims);
      dims = next(rest);
    }
    const auto at = dims.find('@');
    if (at != std::string_view::npos) {
      const std::string r(dims.substr(at + 1));
      try {
        std::size_t used = 0;
        spec.radius = std::stod(r, &used);
        if (used != r.size() || !(spec.radius > 0.0)) throw std::invalid_argument(r);
      } catch (const std::exception&) {
        throw ConfigError("bad grid radius '" + r + "'");
      }
      dims = dims.substr(0, at);
    }
    const auto x = dims.find('x');
    if (x == std::string_view::npos) throw ConfigError("grid needs <rows>x<cols>, got '" + std::string(dims) + "'");
    spec.rows = parse_int(dims.substr(0, x), "rows");
    spec.cols = parse_int(dims.substr(x + 1), "cols");
  } else {
    throw ConfigError("unknown partition type '" + std::string(type) + "'");
  }
  if (!rest.empty()) throw ConfigError("trailing text in partition spec '" + std::string(text) + "'");
  return spec;
}

std::string PartitionSpec::id() const {
  static const char* axes[] = {"q", "theta", "z"};
  switch (type) {
    case Type::kTrivial:
      return "trivial";
    case Type::kHalves:
      return std::string("halves-") + axes[axis];
    case Type::kGrid: {
      std::string id = "grid-" + std::to_string(rows) + "x" + std::to_string(cols);
      if (radius > 0.0) id += "-r" + format_radius(radius);
      return id;
    }
  }
  return {};
}

std::string PartitionSpec::to_string() const {
  static const char* axes[] = {"q", "theta", "z"};
  switch (type) {
    case Type::kTrivial:
      return "trivial";
    case Type::kHalves:
      return std::string("halves:") + axes[axis];
    case Type::kGrid: {
      std::string s = "grid:";
      if (!chart.empty()) s += chart + ":";
      s += std::to_string(rows) + "x" + std::to_string(cols);
      if (radius > 0.0) s += "@" + format_radius(radius);
      return s;
    }
  }
  return {};
}

Partition trivial_partition(const SystemModel& system) {
  const Chart c = system.chart();
  const double dv = system.domain_volume();
  std::vector<Cell> cells{analytic_cell(0, c, dv, {full_rect(c)})};
  cells[0].volume = dv;
  return Partition("trivial", c, dv, std::move(cells), std::make_shared<TrivialLocator>());
}

Partition make_partition(const SystemModel& system, const PartitionSpec& spec) {
  const Chart c = system.chart();
  const double dv = system.domain_volume();
  static const char* chart_names[] = {"disk", "sphere", "interval"};
  const std::string chart_name = chart_names[static_cast<int>(c.kind)];
  if (!spec.chart.empty() && spec.chart != chart_name)
    throw ConfigError("partition " + spec.to_string() + " does not fit the " + chart_name + " of " +
                      system.name());

  switch (spec.type) {
    case PartitionSpec::Type::kTrivial:
      return trivial_partition(system);

    case PartitionSpec::Type::kHalves: {
      if (c.kind == ChartKind::kInterval) throw ConfigError("halves partitions need a disk or sphere");
      if (spec.axis == 2 && c.kind != ChartKind::kSphere)
        throw ConfigError("halves:z needs the sphere");
      std::vector<ChartRect> pos, neg;
      const double b0 = c.b_lo(), b1 = c.b_hi();
      if (spec.axis == 0) {
        pos = {{0.0, kPi / 2, b0, b1}, {1.5 * kPi, 2 * kPi, b0, b1}};
        neg = {{kPi / 2, 1.5 * kPi, b0, b1}};
      } else if (spec.axis == 1) {
        pos = {{0.0, kPi, b0, b1}};
        neg = {{kPi, 2 * kPi, b0, b1}};
      } else {
        pos = {{0.0, 2 * kPi, 0.0, 1.0}};
        neg = {{0.0, 2 * kPi, -1.0, 0.0}};
      }
      std::vector<Cell> cells{analytic_cell(0, c, dv, pos), analytic_cell(1, c, dv, neg)};
      return Partition(spec.id(), c, dv, std::move(cells), std::make_shared<HalvesLocator>(spec.axis));
    }

    case PartitionSpec::Type::kGrid: {
      double inner = 1.0;
      if (spec.radius > 0.0) {
        if (c.kind != ChartKind::kDisk) throw ConfigError("grid radius only applies to disk charts");
        if (spec.radius < c.radius) inner = (spec.radius * spec.radius) / (c.radius * c.radius);
      }
      const double a0 = c.a_lo(), aw = (c.a_hi() - c.a_lo()) / spec.cols;
      const double b0 = c.b_lo(), bw = (c.b_hi() - c.b_lo()) * inner / spec.rows;
      std::vector<Cell> cells;
      for (int r = 0; r < spec.rows; ++r) {
        for (int col = 0; col < spec.cols; ++col) {
          const ChartRect rect{a0 + col * aw, col + 1 == spec.cols ? c.a_hi() : a0 + (col + 1) * aw,
                               b0 + r * bw, b0 + (r + 1) * bw};
          cells.push_back(analytic_cell(r * spec.cols + col, c, dv, {rect}));
        }
      }
      if (inner < 1.0) {
        const ChartRect ring{c.a_lo(), c.a_hi(), c.b_lo() + inner * (c.b_hi() - c.b_lo()), c.b_hi()};
        cells.push_back(analytic_cell(spec.rows * spec.cols, c, dv, {ring}));
      }
      return Partition(spec.id(), c, dv, std::move(cells),
                       std::make_shared<GridLocator>(c, spec.rows, spec.cols, inner));
    }
  }
  throw ConfigError("unhandled partition type");
}

// ---------------------------------------------------------------- refine

Partition refine(const SystemModel& system, const Partition& a, const Partition& b,
                 const RefineOptions& options) {
  if (!(a.chart() == b.chart()) || a.domain_volume() != b.domain_volume())
    throw ConfigError("refine needs partitions over the same domain");
  const Chart c = a.chart();
  const double dv = a.domain_volume();
  const std::size_t na = a.size(), nb = b.size();
  auto pa = std::make_shared<const Partition>(a);
  auto pb = std::make_shared<const Partition>(b);
  const std::string id = a.id() == b.id() ? a.id() : a.id() + "|" + b.id();

  std::vector<int> table(na * nb, -1);
  std::vector<Cell> cells;

  const bool geometric = std::all_of(a.cells().begin(), a.cells().end(),
                                     [](const Cell& x) { return !x.geometry.empty(); }) &&
                         std::all_of(b.cells().begin(), b.cells().end(),
                                     [](const Cell& x) { return !x.geometry.empty(); });
  if (geometric) {
    const double eps = 1e-14 * c.area();
    for (std::size_t i = 0; i < na; ++i) {
      for (std::size_t j = 0; j < nb; ++j) {
        std::vector<ChartRect> rects;
        for (const auto& ra : a.cell(int(i)).geometry) {
          for (const auto& rb : b.cell(int(j)).geometry) {
            ChartRect r{std::max(ra.a0, rb.a0), std::min(ra.a1, rb.a1), std::max(ra.b0, rb.b0),
                        std::min(ra.b1, rb.b1)};
            if (r.a1 > r.a0 && r.b1 > r.b0 && r.area() > eps) rects.push_back(r);
          }
        }
        if (rects.empty()) continue;
        const int nid = static_cast<int>(cells.size());
        table[i * nb + j] = nid;
        cells.push_back(analytic_cell(nid, c, dv, std::move(rects)));
      }
    }
    return Partition(id, c, dv, std::move(cells),
                     std::make_shared<RefinedLocator>(pa, pb, table));
  }

  const std::size_t total = options.samples_per_cell * na * nb;
  const std::size_t chunks = chunk_count(total, kChunkSize);
  std::vector<std::vector<std::uint64_t>> partial(chunks);
  parallel_for(chunks, options.threads, [&](std::size_t k) {
    Engine rng = substream(options.seed, Stream::kCellVolume, k);
    auto& counts = partial[k];
    counts.assign(na * nb, 0);
    const std::size_t n = std::min(kChunkSize, total - k * kChunkSize);
    for (std::size_t i = 0; i < n; ++i) {
      const PhaseState s = system.sample_uniform(rng);
      const int ia = a.locate(s), ib = b.locate(s);
      if (ia >= 0 && ib >= 0) ++counts[std::size_t(ia) * nb + std::size_t(ib)];
    }
  });
  std::vector<std::uint64_t> counts(na * nb, 0);
  for (const auto& p : partial)
    for (std::size_t i = 0; i < counts.size(); ++i) counts[i] += p[i];
  std::size_t dropped = 0;
  for (std::size_t k = 0; k < counts.size(); ++k) {
    if (counts[k] == 0) {
      ++dropped;
      continue;
    }
    const double p = double(counts[k]) / double(total);
    Cell cell;
    cell.id = static_cast<int>(cells.size());
    cell.volume = p * dv;
    cell.volume_stderr = dv * std::sqrt(p * (1.0 - p) / double(total));
    cell.analytic = false;
    table[k] = cell.id;
    cells.push_back(std::move(cell));
  }
  if (dropped > 0)
    spdlog::warn("refine {}: dropped {} intersections with zero estimated volume", id, dropped);
  return Partition(id, c, dv, std::move(cells), std::make_shared<RefinedLocator>(pa, pb, table));
}

SymbolPath symbolize(const Trajectory& trajectory, const Partition& partition) {
  SymbolPath path;
  path.symbols.reserve(trajectory.size());
  for (std::size_t t = 0; t < trajectory.size(); ++t) {
    const int id = partition.locate(trajectory[t]);
    if (id < 0)
      throw ConfigError("state at t=" + std::to_string(t) + " lies in no cell of partition " +
                        partition.id());
    path.symbols.push_back(static_cast<Symbol>(id));
  }
  return path;
}

VolumeEstimate reversed_intersection_volume(const SystemModel& system, const Partition& partition,
                                            const SymbolPath& path, const ControlProtocol& protocol,
                                            std::size_t samples, std::uint64_t seed) {
  if (path.symbols.empty()) throw ConfigError("empty symbol path");
  const int t = static_cast<int>(path.symbols.size()) - 1;
  for (Symbol s : path.symbols)
    if (s >= partition.size()) throw ConfigError("symbol outside partition");
  if (!(partition.cell(path.symbols.back()).volume > 0.0))
    throw ConfigError("zero-volume final cell");
  if (t == 0) return {1.0, 0.0, 0};
  if (t - 1 > protocol.horizon()) throw ConfigError("path longer than the protocol");
  if (samples == 0) throw ConfigError("reversed volume needs samples > 0");

  const std::size_t chunks = chunk_count(samples, kChunkSize);
  std::vector<std::uint64_t> hits(chunks, 0);
  for (std::size_t k = 0; k < chunks; ++k) {
    Engine rng = substream(seed, Stream::kReversedVolume, k);
    const std::size_t n = std::min(kChunkSize, samples - k * kChunkSize);
    for (std::size_t i = 0; i < n; ++i) {
      PhaseState s = partition.sample_in_cell(system, path.symbols.back(), rng);
      bool inside = true;
      for (int j = 1; j <= t && inside; ++j) {
        s = system.inverse_step(s, protocol.at(t - j));
        inside = partition.locate(s) == path.symbols[std::size_t(t - j)];
      }
      hits[k] += inside ? 1 : 0;
    }
  }
  std::uint64_t h = 0;
  for (auto x : hits) h += x;
  const double p = double(h) / double(samples);
  return {p, std::sqrt(std::max(p * (1.0 - p), 0.0) / double(samples)), samples};
}

}  // namespace ksd
