#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ksd/rng.hpp"
#include "ksd/system.hpp"

namespace ksd {

using Symbol = std::uint16_t;

struct SymbolPath {
  std::vector<Symbol> symbols;
  bool operator==(const SymbolPath&) const = default;
};

// [a0, a1) x [b0, b1) in chart coordinates.
struct ChartRect {
  double a0, a1, b0, b1;
  double area() const { return (a1 - a0) * (b1 - b0); }
};

struct Cell {
  int id = 0;
  double volume = 0.0;  // in the system's volume measure
  double volume_stderr = 0.0;
  bool analytic = true;
  std::vector<ChartRect> geometry;  // empty when only a predicate is known
};

class CellLocator {
 public:
  virtual ~CellLocator() = default;
  // Cell id containing s, or -1.
  virtual int locate(const PhaseState& s) const = 0;
};

class Partition {
 public:
  Partition(std::string id, Chart chart, double domain_volume, std::vector<Cell> cells,
            std::shared_ptr<const CellLocator> locator);

  const std::string& id() const { return id_; }
  std::size_t size() const { return cells_.size(); }
  std::span<const Cell> cells() const { return cells_; }
  const Cell& cell(int id) const { return cells_.at(static_cast<std::size_t>(id)); }
  const Chart& chart() const { return chart_; }
  double domain_volume() const { return domain_volume_; }
  std::vector<double> volumes() const;
  bool analytic() const;

  int locate(const PhaseState& s) const { return locator_->locate(s); }
  bool member(int id, const PhaseState& s) const { return locate(s) == id; }
  // Uniform draw inside a cell, exact from geometry when known, else by rejection.
  PhaseState sample_in_cell(const SystemModel& system, int id, Engine& rng) const;

 private:
  std::string id_;
  Chart chart_;
  double domain_volume_;
  std::vector<Cell> cells_;
  std::shared_ptr<const CellLocator> locator_;
};

// Textual partition description:
//   trivial | halves:<q|theta|z> | grid:<rows>x<cols>[@radius]
// with an optional chart qualifier grid:disk:4x4 / grid:sphere:2x4.
// Grid rows split the radial coordinate (r^2 on disks, Z on the sphere),
// columns split the angle; `@radius` keeps an equal-area grid inside that
// radius plus one outer ring cell.
struct PartitionSpec {
  enum class Type { kTrivial, kHalves, kGrid };
  Type type = Type::kTrivial;
  int axis = 0;  // halves: coordinate index
  int rows = 1;
  int cols = 1;
  double radius = 0.0;  // 0: whole domain
  std::string chart;    // optional qualifier, checked against the system

  static PartitionSpec parse(std::string_view text);
  std::string id() const;
  std::string to_string() const;
};

Partition make_partition(const SystemModel& system, const PartitionSpec& spec);
Partition trivial_partition(const SystemModel& system);

struct RefineOptions {
  std::size_t samples_per_cell = 100000;
  std::uint64_t seed = 0;
  unsigned threads = 1;
};

// A v B: nonempty pairwise intersections. Volumes are analytic when both
// partitions carry chart geometry, Monte Carlo otherwise.
Partition refine(const SystemModel& system, const Partition& a, const Partition& b,
                 const RefineOptions& options = {});

SymbolPath symbolize(const Trajectory& trajectory, const Partition& partition);

struct VolumeEstimate {
  double value = 0.0;
  double stderr = 0.0;
  std::size_t samples = 0;
};

// v[a_t ∩ phi(a_{t-1}) ∩ ... ∩ phi^t(a_0)] / v[a_t] for path = (a_0..a_t),
// by uniform sampling inside a_t and testing psi^k(s) ∈ a_{t-k}. The k-th
// inverse step uses lambda_{t-k}.
VolumeEstimate reversed_intersection_volume(const SystemModel& system, const Partition& partition,
                                            const SymbolPath& path, const ControlProtocol& protocol,
                                            std::size_t samples, std::uint64_t seed);

}  // namespace ksd
