#pragma once

#include <Eigen/Core>
#include <array>
#include <optional>
#include <string>
#include <vector>

#include "ksd/phase_state.hpp"
#include "ksd/rng.hpp"

namespace ksd {

// Equal-area chart of the phase-space domain: uniform (a, b) maps to the
// uniform measure on the domain.
//   disk:     a = polar angle in [0, 2pi), b = r^2 / R^2 in [0, 1]
//   sphere:   a = azimuth in [0, 2pi),     b = Z in [-1, 1]
//   interval: a = x in [0, 1),             b unused in [0, 1)
enum class ChartKind { kDisk, kSphere, kInterval };

struct Chart {
  ChartKind kind = ChartKind::kDisk;
  double radius = 1.0;

  double a_lo() const { return 0.0; }
  double a_hi() const;
  double b_lo() const { return kind == ChartKind::kSphere ? -1.0 : 0.0; }
  double b_hi() const { return 1.0; }
  double area() const { return (a_hi() - a_lo()) * (b_hi() - b_lo()); }
  bool operator==(const Chart&) const = default;
};

struct ChartPoint {
  double a = 0.0;
  double b = 0.0;
};

ChartPoint to_chart(const Chart& chart, const PhaseState& s);
PhaseState from_chart(const Chart& chart, ChartPoint p);

// Axis-aligned box in the planar (q, theta) plane.
struct PlanarBox {
  double q_lo, q_hi, p_lo, p_hi;
};

class SystemModel {
 public:
  virtual ~SystemModel() = default;

  virtual std::string name() const = 0;
  virtual Chart chart() const = 0;
  // v(Gamma) in the volume measure used for cell volumes.
  virtual double domain_volume() const { return 1.0; }
  // False when step depends on lambda.
  virtual bool autonomous() const { return true; }

  virtual double hamiltonian(const PhaseState& s, double lambda) const = 0;
  virtual double energy_lower_bound(double lambda) const = 0;
  virtual PhaseState step(const PhaseState& s, double lambda) const = 0;
  virtual PhaseState inverse_step(const PhaseState& s, double lambda) const = 0;
  // Jacobian of step at s, embedded in 3x3 (planar systems use the upper 2x2 block).
  virtual Eigen::Matrix3d tangent(const PhaseState& s, double lambda) const = 0;
  // Projection of an ambient vector onto the tangent space at s.
  virtual Eigen::Vector3d project_tangent(const PhaseState& s, const Eigen::Vector3d& v) const;
  virtual int tangent_dimension() const { return 2; }
  virtual bool in_domain(const PhaseState& s) const = 0;
  // Momentum reversal used to build the backward process.
  virtual PhaseState time_reversed(const PhaseState& s) const = 0;

  // Exact canonical draw when available (otherwise the ensemble module
  // falls back to rejection sampling).
  virtual std::optional<PhaseState> sample_canonical_exact(double /*beta*/, double /*lambda*/,
                                                           Engine& /*rng*/) const {
    return std::nullopt;
  }
  // Integration window for canonical quadrature when the chart is too wide.
  virtual std::optional<PlanarBox> quadrature_box(double /*beta*/, double /*lambda*/) const {
    return std::nullopt;
  }

  PhaseState sample_uniform(Engine& rng) const;
};

// trajectory[0] = s0, trajectory[t+1] = step(trajectory[t], lambda_t).
Trajectory evolve(const SystemModel& system, const PhaseState& s0, const ControlProtocol& protocol);
Trajectory evolve(const SystemModel& system, const PhaseState& s0, const ControlProtocol& protocol,
                  int steps);
// Tangent maps at the first `steps` visited points.
std::vector<Eigen::Matrix3d> tangent_evolve(const SystemModel& system, const PhaseState& s0,
                                            const ControlProtocol& protocol, int steps);
// Determinant of the tangent map restricted to the tangent spaces at s and step(s).
double tangent_determinant(const SystemModel& system, const PhaseState& s, double lambda);
// Any orthonormal basis of the tangent space at s (columns), size tangent_dimension().
std::vector<Eigen::Vector3d> tangent_basis(const SystemModel& system, const PhaseState& s);

}  // namespace ksd
