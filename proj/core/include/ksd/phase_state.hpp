#pragma once

#include <array>
#include <utility>
#include <vector>

namespace ksd {

// Planar systems use x[0] = q, x[1] = theta. The kicked top stores (X, Y, Z).
struct PhaseState {
  std::array<double, 3> x{0.0, 0.0, 0.0};
  int dim = 2;

  static PhaseState planar(double q, double theta) { return {{q, theta, 0.0}, 2}; }
  static PhaseState spin(double X, double Y, double Z) { return {{X, Y, Z}, 3}; }

  double q() const { return x[0]; }
  double theta() const { return x[1]; }
  bool finite() const;

  bool operator==(const PhaseState&) const = default;
};

using Trajectory = std::vector<PhaseState>;

// lambda_t for t = 0..T. The step from t to t+1 uses lambda_t.
class ControlProtocol {
 public:
  ControlProtocol() : values_{0.0} {}

  static ControlProtocol constant(double value, int horizon);
  // Piecewise-linear through (step, value) pairs, held constant outside them.
  static ControlProtocol from_points(std::vector<std::pair<int, double>> points, int horizon);
  static ControlProtocol linear_ramp(double from, double to, int horizon);
  // values[t] = lambda_t, horizon = values.size() - 1.
  static ControlProtocol from_values(std::vector<double> values);

  int horizon() const { return static_cast<int>(values_.size()) - 1; }
  double at(int t) const;
  double initial() const { return values_.front(); }
  double final() const { return values_.back(); }
  bool is_constant() const;
  const std::vector<double>& values() const { return values_; }

  // schedule(T - t)
  ControlProtocol reversed() const;
  // Same schedule cut or held to a new horizon.
  ControlProtocol truncated(int horizon) const;

 private:
  explicit ControlProtocol(std::vector<double> values) : values_(std::move(values)) {}
  std::vector<double> values_;
};

}  // namespace ksd
