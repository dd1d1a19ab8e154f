#include "ksd/phase_state.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "ksd/errors.hpp"

namespace ksd {

bool PhaseState::finite() const {
  return std::all_of(x.begin(), x.begin() + dim, [](double v) { return std::isfinite(v); });
}

ControlProtocol ControlProtocol::constant(double value, int horizon) {
  if (horizon < 0) throw ConfigError("protocol horizon must be nonnegative");
  return ControlProtocol(std::vector<double>(static_cast<std::size_t>(horizon) + 1, value));
}

ControlProtocol ControlProtocol::from_points(std::vector<std::pair<int, double>> points, int horizon) {
  if (horizon < 0) throw ConfigError("protocol horizon must be nonnegative");
  if (points.empty()) throw ConfigError("protocol needs at least one (step, value) point");
  std::sort(points.begin(), points.end());
  for (std::size_t i = 1; i < points.size(); ++i) {
    if (points[i].first == points[i - 1].first)
      throw ConfigError("protocol has duplicate step " + std::to_string(points[i].first));
  }
  std::vector<double> v(static_cast<std::size_t>(horizon) + 1);
  for (int t = 0; t <= horizon; ++t) {
    if (t <= points.front().first) {
      v[t] = points.front().second;
    } else if (t >= points.back().first) {
      v[t] = points.back().second;
    } else {
      auto hi = std::upper_bound(points.begin(), points.end(), t,
                                 [](int s, const auto& p) { return s < p.first; });
      auto lo = std::prev(hi);
      const double w = double(t - lo->first) / double(hi->first - lo->first);
      v[t] = lo->second + w * (hi->second - lo->second);
    }
  }
  for (double x : v)
    if (!std::isfinite(x)) throw ConfigError("protocol value is not finite");
  return ControlProtocol(std::move(v));
}

ControlProtocol ControlProtocol::linear_ramp(double from, double to, int horizon) {
  if (horizon <= 0) return constant(from, std::max(horizon, 0));
  return from_points({{0, from}, {horizon, to}}, horizon);
}

ControlProtocol ControlProtocol::from_values(std::vector<double> values) {
  if (values.empty()) throw ConfigError("protocol needs at least one value");
  for (double x : values)
    if (!std::isfinite(x)) throw ConfigError("protocol value is not finite");
  return ControlProtocol(std::move(values));
}

double ControlProtocol::at(int t) const {
  if (t < 0 || t > horizon())
    throw std::out_of_range("protocol queried at t=" + std::to_string(t) + " outside [0, " +
                            std::to_string(horizon()) + "]");
  return values_[static_cast<std::size_t>(t)];
}

bool ControlProtocol::is_constant() const {
  return std::all_of(values_.begin(), values_.end(), [&](double v) { return v == values_.front(); });
}

ControlProtocol ControlProtocol::reversed() const {
  return ControlProtocol(std::vector<double>(values_.rbegin(), values_.rend()));
}

ControlProtocol ControlProtocol::truncated(int horizon) const {
  if (horizon < 0) throw ConfigError("protocol horizon must be nonnegative");
  std::vector<double> v(static_cast<std::size_t>(horizon) + 1);
  for (int t = 0; t <= horizon; ++t) v[t] = values_[std::min<std::size_t>(t, values_.size() - 1)];
  return ControlProtocol(std::move(v));
}

}  // namespace ksd
