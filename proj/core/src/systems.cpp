#include "ksd/systems.hpp"

#include <Eigen/Dense>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <string>
#include <unordered_map>

#include "ksd/errors.hpp"

namespace ksd {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

double wrap_angle(double a) {
  a = std::fmod(a, kTwoPi);
  if (a < 0.0) a += kTwoPi;
  if (a >= kTwoPi) a = 0.0;
  return a;
}

// McLachlan's SB3A coefficients; drift with a[i], then kick with b[i].
struct Rkn {
  double a[6];
  double b[6];
};

constexpr Rkn make_rkn() {
  const double a0 = 0.40518861839525227722;
  const double a1 = -0.28714404081652408900;
  const double a2 = 0.5 - (a0 + a1);
  const double b0 = -3.0 / 73.0;
  const double b1 = 17.0 / 59.0;
  const double b2 = 1.0 - 2.0 * (b0 + b1);
  return {{a0, a1, a2, a2, a1, a0}, {b0, b1, b2, b1, b0, 0.0}};
}

constexpr Rkn kRkn = make_rkn();

}  // namespace

double Chart::a_hi() const { return kind == ChartKind::kInterval ? 1.0 : kTwoPi; }

ChartPoint to_chart(const Chart& chart, const PhaseState& s) {
  switch (chart.kind) {
    case ChartKind::kDisk: {
      const double r2 = s.x[0] * s.x[0] + s.x[1] * s.x[1];
      return {wrap_angle(std::atan2(s.x[1], s.x[0])), r2 / (chart.radius * chart.radius)};
    }
    case ChartKind::kSphere:
      return {wrap_angle(std::atan2(s.x[1], s.x[0])), s.x[2]};
    case ChartKind::kInterval:
      return {s.x[0], 0.0};
  }
  return {};
}

PhaseState from_chart(const Chart& chart, ChartPoint p) {
  switch (chart.kind) {
    case ChartKind::kDisk: {
      const double r = chart.radius * std::sqrt(std::max(0.0, p.b));
      return PhaseState::planar(r * std::cos(p.a), r * std::sin(p.a));
    }
    case ChartKind::kSphere: {
      const double z = std::clamp(p.b, -1.0, 1.0);
      const double rho = std::sqrt(std::max(0.0, 1.0 - z * z));
      return PhaseState::spin(rho * std::cos(p.a), rho * std::sin(p.a), z);
    }
    case ChartKind::kInterval:
      return PhaseState{{p.a, 0.0, 0.0}, 1};
  }
  return {};
}

Eigen::Vector3d SystemModel::project_tangent(const PhaseState&, const Eigen::Vector3d& v) const {
  return {v[0], v[1], 0.0};
}

PhaseState SystemModel::sample_uniform(Engine& rng) const {
  const Chart c = chart();
  const double a = c.a_lo() + (c.a_hi() - c.a_lo()) * uniform01(rng);
  const double b = c.b_lo() + (c.b_hi() - c.b_lo()) * uniform01(rng);
  return from_chart(c, {a, b});
}

Trajectory evolve(const SystemModel& system, const PhaseState& s0, const ControlProtocol& protocol) {
  return evolve(system, s0, protocol, protocol.horizon());
}

Trajectory evolve(const SystemModel& system, const PhaseState& s0, const ControlProtocol& protocol,
                  int steps) {
  if (!system.in_domain(s0)) throw DomainError("initial state outside the domain of " + system.name());
  if (steps > protocol.horizon())
    throw ConfigError("requested " + std::to_string(steps) + " steps beyond protocol horizon " +
                      std::to_string(protocol.horizon()));
  Trajectory traj;
  traj.reserve(static_cast<std::size_t>(steps) + 1);
  traj.push_back(s0);
  for (int t = 0; t < steps; ++t) {
    PhaseState next = system.step(traj.back(), protocol.at(t));
    if (!next.finite() || !system.in_domain(next))
      throw DomainError(system.name() + " left its domain at step " + std::to_string(t + 1));
    traj.push_back(next);
  }
  return traj;
}

std::vector<Eigen::Matrix3d> tangent_evolve(const SystemModel& system, const PhaseState& s0,
                                            const ControlProtocol& protocol, int steps) {
  const Trajectory traj = evolve(system, s0, protocol, steps);
  std::vector<Eigen::Matrix3d> maps;
  maps.reserve(static_cast<std::size_t>(steps));
  for (int t = 0; t < steps; ++t) maps.push_back(system.tangent(traj[t], protocol.at(t)));
  return maps;
}

std::vector<Eigen::Vector3d> tangent_basis(const SystemModel& system, const PhaseState& s) {
  if (system.tangent_dimension() == 1) return {Eigen::Vector3d::UnitX()};
  if (s.dim != 3) return {Eigen::Vector3d::UnitX(), Eigen::Vector3d::UnitY()};
  const Eigen::Vector3d n = Eigen::Vector3d(s.x[0], s.x[1], s.x[2]).normalized();
  const Eigen::Vector3d seed =
      std::abs(n.x()) < 0.9 ? Eigen::Vector3d::UnitX() : Eigen::Vector3d::UnitY();
  const Eigen::Vector3d u = (seed - seed.dot(n) * n).normalized();
  return {u, n.cross(u)};
}

double tangent_determinant(const SystemModel& system, const PhaseState& s, double lambda) {
  const Eigen::Matrix3d J = system.tangent(s, lambda);
  if (system.tangent_dimension() == 1) return J(0, 0);
  if (s.dim != 3) return J.topLeftCorner<2, 2>().determinant();
  const auto in = tangent_basis(system, s);
  const auto out = tangent_basis(system, system.step(s, lambda));
  Eigen::Matrix2d m;
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) m(i, j) = out[i].dot(J * in[j]);
  return m.determinant();
}

// ---------------------------------------------------------------- disk

double DiskRotation::hamiltonian(const PhaseState& s, double) const {
  return s.x[0] * s.x[0] + s.x[1] * s.x[1];
}

PhaseState DiskRotation::step(const PhaseState& s, double) const {
  return PhaseState::planar(-s.x[0], -s.x[1]);
}

PhaseState DiskRotation::inverse_step(const PhaseState& s, double) const {
  return PhaseState::planar(-s.x[0], -s.x[1]);
}

Eigen::Matrix3d DiskRotation::tangent(const PhaseState&, double) const {
  Eigen::Matrix3d m = Eigen::Matrix3d::Identity();
  m(0, 0) = -1.0;
  m(1, 1) = -1.0;
  return m;
}

bool DiskRotation::in_domain(const PhaseState& s) const {
  return s.dim == 2 && s.finite() && s.x[0] * s.x[0] + s.x[1] * s.x[1] <= 1.0 + 1e-12;
}

PhaseState DiskRotation::time_reversed(const PhaseState& s) const {
  return PhaseState::planar(s.x[0], -s.x[1]);
}

// ---------------------------------------------------------------- kicked top

double KickedTop::hamiltonian(const PhaseState& s, double) const {
  return alpha_ * s.x[0] + 0.5 * kappa_ * s.x[2] * s.x[2];
}

double KickedTop::energy_lower_bound(double) const {
  return -std::abs(alpha_) + std::min(0.0, 0.5 * kappa_);
}

PhaseState KickedTop::torsion(const PhaseState& s, double sign) const {
  const double phi = sign * kappa_ * s.x[2];
  const double c = std::cos(phi);
  const double sn = std::sin(phi);
  return PhaseState::spin(c * s.x[0] - sn * s.x[1], sn * s.x[0] + c * s.x[1], s.x[2]);
}

namespace {

PhaseState rotate_x(const PhaseState& s, double angle) {
  const double c = std::cos(angle);
  const double sn = std::sin(angle);
  return PhaseState::spin(s.x[0], c * s.x[1] - sn * s.x[2], sn * s.x[1] + c * s.x[2]);
}

PhaseState normalized(const PhaseState& s) {
  const double n = std::sqrt(s.x[0] * s.x[0] + s.x[1] * s.x[1] + s.x[2] * s.x[2]);
  return PhaseState::spin(s.x[0] / n, s.x[1] / n, s.x[2] / n);
}

}  // namespace

PhaseState KickedTop::step(const PhaseState& s, double) const {
  PhaseState out = torsion(rotate_x(s, alpha_), 1.0);
  return renormalize_ ? normalized(out) : out;
}

PhaseState KickedTop::inverse_step(const PhaseState& s, double) const {
  PhaseState out = rotate_x(torsion(s, -1.0), -alpha_);
  return renormalize_ ? normalized(out) : out;
}

Eigen::Matrix3d KickedTop::tangent(const PhaseState& s, double) const {
  const double ca = std::cos(alpha_);
  const double sa = std::sin(alpha_);
  Eigen::Matrix3d R;
  R << 1.0, 0.0, 0.0, 0.0, ca, -sa, 0.0, sa, ca;
  const PhaseState p = rotate_x(s, alpha_);
  const double phi = kappa_ * p.x[2];
  const double c = std::cos(phi);
  const double sn = std::sin(phi);
  const double xo = c * p.x[0] - sn * p.x[1];
  const double yo = sn * p.x[0] + c * p.x[1];
  Eigen::Matrix3d K;
  K << c, -sn, -kappa_ * yo, sn, c, kappa_ * xo, 0.0, 0.0, 1.0;
  return K * R;
}

Eigen::Vector3d KickedTop::project_tangent(const PhaseState& s, const Eigen::Vector3d& v) const {
  const Eigen::Vector3d n = Eigen::Vector3d(s.x[0], s.x[1], s.x[2]).normalized();
  return v - v.dot(n) * n;
}

bool KickedTop::in_domain(const PhaseState& s) const {
  if (s.dim != 3 || !s.finite()) return false;
  const double n2 = s.x[0] * s.x[0] + s.x[1] * s.x[1] + s.x[2] * s.x[2];
  return std::abs(n2 - 1.0) <= 1e-9;
}

PhaseState KickedTop::time_reversed(const PhaseState& s) const {
  return torsion(PhaseState::spin(s.x[0], -s.x[1], s.x[2]), 1.0);
}

// ---------------------------------------------------------------- oscillator

double DrivenOscillator::domain_volume() const { return std::numbers::pi * radius_ * radius_; }

double DrivenOscillator::hamiltonian(const PhaseState& s, double lambda) const {
  return 0.5 * s.x[1] * s.x[1] + 0.5 * lambda * s.x[0] * s.x[0];
}

namespace {

// One unit step of the integrator at fixed lambda is linear in (q, p); the
// composed 2x2 matrices are built once per lambda and kept per thread.
struct StepMatrices {
  std::array<double, 4> forward{};  // row-major
  std::array<double, 4> inverse{};
};

void integrate(double& q, double& p, double lambda, bool backward) {
  constexpr double h = 1.0 / DrivenOscillator::kSubsteps;
  for (int n = 0; n < DrivenOscillator::kSubsteps; ++n) {
    if (!backward) {
      for (int i = 0; i < 6; ++i) {
        q += kRkn.a[i] * h * p;
        p -= kRkn.b[i] * h * lambda * q;
      }
    } else {
      for (int i = 5; i >= 0; --i) {
        p += kRkn.b[i] * h * lambda * q;
        q -= kRkn.a[i] * h * p;
      }
    }
  }
}

const StepMatrices& step_matrices(double lambda) {
  thread_local std::unordered_map<double, StepMatrices> cache;
  thread_local const StepMatrices* last = nullptr;
  thread_local double last_lambda = std::numeric_limits<double>::quiet_NaN();
  if (last && last_lambda == lambda) return *last;
  if (cache.size() > 100000) cache.clear();
  auto [it, fresh] = cache.try_emplace(lambda);
  last = &it->second;
  last_lambda = lambda;
  if (!fresh) return *last;
  for (int dir = 0; dir < 2; ++dir) {
    auto& m = dir == 0 ? it->second.forward : it->second.inverse;
    double q1 = 1.0, p1 = 0.0, q2 = 0.0, p2 = 1.0;
    integrate(q1, p1, lambda, dir == 1);
    integrate(q2, p2, lambda, dir == 1);
    m = {q1, q2, p1, p2};
  }
  return *last;
}

PhaseState apply(const std::array<double, 4>& m, const PhaseState& s) {
  return PhaseState::planar(m[0] * s.x[0] + m[1] * s.x[1], m[2] * s.x[0] + m[3] * s.x[1]);
}

}  // namespace

PhaseState DrivenOscillator::step(const PhaseState& s, double lambda) const {
  return apply(step_matrices(lambda).forward, s);
}

PhaseState DrivenOscillator::inverse_step(const PhaseState& s, double lambda) const {
  return apply(step_matrices(lambda).inverse, s);
}

Eigen::Matrix3d DrivenOscillator::tangent(const PhaseState&, double lambda) const {
  const auto& f = step_matrices(lambda).forward;
  Eigen::Matrix3d m = Eigen::Matrix3d::Identity();
  m(0, 0) = f[0];
  m(0, 1) = f[1];
  m(1, 0) = f[2];
  m(1, 1) = f[3];
  return m;
}

bool DrivenOscillator::in_domain(const PhaseState& s) const {
  return s.dim == 2 && s.finite() && s.x[0] * s.x[0] + s.x[1] * s.x[1] <= radius_ * radius_;
}

PhaseState DrivenOscillator::time_reversed(const PhaseState& s) const {
  return PhaseState::planar(s.x[0], -s.x[1]);
}

std::optional<PhaseState> DrivenOscillator::sample_canonical_exact(double beta, double lambda,
                                                                   Engine& rng) const {
  if (beta <= 0.0) return std::nullopt;
  if (lambda <= 0.0) throw ConfigError("oscillator canonical state needs lambda > 0");
  std::normal_distribution<double> gauss(0.0, 1.0);
  const double q = gauss(rng) / std::sqrt(beta * lambda);
  const double p = gauss(rng) / std::sqrt(beta);
  return PhaseState::planar(q, p);
}

std::optional<PlanarBox> DrivenOscillator::quadrature_box(double beta, double lambda) const {
  if (beta <= 0.0 || lambda <= 0.0) return std::nullopt;
  const double wq = std::min(radius_, 8.0 / std::sqrt(beta * lambda));
  const double wp = std::min(radius_, 8.0 / std::sqrt(beta));
  return PlanarBox{-wq, wq, -wp, wp};
}

}  // namespace ksd
