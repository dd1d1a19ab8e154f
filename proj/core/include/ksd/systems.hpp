#pragma once

#include "ksd/system.hpp"

namespace ksd {

// Rotation of the unit disk by pi: (q, theta) -> (-q, -theta), H = q^2 + theta^2.
class DiskRotation final : public SystemModel {
 public:
  std::string name() const override { return "disk_rotation"; }
  Chart chart() const override { return {ChartKind::kDisk, 1.0}; }
  double hamiltonian(const PhaseState& s, double) const override;
  double energy_lower_bound(double) const override { return 0.0; }
  PhaseState step(const PhaseState& s, double) const override;
  PhaseState inverse_step(const PhaseState& s, double) const override;
  Eigen::Matrix3d tangent(const PhaseState& s, double) const override;
  bool in_domain(const PhaseState& s) const override;
  PhaseState time_reversed(const PhaseState& s) const override;
};

// Classical kicked top on the unit sphere. One step: rotate about x by
// alpha_top, then rotate about z by kappa * Z'.
class KickedTop final : public SystemModel {
 public:
  KickedTop(double alpha_top, double kappa, bool renormalize = true)
      : alpha_(alpha_top), kappa_(kappa), renormalize_(renormalize) {}

  double alpha_top() const { return alpha_; }
  double kappa() const { return kappa_; }

  std::string name() const override { return "kicked_top"; }
  Chart chart() const override { return {ChartKind::kSphere, 1.0}; }
  double hamiltonian(const PhaseState& s, double) const override;
  double energy_lower_bound(double) const override;
  PhaseState step(const PhaseState& s, double) const override;
  PhaseState inverse_step(const PhaseState& s, double) const override;
  Eigen::Matrix3d tangent(const PhaseState& s, double) const override;
  Eigen::Vector3d project_tangent(const PhaseState& s, const Eigen::Vector3d& v) const override;
  bool in_domain(const PhaseState& s) const override;
  // Reflection y -> -y followed by the torsion; an involution G with G phi G = phi^-1.
  PhaseState time_reversed(const PhaseState& s) const override;

 private:
  PhaseState torsion(const PhaseState& s, double sign) const;
  double alpha_;
  double kappa_;
  bool renormalize_;
};

// H = theta^2/2 + lambda q^2/2 on the disk of radius R (Lebesgue measure).
// One step integrates unit time with 64 substeps of a 4th-order symplectic
// Runge-Kutta-Nystrom composition, lambda held fixed within the step.
class DrivenOscillator final : public SystemModel {
 public:
  static constexpr int kSubsteps = 64;

  explicit DrivenOscillator(double domain_radius = 16.0) : radius_(domain_radius) {}

  double domain_radius() const { return radius_; }

  std::string name() const override { return "driven_oscillator"; }
  Chart chart() const override { return {ChartKind::kDisk, radius_}; }
  double domain_volume() const override;
  bool autonomous() const override { return false; }
  double hamiltonian(const PhaseState& s, double lambda) const override;
  double energy_lower_bound(double) const override { return 0.0; }
  PhaseState step(const PhaseState& s, double lambda) const override;
  PhaseState inverse_step(const PhaseState& s, double lambda) const override;
  Eigen::Matrix3d tangent(const PhaseState& s, double lambda) const override;
  bool in_domain(const PhaseState& s) const override;
  PhaseState time_reversed(const PhaseState& s) const override;
  std::optional<PhaseState> sample_canonical_exact(double beta, double lambda,
                                                   Engine& rng) const override;
  std::optional<PlanarBox> quadrature_box(double beta, double lambda) const override;

 private:
  double radius_;
};

}  // namespace ksd
