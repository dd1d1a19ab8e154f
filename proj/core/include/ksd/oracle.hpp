#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "ksd/partition.hpp"
#include "ksd/system.hpp"

namespace ksd {

inline constexpr int kOracleMaxCells = 16;
inline constexpr int kOracleMaxDepth = 64;

// Permutation of N cells with cell volumes and initial probabilities.
struct DiscreteSystem {
  std::vector<int> perm;
  std::vector<double> volumes;
  std::vector<double> p0;

  std::size_t size() const { return perm.size(); }
  // Throws ConfigError unless perm is a bijection, volumes > 0 sum to 1 and p0 sums to 1.
  void validate() const;
};

struct ExactPath {
  std::vector<int> cells;  // a_0..a_t
  double probability = 0.0;
};

// All paths with nonzero probability (exactly one per cell with p0 > 0).
std::vector<ExactPath> exact_path_distribution(const DiscreteSystem& sys, int depth);

struct OracleTerms {
  int t = 0;
  double block_entropy = 0.0;        // H of (a_0..a_t)
  double conditional_entropy = 0.0;  // H(a_t | a_0..a_{t-1})
  double c_forward = 0.0;            // c_t from phi^k(a_{t-k}) ∩ a_t
  double c_reversed = 0.0;           // c_t from psi^k(a_t) ∩ a_{t-k}
  double d = 0.0;
  double entropy = 0.0;              // S[rho_t] = sum v z(p/v)
  double coarse_differential = 0.0;  // E S[rho_cg], differential form
  double appendix_gap = 0.0;         // conditional_entropy - entropy - c - d
};

std::vector<OracleTerms> exact_terms(const DiscreteSystem& sys, int depth);

// Random instance with N in [2, max_cells]; some p0 entries may be zero.
DiscreteSystem random_discrete_system(Engine& rng, int max_cells = 8);

struct OracleSweep {
  std::size_t instances = 0;
  double min_appendix_gap = 0.0;
  double max_route_disagreement = 0.0;  // |c_forward - c_reversed|
  std::size_t violations = 0;
  double min_lemma_gap = 0.0;  // min of x(ln x - ln y) - (x - y)
  std::size_t lemma_pairs = 0;
  std::size_t lemma_violations = 0;
};

OracleSweep oracle_property_sweep(std::size_t instances, int max_cells, int max_depth,
                                  std::size_t lemma_pairs, std::uint64_t seed, unsigned threads = 1,
                                  double tolerance = 1e-12);

// The discrete system as a map on [0, 1): cell i is [c_i, c_i + v_i) and
// is sent affinely onto cell perm[i]. H = -ln(p0_i / v_i) makes the beta = 1
// canonical state reproduce p0.
class DiscreteSystemModel final : public SystemModel {
 public:
  explicit DiscreteSystemModel(DiscreteSystem sys);

  const DiscreteSystem& discrete() const { return sys_; }
  int cell_of(double x) const;
  // The cells as a partition with analytic volumes.
  Partition partition() const;

  std::string name() const override { return "discrete"; }
  Chart chart() const override { return {ChartKind::kInterval, 1.0}; }
  double hamiltonian(const PhaseState& s, double) const override;
  double energy_lower_bound(double) const override;
  PhaseState step(const PhaseState& s, double) const override;
  PhaseState inverse_step(const PhaseState& s, double) const override;
  Eigen::Matrix3d tangent(const PhaseState& s, double) const override;
  int tangent_dimension() const override { return 1; }
  bool in_domain(const PhaseState& s) const override;
  PhaseState time_reversed(const PhaseState& s) const override { return s; }

 private:
  DiscreteSystem sys_;
  std::vector<double> starts_;  // N + 1 boundaries
  std::vector<int> inverse_;
};

}  // namespace ksd
