#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "mtl/geometry.hpp"
#include "mtl/monotone.hpp"

namespace mtl {

/// Finitely supported probability measure.
class DiscreteMeasure {
 public:
  DiscreteMeasure() = default;

  /// Validates positivity, distinct support points and unit mass; weights
  /// whose sum is within 1e-9 of one are renormalized.
  static DiscreteMeasure make(PointCloud points, std::vector<double> weights);
  static DiscreteMeasure uniform(PointCloud points);
  /// No validation; used to report margins that may be off.
  static DiscreteMeasure unchecked(PointCloud points, std::vector<double> weights);

  std::size_t size() const { return points_.size(); }
  std::size_t dim() const { return points_.dim(); }
  const PointCloud& points() const { return points_; }
  const std::vector<double>& weights() const { return weights_; }
  bool is_uniform() const;

 private:
  PointCloud points_;
  std::vector<double> weights_;
};

struct PlanEntry {
  std::size_t i = 0, j = 0;
  double mass = 0.0;
};

/// Sparse transport plan between two measures. When produced by the exact
/// solver it also carries dual potentials with
/// source_dual[i] + target_dual[j] <= |x_i - y_j|^2, tight on the plan.
struct Coupling {
  DiscreteMeasure source, target;
  std::vector<PlanEntry> plan;
  std::vector<double> source_dual, target_dual;

  double cost() const;
};

struct SolverOptions {
  /// Above this many source-target pairs the solver prices arcs lazily
  /// instead of materializing the full bipartite graph.
  std::size_t dense_arc_limit = 1u << 18;
  /// Candidate arcs seeded per source and per target before lazy pricing.
  std::size_t initial_neighbours = 16;
  /// Arcs added per source in each pricing round.
  std::size_t arcs_per_round = 4;
};

/// Exact minimizer of sum pi_ij |x_i - y_j|^2 over couplings of P and Q.
Coupling solve_discrete_ot(const DiscreteMeasure& p, const DiscreteMeasure& q, const SolverOptions& options = {});

/// Minimum over all n! permutation couplings; uniform weights, n <= 8.
Coupling brute_force_ot(const DiscreteMeasure& p, const DiscreteMeasure& q);

/// Monotone rearrangement (north-west corner on sorted supports); d = 1.
Coupling sorted_1d_ot(const DiscreteMeasure& p, const DiscreteMeasure& q);

/// Pairs (x_i, y_j) carrying mass above floor * min(min source weight, min target weight).
PairSet coupling_support(const Coupling& pi, double floor = 1e-12);

/// Values psi(x) at each support pair of coupling_support(pi, floor) for the
/// convex potential read off the duals; usable as a potential hint for the
/// monotone module. Empty when the coupling carries no duals.
std::vector<double> support_potential_hint(const Coupling& pi, double floor = 1e-12);

/// Row and column sums of the plan on the original support points.
std::pair<DiscreteMeasure, DiscreteMeasure> margins_of(const Coupling& pi);

/// Largest absolute deviation of margins_of(pi) from the stored measures.
double margin_error(const Coupling& pi);

/// Affine map x -> matrix * x + shift.
struct LinearMap {
  Eigen::MatrixXd matrix;
  Eigen::VectorXd shift;

  Vector apply(std::span<const double> x) const;
};

/// Brenier map between centred Gaussians N(0, s1) and N(0, s2):
/// A = s1^{-1/2} (s1^{1/2} s2 s1^{1/2})^{1/2} s1^{-1/2}.
LinearMap gaussian_brenier(const Eigen::MatrixXd& s1, const Eigen::MatrixXd& s2);

}  // namespace mtl
