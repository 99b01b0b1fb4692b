#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "mtl/geometry.hpp"

namespace mtl {

/// Finite set of pairs (x_i, y_i) in R^d x R^d, stored as two aligned clouds.
class PairSet {
 public:
  PairSet() = default;
  PairSet(PointCloud xs, PointCloud ys);

  void add(std::span<const double> x, std::span<const double> y);

  std::size_t size() const { return xs_.size(); }
  bool empty() const { return xs_.empty(); }
  std::size_t dim() const { return xs_.dim(); }

  std::span<const double> x(std::size_t i) const { return xs_[i]; }
  std::span<const double> y(std::size_t i) const { return ys_[i]; }
  const PointCloud& xs() const { return xs_; }
  const PointCloud& ys() const { return ys_; }

 private:
  PointCloud xs_, ys_;
};

/// Outcome of a monotonicity check. On failure `cycle` lists pair indices
/// i_1, ..., i_k such that sum_t <x_{i_t}, y_{i_t} - y_{i_{t+1}}> (indices
/// taken cyclically) equals `deficit` < 0.
struct MonotoneVerdict {
  bool holds = true;
  std::vector<std::size_t> cycle;
  double deficit = 0.0;
};

/// Cyclic sum sum_t <x_{c_t}, y_{c_t} - y_{c_{t+1}}>, with y_{c_{k+1}} := y_{c_1}.
double cyclic_deficit(const PairSet& s, std::span<const std::size_t> cycle);

/// Pairwise monotonicity: <y_j - y_i, x_j - x_i> >= -tol * (1 + max|coord|^2).
MonotoneVerdict is_monotone(const PairSet& s, double tol = 1e-9);

/// Cyclical monotonicity via negative-cycle detection on the complete
/// digraph over pair indices. Cycles summing to >= -tol * (1 + max|<x_i,y_i>|)
/// are accepted.
///
/// `potential_hint` may carry candidate values h_i = psi(x_i) of a convex
/// potential with y_i in its subdifferential at x_i (for example read off
/// transport duals). When the hint passes the O(n^2) feasibility check
/// h_i >= h_j + <y_j, x_i - x_j> - tol*scale the set is certified without the
/// O(n^3) search; a rejected hint falls back to the full search.
MonotoneVerdict is_cyclically_monotone(const PairSet& s, double tol = 1e-9,
                                       std::span<const double> potential_hint = {});

/// Exhaustive check over all simple cycles. Limited to 8 pairs.
bool brute_force_cycle_oracle(const PairSet& s, double tol = 1e-9);

/// psi(x) = max_i (<slopes_i, x> - intercepts_i).
class MaxAffinePotential {
 public:
  MaxAffinePotential() = default;
  MaxAffinePotential(PointCloud slopes, std::vector<double> intercepts, std::size_t base_index);

  std::size_t dim() const { return slopes_.dim(); }
  std::size_t pieces() const { return slopes_.size(); }
  const PointCloud& slopes() const { return slopes_; }
  const std::vector<double>& intercepts() const { return intercepts_; }
  std::size_t base_index() const { return base_index_; }

  double value(std::span<const double> x) const;
  /// Indices of the affine pieces within tol * (1 + |psi(x)|) of the max.
  std::vector<std::size_t> active_pieces(std::span<const double> x, double tol = 1e-9) const;

 private:
  PointCloud slopes_;
  std::vector<double> intercepts_;
  std::size_t base_index_ = 0;
};

/// Thrown by rockafellar_potential when the input is not cyclically monotone.
class NotCyclicallyMonotone : public DomainError {
 public:
  explicit NotCyclicallyMonotone(MonotoneVerdict verdict);
  const MonotoneVerdict& verdict() const { return verdict_; }

 private:
  MonotoneVerdict verdict_;
};

/// Rockafellar's construction: v_i is the longest-path value from
/// `base_index` in the complete digraph with weight <y_j, x_i - x_j> on j -> i,
/// and psi(x) = max_i (v_i + <y_i, x - x_i>). Every input pair then satisfies
/// y_i in d psi(x_i). `potential_hint` has the same meaning as in
/// is_cyclically_monotone and turns the O(n^3) relaxation into a reweighted
/// O(n^2) Dijkstra pass.
MaxAffinePotential rockafellar_potential(const PairSet& s, std::size_t base_index = 0,
                                         std::span<const double> potential_hint = {},
                                         double tol = 1e-9);

/// True when indices a and b lie on a common cycle of zero total weight
/// (within tol * scale). Potentials built from two linked bases differ by a
/// constant; for unlinked bases they generally do not. Pairs sharing an x or
/// a y are always linked, so the support of a non-degenerate transport plan
/// forms a single class.
bool chain_linked(const PairSet& s, std::size_t a, std::size_t b, double tol = 1e-9);

/// Vertices of d psi(x): hull of the slopes of the active pieces.
PolytopeVertices eval_subdifferential(const MaxAffinePotential& psi, std::span<const double> x,
                                      double tol = 1e-9);

}  // namespace mtl
