#pragma once

#include <cstddef>
#include <vector>

namespace mtl::detail {

// Primal network simplex for uncapacitated transportation problems.
//
// Nodes 0..n-1 are sources, n..n+m-1 sinks, n+m the artificial root. Every
// node starts attached to the root by an artificial arc of cost
// `artificial_cost`; real arcs can be added between solve() calls and the
// current basis is kept, which is what lazy pricing relies on.
//
// Anti-cycling uses strongly feasible bases (Cunningham's leaving-arc rule);
// entering arcs are chosen by block search over the arc pool, first
// minimum wins, so runs are deterministic for a fixed arc order.
class TransportSimplex {
 public:
  TransportSimplex(const std::vector<double>& supply, const std::vector<double>& demand, double artificial_cost,
                   double eps);

  std::size_t add_arc(std::size_t source, std::size_t sink, double cost);
  void reserve_arcs(std::size_t count);

  // Pivots until no pooled arc has reduced cost below -eps.
  void solve();

  std::size_t sources() const { return n_; }
  std::size_t sinks() const { return m_; }
  std::size_t arc_count() const { return src_.size() - nodes_; }

  // Arc k of the pool (0-based, excluding artificial arcs).
  std::size_t arc_source(std::size_t k) const { return src_[nodes_ + k]; }
  std::size_t arc_sink(std::size_t k) const { return dst_[nodes_ + k] - n_; }
  double arc_flow(std::size_t k) const { return flow_[nodes_ + k]; }

  double source_potential(std::size_t i) const { return pi_[i]; }
  double sink_potential(std::size_t j) const { return pi_[n_ + j]; }

  double max_artificial_flow() const;

  // Node potentials recomputed along the final tree in extended precision.
  std::vector<long double> exact_potentials() const;

  std::size_t pivots() const { return pivots_; }

 private:
  static constexpr int kUp = 1;     // pred arc points from node to parent
  static constexpr int kDown = -1;  // pred arc points from parent to node
  static constexpr std::size_t kNone = static_cast<std::size_t>(-1);

  std::size_t find_entering();
  void pivot(std::size_t entering);
  void rehang(std::size_t u_in, std::size_t v_in, std::size_t u_out, std::size_t entering);
  void detach(std::size_t v);
  void attach(std::size_t v, std::size_t parent);

  std::size_t n_, m_, nodes_, root_;
  double eps_;

  std::vector<std::size_t> src_, dst_;
  std::vector<double> cost_, flow_;

  std::vector<std::size_t> parent_, pred_, depth_;
  std::vector<int> dir_;
  std::vector<double> pi_;
  std::vector<std::size_t> first_child_, next_sib_, prev_sib_;

  std::size_t cursor_ = 0;
  std::size_t pivots_ = 0;
  std::vector<std::size_t> scratch_path_, scratch_stack_;
  std::vector<std::size_t> saved_pred_;
  std::vector<int> saved_dir_;
};

}  // namespace mtl::detail
