#include "network_simplex.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace mtl::detail {

TransportSimplex::TransportSimplex(const std::vector<double>& supply, const std::vector<double>& demand,
                                   double artificial_cost, double eps)
    : n_(supply.size()), m_(demand.size()), nodes_(n_ + m_), root_(n_ + m_), eps_(eps) {
  const std::size_t total = nodes_ + 1;
  parent_.assign(total, kNone);
  pred_.assign(total, kNone);
  depth_.assign(total, 0);
  dir_.assign(total, 0);
  pi_.assign(total, 0.0);
  first_child_.assign(total, kNone);
  next_sib_.assign(total, kNone);
  prev_sib_.assign(total, kNone);

  // Artificial arc k connects node k with the root, oriented along its
  // initial flow so the starting basis is strongly feasible.
  for (std::size_t v = 0; v < nodes_; ++v) {
    const bool is_source = v < n_;
    const double b = is_source ? supply[v] : demand[v - n_];
    if (is_source) {
      src_.push_back(v);
      dst_.push_back(root_);
      dir_[v] = kUp;
      pi_[v] = -artificial_cost;
    } else {
      src_.push_back(root_);
      dst_.push_back(v);
      dir_[v] = kDown;
      pi_[v] = artificial_cost;
    }
    cost_.push_back(artificial_cost);
    flow_.push_back(b);
    pred_[v] = v;
    depth_[v] = 1;
    attach(v, root_);
  }
}

void TransportSimplex::reserve_arcs(std::size_t count) {
  src_.reserve(nodes_ + count);
  dst_.reserve(nodes_ + count);
  cost_.reserve(nodes_ + count);
  flow_.reserve(nodes_ + count);
}

std::size_t TransportSimplex::add_arc(std::size_t source, std::size_t sink, double cost) {
  src_.push_back(source);
  dst_.push_back(n_ + sink);
  cost_.push_back(cost);
  flow_.push_back(0.0);
  return src_.size() - nodes_ - 1;
}

double TransportSimplex::max_artificial_flow() const {
  double worst = 0.0;
  for (std::size_t v = 0; v < nodes_; ++v) worst = std::max(worst, flow_[v]);
  return worst;
}

void TransportSimplex::detach(std::size_t v) {
  const std::size_t p = parent_[v];
  if (prev_sib_[v] != kNone) next_sib_[prev_sib_[v]] = next_sib_[v];
  else first_child_[p] = next_sib_[v];
  if (next_sib_[v] != kNone) prev_sib_[next_sib_[v]] = prev_sib_[v];
  prev_sib_[v] = next_sib_[v] = kNone;
}

void TransportSimplex::attach(std::size_t v, std::size_t parent) {
  parent_[v] = parent;
  prev_sib_[v] = kNone;
  next_sib_[v] = first_child_[parent];
  if (first_child_[parent] != kNone) prev_sib_[first_child_[parent]] = v;
  first_child_[parent] = v;
}

std::size_t TransportSimplex::find_entering() {
  const std::size_t pool = src_.size() - nodes_;
  if (pool == 0) return kNone;
  const std::size_t block = std::max<std::size_t>(32, static_cast<std::size_t>(std::sqrt(static_cast<double>(pool))));
  double best_rc = -eps_;
  std::size_t best = kNone;
  std::size_t left = block;
  for (std::size_t k = 0; k < pool; ++k) {
    const std::size_t pos = (cursor_ + k) % pool;
    const std::size_t e = nodes_ + pos;
    const double rc = cost_[e] + pi_[src_[e]] - pi_[dst_[e]];
    if (rc < best_rc) {
      best_rc = rc;
      best = e;
    }
    if (--left == 0) {
      if (best != kNone) {
        cursor_ = (pos + 1) % pool;
        return best;
      }
      left = block;
    }
  }
  return best;
}

void TransportSimplex::solve() {
  for (;;) {
    const std::size_t e = find_entering();
    if (e == kNone) return;
    pivot(e);
    ++pivots_;
  }
}

void TransportSimplex::pivot(std::size_t e) {
  const std::size_t first = src_[e], second = dst_[e];
  std::size_t u = first, v = second;
  while (u != v) {
    if (depth_[u] > depth_[v]) u = parent_[u];
    else if (depth_[v] > depth_[u]) v = parent_[v];
    else {
      u = parent_[u];
      v = parent_[v];
    }
  }
  const std::size_t join = u;

  // Leaving arc: last blocking arc met when walking the cycle from the join
  // in the direction of the flow push.
  double delta = std::numeric_limits<double>::infinity();
  std::size_t u_out = kNone;
  int side = 0;
  for (std::size_t w = first; w != join; w = parent_[w]) {
    if (dir_[w] == kUp && flow_[pred_[w]] < delta) {
      delta = flow_[pred_[w]];
      u_out = w;
      side = 1;
    }
  }
  for (std::size_t w = second; w != join; w = parent_[w]) {
    if (dir_[w] == kDown && flow_[pred_[w]] <= delta) {
      delta = flow_[pred_[w]];
      u_out = w;
      side = 2;
    }
  }
  if (side == 0) throw std::logic_error("network simplex: unbounded pivot");

  if (delta > 0.0) {
    flow_[e] += delta;
    for (std::size_t w = first; w != join; w = parent_[w]) flow_[pred_[w]] += dir_[w] == kUp ? -delta : delta;
    for (std::size_t w = second; w != join; w = parent_[w]) flow_[pred_[w]] += dir_[w] == kUp ? delta : -delta;
    flow_[pred_[u_out]] = 0.0;
  }

  if (side == 1) rehang(first, second, u_out, e);
  else rehang(second, first, u_out, e);
}

void TransportSimplex::rehang(std::size_t u_in, std::size_t v_in, std::size_t u_out, std::size_t e) {
  auto& path = scratch_path_;
  path.clear();
  for (std::size_t w = u_in;; w = parent_[w]) {
    path.push_back(w);
    if (w == u_out) break;
  }
  saved_pred_.resize(path.size());
  saved_dir_.resize(path.size());
  for (std::size_t i = 0; i < path.size(); ++i) {
    saved_pred_[i] = pred_[path[i]];
    saved_dir_[i] = dir_[path[i]];
  }
  // Detach bottom-up so every node is still linked to its old parent when removed.
  for (std::size_t i = 0; i < path.size(); ++i) detach(path[i]);
  // Reverse the path: the old parent becomes the child.
  for (std::size_t i = 1; i < path.size(); ++i) {
    pred_[path[i]] = saved_pred_[i - 1];
    dir_[path[i]] = -saved_dir_[i - 1];
    attach(path[i], path[i - 1]);
  }
  pred_[u_in] = e;
  dir_[u_in] = src_[e] == u_in ? kUp : kDown;
  attach(u_in, v_in);

  auto& stack = scratch_stack_;
  stack.clear();
  stack.push_back(u_in);
  while (!stack.empty()) {
    const std::size_t w = stack.back();
    stack.pop_back();
    const std::size_t p = parent_[w];
    depth_[w] = depth_[p] + 1;
    pi_[w] = dir_[w] == kUp ? pi_[p] - cost_[pred_[w]] : pi_[p] + cost_[pred_[w]];
    for (std::size_t c = first_child_[w]; c != kNone; c = next_sib_[c]) stack.push_back(c);
  }
}

std::vector<long double> TransportSimplex::exact_potentials() const {
  std::vector<long double> pi(nodes_ + 1, 0.0L);
  std::vector<std::size_t> stack{root_};
  while (!stack.empty()) {
    const std::size_t w = stack.back();
    stack.pop_back();
    if (w != root_) {
      const std::size_t p = parent_[w];
      const long double c = cost_[pred_[w]];
      pi[w] = dir_[w] == kUp ? pi[p] - c : pi[p] + c;
    }
    for (std::size_t c = first_child_[w]; c != kNone; c = next_sib_[c]) stack.push_back(c);
  }
  return pi;
}

}  // namespace mtl::detail
