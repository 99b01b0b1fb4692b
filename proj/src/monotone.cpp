#include "mtl/monotone.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <numeric>
#include <string>

namespace mtl {

namespace {

double cyclic_scale(const PairSet& s) {
  double m = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) m = std::max(m, std::abs(dot(s.x(i), s.y(i))));
  return 1.0 + m;
}

void rotate_to_min(std::vector<std::size_t>& cycle) {
  auto it = std::min_element(cycle.begin(), cycle.end());
  std::rotate(cycle.begin(), it, cycle.end());
}

// Shortest-path labels p on the digraph with weight
//   w(j -> i) = <y_j, x_j> - <y_j, x_i>,
// whose cycles are the reversed cycles of the monotonicity digraph (same
// total). Relaxation demands an improvement of more than `eps`, so on
// success every edge satisfies p_i <= p_j + w(j -> i) + eps. On failure
// the returned cycle is in the orientation of cyclic_deficit.
struct LabelResult {
  std::vector<double> labels;
  std::vector<std::size_t> cycle;
};

LabelResult correct_labels(const PairSet& s, double eps, std::span<const double> start) {
  const std::size_t n = s.size();
  LabelResult r;
  r.labels.assign(n, 0.0);
  if (!start.empty()) {
    if (start.size() != n) throw std::invalid_argument("potential hint has wrong length");
    for (std::size_t i = 0; i < n; ++i) r.labels[i] = -start[i];
  }
  std::vector<double> self(n);
  for (std::size_t j = 0; j < n; ++j) self[j] = dot(s.y(j), s.x(j));

  std::vector<std::size_t> pred(n, n), hops(n, 0), seen(n, 0);
  std::size_t stamp = 0;
  std::vector<char> queued(n, 1);
  std::deque<std::size_t> queue(n);
  std::iota(queue.begin(), queue.end(), 0);
  auto& p = r.labels;

  while (!queue.empty()) {
    const std::size_t j = queue.front();
    queue.pop_front();
    queued[j] = 0;
    const double base = p[j] + self[j];
    const auto yj = s.y(j);
    for (std::size_t i = 0; i < n; ++i) {
      if (i == j) continue;
      const double cand = base - dot(yj, s.x(i));
      if (cand < p[i] - eps) {
        p[i] = cand;
        pred[i] = j;
        hops[i] = hops[j] + 1;
        if (hops[i] >= n) {
          // Long predecessor chain: look for a cycle through i.
          ++stamp;
          std::size_t u = i;
          while (u != n && seen[u] != stamp) {
            seen[u] = stamp;
            u = pred[u];
          }
          if (u != n) {
            std::size_t v = u;
            do {
              r.cycle.push_back(v);
              v = pred[v];
            } while (v != u);
            rotate_to_min(r.cycle);
            return r;
          }
          hops[i] = 0;
        }
        if (!queued[i]) {
          queued[i] = 1;
          queue.push_back(i);
        }
      }
    }
  }
  return r;
}

}  // namespace

PairSet::PairSet(PointCloud xs, PointCloud ys) : xs_(std::move(xs)), ys_(std::move(ys)) {
  if (xs_.size() != ys_.size()) throw std::invalid_argument("PairSet: x and y counts differ");
  if (!xs_.empty() && xs_.dim() != ys_.dim()) throw std::invalid_argument("PairSet: x and y dimensions differ");
}

void PairSet::add(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw std::invalid_argument("PairSet::add: x and y dimensions differ");
  xs_.push_back(x);
  ys_.push_back(y);
}

double cyclic_deficit(const PairSet& s, std::span<const std::size_t> cycle) {
  double total = 0.0;
  for (std::size_t t = 0; t < cycle.size(); ++t) {
    const std::size_t i = cycle[t], next = cycle[(t + 1) % cycle.size()];
    const auto x = s.x(i), y = s.y(i), yn = s.y(next);
    for (std::size_t k = 0; k < x.size(); ++k) total += x[k] * (y[k] - yn[k]);
  }
  return total;
}

MonotoneVerdict is_monotone(const PairSet& s, double tol) {
  double m = 0.0;
  for (double v : s.xs().data()) m = std::max(m, v * v);
  for (double v : s.ys().data()) m = std::max(m, v * v);
  const double threshold = -tol * (1.0 + m);
  for (std::size_t i = 0; i < s.size(); ++i) {
    for (std::size_t j = i + 1; j < s.size(); ++j) {
      double inner = 0.0;
      for (std::size_t k = 0; k < s.dim(); ++k) inner += (s.y(j)[k] - s.y(i)[k]) * (s.x(j)[k] - s.x(i)[k]);
      if (inner < threshold) {
        MonotoneVerdict v{false, {i, j}, 0.0};
        v.deficit = cyclic_deficit(s, v.cycle);
        return v;
      }
    }
  }
  return {};
}

MonotoneVerdict is_cyclically_monotone(const PairSet& s, double tol, std::span<const double> potential_hint) {
  if (s.size() < 2) return {};
  const double eps = tol * cyclic_scale(s) / static_cast<double>(s.size());
  LabelResult r = correct_labels(s, eps, potential_hint);
  if (r.cycle.empty()) return {};
  MonotoneVerdict v{false, std::move(r.cycle), 0.0};
  v.deficit = cyclic_deficit(s, v.cycle);
  return v;
}

bool brute_force_cycle_oracle(const PairSet& s, double tol) {
  const std::size_t n = s.size();
  if (n > 8) throw std::invalid_argument("brute_force_cycle_oracle: at most 8 pairs supported");
  const double threshold = -tol * cyclic_scale(s);
  // gain[i][j] = <x_i, y_i - y_j>: contribution of stepping from i to j.
  std::vector<std::vector<double>> gain(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) gain[i][j] = dot(s.x(i), s.y(i)) - dot(s.x(i), s.y(j));

  // Cycles are enumerated with their smallest index first; both orientations occur.
  std::vector<char> used(n, 0);
  bool ok = true;
  auto extend = [&](auto&& self, std::size_t start, std::size_t last, double partial, std::size_t len) -> void {
    if (!ok) return;
    if (len >= 2 && partial + gain[last][start] < threshold) {
      ok = false;
      return;
    }
    for (std::size_t next = start + 1; next < n; ++next) {
      if (used[next]) continue;
      used[next] = 1;
      self(self, start, next, partial + gain[last][next], len + 1);
      used[next] = 0;
    }
  };
  for (std::size_t start = 0; start < n && ok; ++start) {
    used[start] = 1;
    extend(extend, start, start, 0.0, 1);
    used[start] = 0;
  }
  return ok;
}

// ---------------------------------------------------------------------------

MaxAffinePotential::MaxAffinePotential(PointCloud slopes, std::vector<double> intercepts, std::size_t base_index)
    : slopes_(std::move(slopes)), intercepts_(std::move(intercepts)), base_index_(base_index) {
  if (slopes_.empty()) throw std::invalid_argument("MaxAffinePotential: no pieces");
  if (slopes_.size() != intercepts_.size())
    throw std::invalid_argument("MaxAffinePotential: slopes and intercepts differ in length");
  if (base_index_ >= slopes_.size()) throw std::invalid_argument("MaxAffinePotential: base index out of range");
  for (double c : intercepts_)
    if (!std::isfinite(c)) throw std::invalid_argument("MaxAffinePotential: non-finite intercept");
}

double MaxAffinePotential::value(std::span<const double> x) const {
  if (x.size() != dim()) throw std::invalid_argument("MaxAffinePotential::value: dimension mismatch");
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < pieces(); ++i) best = std::max(best, dot(slopes_[i], x) - intercepts_[i]);
  return best;
}

std::vector<std::size_t> MaxAffinePotential::active_pieces(std::span<const double> x, double tol) const {
  if (x.size() != dim()) throw std::invalid_argument("MaxAffinePotential: dimension mismatch");
  std::vector<double> vals(pieces());
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < pieces(); ++i) {
    vals[i] = dot(slopes_[i], x) - intercepts_[i];
    best = std::max(best, vals[i]);
  }
  const double cut = best - tol * (1.0 + std::abs(best));
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < pieces(); ++i)
    if (vals[i] >= cut) out.push_back(i);
  return out;
}

NotCyclicallyMonotone::NotCyclicallyMonotone(MonotoneVerdict verdict)
    : DomainError("pair set is not cyclically monotone (cycle of length " + std::to_string(verdict.cycle.size()) +
                  ", deficit " + std::to_string(verdict.deficit) + ")"),
      verdict_(std::move(verdict)) {}

MaxAffinePotential rockafellar_potential(const PairSet& s, std::size_t base_index,
                                         std::span<const double> potential_hint, double tol) {
  const std::size_t n = s.size();
  if (n == 0) throw std::invalid_argument("rockafellar_potential: empty pair set");
  if (base_index >= n) throw std::invalid_argument("rockafellar_potential: base index out of range");

  const double eps = tol * cyclic_scale(s) / static_cast<double>(n);
  LabelResult feasible = correct_labels(s, eps, potential_hint);
  if (!feasible.cycle.empty()) {
    MonotoneVerdict v{false, std::move(feasible.cycle), 0.0};
    v.deficit = cyclic_deficit(s, v.cycle);
    throw NotCyclicallyMonotone(std::move(v));
  }
  const auto& p = feasible.labels;
  std::vector<double> self(n);
  for (std::size_t j = 0; j < n; ++j) self[j] = dot(s.y(j), s.x(j));

  // Dense Dijkstra from the base on reduced weights w(j->i) + p_j - p_i >= -eps.
  std::vector<double> reduced(n, std::numeric_limits<double>::infinity());
  std::vector<char> done(n, 0);
  reduced[base_index] = 0.0;
  for (std::size_t step = 0; step < n; ++step) {
    std::size_t j = n;
    for (std::size_t i = 0; i < n; ++i)
      if (!done[i] && (j == n || reduced[i] < reduced[j])) j = i;
    done[j] = 1;
    const double offset = self[j] + p[j];
    for (std::size_t i = 0; i < n; ++i) {
      if (done[i]) continue;
      const double w = std::max(0.0, offset - dot(s.y(j), s.x(i)) - p[i]);
      reduced[i] = std::min(reduced[i], reduced[j] + w);
    }
  }

  // Longest-path values v_i = -(true shortest distance from the base).
  std::vector<double> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = -(reduced[i] - p[base_index] + p[i]);
  // Undo the clamping slack with a couple of direct relaxation sweeps.
  for (int sweep = 0; sweep < 2; ++sweep) {
    bool changed = false;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        if (i == j) continue;
        const double cand = v[j] + dot(s.y(j), s.x(i)) - self[j];
        if (cand > v[i]) {
          v[i] = cand;
          changed = true;
        }
      }
    }
    if (!changed) break;
  }

  std::vector<double> intercepts(n);
  for (std::size_t i = 0; i < n; ++i) intercepts[i] = self[i] - v[i];
  return MaxAffinePotential(s.ys(), std::move(intercepts), base_index);
}

bool chain_linked(const PairSet& s, std::size_t a, std::size_t b, double tol) {
  if (a >= s.size() || b >= s.size()) throw std::invalid_argument("chain_linked: index out of range");
  if (a == b) return true;
  const auto pa = rockafellar_potential(s, a, {}, tol);
  const auto pb = rockafellar_potential(s, b, {}, tol);
  // Longest path a -> b plus longest path b -> a.
  const double ab = dot(s.y(b), s.x(b)) - pa.intercepts()[b];
  const double ba = dot(s.y(a), s.x(a)) - pb.intercepts()[a];
  return std::abs(ab + ba) <= tol * cyclic_scale(s);
}

PolytopeVertices eval_subdifferential(const MaxAffinePotential& psi, std::span<const double> x, double tol) {
  const auto active = psi.active_pieces(x, tol);
  PointCloud slopes(psi.dim());
  for (auto i : active) slopes.push_back(psi.slopes()[i]);
  return convex_hull_vertices(slopes);
}

}  // namespace mtl
