#include "mtl/ranks.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <stdexcept>
#include <string>

#include "mtl/random.hpp"

namespace mtl {

namespace {

constexpr double kOriginJitter = 1e-9;

}  // namespace

CenterOutwardGrid center_outward_grid(std::size_t n_r, std::size_t n_s, std::size_t n_0, std::size_t dim,
                                      std::uint64_t seed) {
  if (dim < 2) throw std::invalid_argument("center_outward_grid: dimension must be at least 2 (use sorted ranks in d = 1)");
  if (n_r < 1 || n_s < 1) throw std::invalid_argument("center_outward_grid: n_r and n_s must be positive");

  CenterOutwardGrid g;
  g.n_r = n_r;
  g.n_s = n_s;
  g.n_0 = n_0;
  g.dim = dim;
  g.seed = seed;
  g.points = PointCloud(dim);
  g.directions = PointCloud(dim);
  g.points.reserve(n_r * n_s + n_0);

  PointCloud shared(dim);
  if (dim >= 3) {
    Philox rng(stream_key(seed, dim, n_s));
    Vector u(dim);
    while (shared.size() < n_s) {
      double len = 0.0;
      for (auto& v : u) {
        v = rng.normal();
        len += v * v;
      }
      len = std::sqrt(len);
      if (len < 1e-12) continue;
      for (auto& v : u) v /= len;
      shared.push_back(u);
    }
  }

  Vector p(dim), u(dim);
  for (std::size_t k = 1; k <= n_r; ++k) {
    const double r = g.radius(k);
    const double offset = static_cast<double>((k - 1) % 2) * std::numbers::pi / static_cast<double>(n_s);
    for (std::size_t s = 0; s < n_s; ++s) {
      if (dim == 2) {
        const double t = 2.0 * std::numbers::pi * static_cast<double>(s) / static_cast<double>(n_s) + offset;
        u = {std::cos(t), std::sin(t)};
      } else {
        u.assign(shared[s].begin(), shared[s].end());
      }
      for (std::size_t c = 0; c < dim; ++c) p[c] = r * u[c];
      g.points.push_back(p);
      g.directions.push_back(u);
      g.ring.push_back(k);
    }
  }
  Vector e1(dim, 0.0);
  e1[0] = 1.0;
  for (std::size_t c = 0; c < n_0; ++c) {
    Vector o(dim, 0.0);
    o[0] = kOriginJitter * static_cast<double>(c);
    g.points.push_back(o);
    g.directions.push_back(e1);
    g.ring.push_back(0);
  }
  return g;
}

RankAssignment center_outward_ranks(const PointCloud& sample, const CenterOutwardGrid& grid) {
  if (sample.size() != grid.size()) {
    throw std::invalid_argument("center_outward_ranks: sample has " + std::to_string(sample.size()) +
                                " points but the grid has " + std::to_string(grid.size()));
  }
  if (sample.dim() != grid.dim) throw std::invalid_argument("center_outward_ranks: dimension mismatch");
  if (grid.dim < 2) throw std::invalid_argument("center_outward_ranks: dimension must be at least 2");

  RankAssignment out{sample, grid, {}, solve_discrete_ot(DiscreteMeasure::uniform(sample), DiscreteMeasure::uniform(grid.points))};
  const std::size_t n = sample.size();
  out.assignment.assign(n, n);
  std::vector<char> taken(n, 0);
  for (const auto& e : out.coupling.plan) {
    if (out.assignment[e.i] != n || taken[e.j]) throw std::logic_error("center_outward_ranks: plan is not a permutation");
    out.assignment[e.i] = e.j;
    taken[e.j] = 1;
  }
  if (std::find(out.assignment.begin(), out.assignment.end(), n) != out.assignment.end())
    throw std::logic_error("center_outward_ranks: plan is not a permutation");
  return out;
}

double grid_angle(const CenterOutwardGrid& grid, std::size_t g) {
  if (grid.dim != 2) throw std::invalid_argument("grid_angle: only defined in d = 2");
  const auto u = grid.directions[g];
  double t = std::atan2(u[1], u[0]);
  if (t < 0.0) t += 2.0 * std::numbers::pi;
  return t;
}

PointCloud quantile_contour(const RankAssignment& ranks, std::size_t ring_index) {
  const auto& grid = ranks.grid;
  if (ring_index < 1 || ring_index > grid.n_r) {
    throw std::invalid_argument("quantile_contour: ring " + std::to_string(ring_index) + " outside 1.." +
                                std::to_string(grid.n_r));
  }
  std::vector<std::size_t> owner(grid.size());
  for (std::size_t i = 0; i < ranks.assignment.size(); ++i) owner[ranks.assignment[i]] = i;

  std::vector<std::size_t> members;
  for (std::size_t g = 0; g < grid.size(); ++g)
    if (grid.ring[g] == ring_index) members.push_back(g);
  if (grid.dim == 2) {
    std::stable_sort(members.begin(), members.end(),
                     [&](std::size_t a, std::size_t b) { return grid_angle(grid, a) < grid_angle(grid, b); });
  }
  PointCloud out(grid.dim);
  for (auto g : members) out.push_back(ranks.sample[owner[g]]);
  return out;
}

}  // namespace mtl
