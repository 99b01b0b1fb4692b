#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "mtl/geometry.hpp"
#include "mtl/transport.hpp"

namespace mtl {

/// Discrete spherical-uniform reference on the unit ball.
///
/// Points are stored ring by ring: ring k (1-based) holds indices
/// (k-1)*n_s .. k*n_s-1 at radius k/(n_r+1); the n_0 origin copies follow,
/// copy c placed at 1e-9*c*e_1 so the support stays distinct.
struct CenterOutwardGrid {
  std::size_t n_r = 0, n_s = 0, n_0 = 0, dim = 0;
  std::uint64_t seed = 0;
  PointCloud points;
  std::vector<std::size_t> ring;      // 0 for origin copies
  PointCloud directions;              // unit direction of each point (e_1 for origin copies)

  std::size_t size() const { return points.size(); }
  double radius(std::size_t k) const { return static_cast<double>(k) / static_cast<double>(n_r + 1); }
};

/// d = 2: equispaced angles 2*pi*s/n_s, ring k rotated by ((k-1) mod 2)*pi/n_s.
/// d >= 3: n_s seeded Gaussian directions shared by all rings.
CenterOutwardGrid center_outward_grid(std::size_t n_r, std::size_t n_s, std::size_t n_0, std::size_t dim,
                                      std::uint64_t seed);

struct RankAssignment {
  PointCloud sample;
  CenterOutwardGrid grid;
  std::vector<std::size_t> assignment;  // sample index -> grid index
  Coupling coupling;

  double cost() const { return coupling.cost(); }
};

/// Optimal matching of the uniform measure on `sample` to the uniform measure on the grid.
RankAssignment center_outward_ranks(const PointCloud& sample, const CenterOutwardGrid& grid);

/// Sample points matched to ring `ring_index` (1-based), in grid angle order for d = 2.
PointCloud quantile_contour(const RankAssignment& ranks, std::size_t ring_index);

/// Angle in [0, 2*pi) of grid point g (d = 2 only).
double grid_angle(const CenterOutwardGrid& grid, std::size_t g);

}  // namespace mtl
