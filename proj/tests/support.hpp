#pragma once

#include <cstdint>

#include "mtl/geometry.hpp"
#include "mtl/random.hpp"

namespace mtl::testing {

inline PointCloud random_cloud(Philox& rng, std::size_t n, std::size_t d, double lo = -1.0, double hi = 1.0) {
  PointCloud c(d);
  Vector p(d);
  for (std::size_t i = 0; i < n; ++i) {
    for (auto& v : p) v = lo + (hi - lo) * rng.uniform();
    c.push_back(p);
  }
  return c;
}

inline PointCloud gaussian_cloud(Philox& rng, std::size_t n, std::size_t d) {
  PointCloud c(d);
  Vector p(d);
  for (std::size_t i = 0; i < n; ++i) {
    for (auto& v : p) v = rng.normal();
    c.push_back(p);
  }
  return c;
}

// Same points up to order, coordinates within tol.
inline bool same_point_set(const PointCloud& a, const PointCloud& b, double tol) {
  if (a.size() != b.size()) return false;
  auto covered = [tol](const PointCloud& x, const PointCloud& y) {
    for (std::size_t i = 0; i < x.size(); ++i) {
      bool hit = false;
      for (std::size_t j = 0; j < y.size() && !hit; ++j) hit = distance(x[i], y[j]) <= tol;
      if (!hit) return false;
    }
    return true;
  };
  return covered(a, b) && covered(b, a);
}

}  // namespace mtl::testing
