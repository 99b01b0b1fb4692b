#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "mtl/monotone.hpp"
#include "mtl/ranks.hpp"
#include "support.hpp"

using namespace mtl;
using mtl::testing::gaussian_cloud;
using mtl::testing::same_point_set;

namespace {

PointCloud transform(const PointCloud& c, const Eigen::Matrix2d& a) {
  PointCloud out(2);
  for (std::size_t i = 0; i < c.size(); ++i) {
    const Eigen::Vector2d v = a * Eigen::Vector2d(c[i][0], c[i][1]);
    out.push_back(Vector{v(0), v(1)});
  }
  return out;
}

}  // namespace

TEST(Grid, TwoRingsFourDirections) {
  const auto g = center_outward_grid(2, 4, 0, 2, 0);
  ASSERT_EQ(g.size(), 8u);
  const double pi = std::numbers::pi;
  PointCloud expected(2);
  for (int s = 0; s < 4; ++s) expected.push_back(Vector{std::cos(s * pi / 2) / 3, std::sin(s * pi / 2) / 3});
  for (int s = 0; s < 4; ++s) expected.push_back(Vector{2 * std::cos(s * pi / 2 + pi / 4) / 3, 2 * std::sin(s * pi / 2 + pi / 4) / 3});
  EXPECT_TRUE(same_point_set(g.points, expected, 1e-15));
  for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(g.ring[i], 1u);
  for (std::size_t i = 4; i < 8; ++i) EXPECT_EQ(g.ring[i], 2u);
}

TEST(Grid, InsideUnitBallWithCountAndOrigin) {
  for (std::size_t d : {2u, 3u, 4u}) {
    const auto g = center_outward_grid(5, 7, 3, d, 42);
    ASSERT_EQ(g.size(), 5u * 7u + 3u);
    for (std::size_t i = 0; i < g.size(); ++i) {
      EXPECT_LT(norm(g.points[i]), 1.0);
      if (g.ring[i] > 0) EXPECT_NEAR(norm(g.points[i]), g.radius(g.ring[i]), 1e-15);
      else EXPECT_LE(norm(g.points[i]), 1e-8);
    }
    EXPECT_NO_THROW(DiscreteMeasure::uniform(g.points));
  }
}

TEST(Grid, MeanNearOrigin) {
  const auto g2 = center_outward_grid(8, 32, 0, 2, 1);
  Vector mean(2, 0.0);
  for (std::size_t i = 0; i < g2.size(); ++i)
    for (int c = 0; c < 2; ++c) mean[c] += g2.points[i][c] / g2.size();
  EXPECT_LE(norm(mean), 1e-14);

  const auto g3 = center_outward_grid(8, 64, 0, 3, 1);
  Vector mean3(3, 0.0);
  for (std::size_t i = 0; i < g3.size(); ++i)
    for (int c = 0; c < 3; ++c) mean3[c] += g3.points[i][c] / g3.size();
  // Directions are shared across rings, so the relevant count is n_s.
  EXPECT_LE(norm(mean3), 3.0 / std::sqrt(64.0));
}

TEST(Grid, DeterministicPerSeed) {
  const auto a = center_outward_grid(3, 10, 1, 3, 7), b = center_outward_grid(3, 10, 1, 3, 7);
  const auto c = center_outward_grid(3, 10, 1, 3, 8);
  EXPECT_EQ(a.points.data(), b.points.data());
  EXPECT_NE(a.points.data(), c.points.data());
}

TEST(Grid, RejectsBadArguments) {
  EXPECT_THROW(center_outward_grid(2, 4, 0, 1, 0), std::invalid_argument);
  EXPECT_THROW(center_outward_grid(0, 4, 0, 2, 0), std::invalid_argument);
  EXPECT_THROW(center_outward_grid(2, 0, 0, 2, 0), std::invalid_argument);
}

TEST(Ranks, GridAgainstItselfIsIdentity) {
  const auto g = center_outward_grid(4, 9, 2, 2, 0);
  const auto r = center_outward_ranks(g.points, g);
  for (std::size_t i = 0; i < g.size(); ++i) EXPECT_EQ(r.assignment[i], i);
  EXPECT_NEAR(r.cost(), 0.0, 1e-15);
  for (std::size_t k = 1; k <= 4; ++k) {
    const auto contour = quantile_contour(r, k);
    PointCloud ring(2);
    for (std::size_t i = 0; i < g.size(); ++i)
      if (g.ring[i] == k) ring.push_back(g.points[i]);
    EXPECT_TRUE(same_point_set(contour, ring, 0.0));
  }
}

TEST(Ranks, EightPointSamplesMatchBruteForce) {
  Philox rng(50);
  const auto g = center_outward_grid(2, 4, 0, 2, 0);
  for (int t = 0; t < 20; ++t) {
    const auto sample = gaussian_cloud(rng, 8, 2);
    const auto r = center_outward_ranks(sample, g);
    std::vector<char> hit(8, 0);
    for (auto j : r.assignment) hit[j] = 1;
    EXPECT_EQ(std::count(hit.begin(), hit.end(), 1), 8);
    const auto brute = brute_force_ot(DiscreteMeasure::uniform(sample), DiscreteMeasure::uniform(g.points));
    EXPECT_NEAR(r.cost(), brute.cost(), 1e-9 * std::max(1.0, brute.cost()));
    EXPECT_TRUE(is_cyclically_monotone(coupling_support(r.coupling)).holds);
  }
}

TEST(Ranks, GridSymmetryPreservesCost) {
  // Rotation by pi/2 maps the (3, 8, 0) grid onto itself.
  Philox rng(51);
  const auto g = center_outward_grid(3, 8, 0, 2, 0);
  Eigen::Matrix2d u;
  u << 0.0, -1.0, 1.0, 0.0;
  for (int t = 0; t < 5; ++t) {
    const auto sample = gaussian_cloud(rng, g.size(), 2);
    const auto a = center_outward_ranks(sample, g);
    const auto b = center_outward_ranks(transform(sample, u), g);
    EXPECT_NEAR(a.cost(), b.cost(), 1e-12);
    EXPECT_TRUE(is_cyclically_monotone(coupling_support(b.coupling)).holds);
  }
}

TEST(Ranks, AffineGridSampleGivesTransformedRings) {
  const auto g = center_outward_grid(4, 12, 0, 2, 0);
  Eigen::Matrix2d a;
  a << 2.0, 0.3, 0.3, 0.7;
  const auto sample = transform(g.points, a);
  const auto r = center_outward_ranks(sample, g);
  const Eigen::Matrix2d inv = a.inverse();
  double previous_max = 0.0;
  for (std::size_t k = 1; k <= g.n_r; ++k) {
    const auto contour = quantile_contour(r, k);
    ASSERT_EQ(contour.size(), g.n_s);
    PointCloud ring(2);
    for (std::size_t i = 0; i < g.size(); ++i)
      if (g.ring[i] == k) ring.push_back(g.points[i]);
    EXPECT_TRUE(same_point_set(contour, transform(ring, a), 1e-12));
    // Nested: pulled back through A, ring k lies strictly inside ring k+1.
    const auto back = transform(contour, inv);
    double lo = 1e300, hi = 0.0;
    for (std::size_t i = 0; i < back.size(); ++i) {
      lo = std::min(lo, norm(back[i]));
      hi = std::max(hi, norm(back[i]));
    }
    EXPECT_GT(lo, previous_max);
    previous_max = hi;
  }
}

TEST(Ranks, ContourIsAngleOrderedWithFixedSize) {
  Philox rng(52);
  const auto g = center_outward_grid(3, 10, 1, 2, 0);
  const auto r = center_outward_ranks(gaussian_cloud(rng, g.size(), 2), g);
  for (std::size_t k = 1; k <= 3; ++k) EXPECT_EQ(quantile_contour(r, k).size(), 10u);
  double last = -1.0;
  for (std::size_t gi = 0; gi < g.size(); ++gi)
    if (g.ring[gi] == 2) {
      EXPECT_GT(grid_angle(g, gi), last);
      last = grid_angle(g, gi);
    }
}

TEST(Ranks, Errors) {
  Philox rng(53);
  const auto g = center_outward_grid(2, 4, 0, 2, 0);
  EXPECT_THROW(center_outward_ranks(gaussian_cloud(rng, 7, 2), g), std::invalid_argument);
  const auto r = center_outward_ranks(gaussian_cloud(rng, 8, 2), g);
  EXPECT_THROW(quantile_contour(r, 0), std::invalid_argument);
  EXPECT_THROW(quantile_contour(r, 3), std::invalid_argument);
}
