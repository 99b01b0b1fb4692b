#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <numbers>

#include "mtl/convergence.hpp"
#include "support.hpp"

using namespace mtl;
using mtl::testing::random_cloud;

namespace {

// Pairs (x, T(x)) on the lattice of a box; their Rockafellar extension.
MaxAffinePotential extension_on(const SetDescriptor& box, int resolution, const MapOracle& t) {
  const PointCloud xs = grid_points(box, resolution);
  PairSet s;
  for (std::size_t i = 0; i < xs.size(); ++i) s.add(xs[i], t(xs[i]));
  return rockafellar_potential(s);
}

MapOracle diag_map(double a, double b) {
  LinearMap m{Eigen::MatrixXd::Zero(2, 2), Eigen::VectorXd::Zero(2)};
  m.matrix(0, 0) = a;
  m.matrix(1, 1) = b;
  return MapOracle::linear(m);
}

ExperimentConfig gaussian_config() {
  ExperimentConfig c;
  c.dim = 2;
  Eigen::MatrixXd s2 = Eigen::MatrixXd::Identity(2, 2);
  s2(0, 0) = 4.0;
  c.source = Family::gaussian({0.0, 0.0}, Eigen::MatrixXd::Identity(2, 2));
  c.target = Family::gaussian({0.0, 0.0}, s2);
  c.sample_sizes = {16, 64};
  c.replications = 3;
  c.seed = 11;
  c.k = SetDescriptor::box({-1.0, -1.0}, {1.0, 1.0});
  c.delta = 0.1;
  c.resolution = 4;
  return c;
}

ExperimentConfig interval_config() {
  ExperimentConfig c;
  c.dim = 1;
  c.source = Family::uniform_box({0.0}, {1.0});
  c.target = Family::uniform_box({0.0}, {2.0});
  c.sample_sizes = {16, 1024};
  c.replications = 5;
  c.seed = 3;
  c.k = SetDescriptor::box({0.25}, {0.75});
  c.resolution = 8;
  return c;
}

void expect_same_row(const ExperimentRow& a, const ExperimentRow& b) {
  EXPECT_EQ(a.n, b.n);
  EXPECT_EQ(a.rep, b.rep);
  EXPECT_EQ(a.transport_cost, b.transport_cost);
  EXPECT_EQ(a.sup_error_K, b.sup_error_K);
  EXPECT_EQ(a.hausdorff_K, b.hausdorff_K);
  EXPECT_EQ(a.hausdorff_K_delta, b.hausdorff_K_delta);
  EXPECT_EQ(a.global_sup_E, b.global_sup_E);
  EXPECT_EQ(a.range_contained, b.range_contained);
  EXPECT_EQ(a.fell_checks, b.fell_checks);
  EXPECT_EQ(a.monotone_certified, b.monotone_certified);
}

}  // namespace

TEST(Oracle, IdentityAndLinear) {
  const Vector x{0.5, -2.0};
  EXPECT_EQ(MapOracle::identity()(x), x);
  const Vector y = diag_map(2.0, 1.0)(x);
  EXPECT_DOUBLE_EQ(y[0], 1.0);
  EXPECT_DOUBLE_EQ(y[1], -2.0);
  EXPECT_THROW(diag_map(2.0, 1.0)(Vector{1.0}), std::invalid_argument);
}

TEST(Oracle, Sorted1DInterpolatesAndExtrapolates) {
  const auto t = MapOracle::sorted_1d({0.0, 1.0, 3.0}, {0.0, 2.0, 3.0});
  EXPECT_DOUBLE_EQ(t(Vector{0.5})[0], 1.0);
  EXPECT_DOUBLE_EQ(t(Vector{2.0})[0], 2.5);
  EXPECT_DOUBLE_EQ(t(Vector{-1.0})[0], -2.0);
  EXPECT_DOUBLE_EQ(t(Vector{5.0})[0], 4.0);
  EXPECT_THROW(MapOracle::sorted_1d({0.0, 0.0}, {0.0, 1.0}), std::invalid_argument);
  EXPECT_THROW(MapOracle::sorted_1d({0.0, 1.0}, {1.0, 0.0}), std::invalid_argument);
}

TEST(Oracle, TabulatedNearestSite) {
  const auto t = MapOracle::tabulated(PointCloud{{0.0}, {1.0}}, PointCloud{{10.0}, {20.0}});
  EXPECT_EQ(t(Vector{0.4})[0], 10.0);
  EXPECT_EQ(t(Vector{0.6})[0], 20.0);
}

TEST(Oracle, GaussianCenterOutwardInTwoDimensions) {
  // chi_2 distribution function is 1 - exp(-r^2/2).
  const auto t = MapOracle::gaussian_center_outward(2);
  Philox rng(1);
  for (int i = 0; i < 50; ++i) {
    const Vector x{3.0 * rng.normal(), 3.0 * rng.normal()};
    const double r = norm(x);
    const Vector y = t(x);
    EXPECT_NEAR(norm(y), 1.0 - std::exp(-0.5 * r * r), 1e-14);
    EXPECT_NEAR(dot(y, x), norm(y) * r, 1e-12);
  }
  EXPECT_EQ(t(Vector{0.0, 0.0}), (Vector{0.0, 0.0}));
}

TEST(Oracle, GaussianCenterOutwardIsCyclicallyMonotone) {
  Philox rng(2);
  const auto t = MapOracle::gaussian_center_outward(3);
  PairSet s;
  for (int i = 0; i < 60; ++i) {
    const Vector x{rng.normal(), rng.normal(), rng.normal()};
    s.add(x, t(x));
  }
  EXPECT_TRUE(is_cyclically_monotone(s).holds);
}

TEST(Fell, IdentityPairsMissAndHit) {
  const auto t = MapOracle::identity();
  const auto psi = extension_on(SetDescriptor::box({-1.0}, {1.0}), 8, t);
  EXPECT_TRUE(fell_check(psi,
                         SetDescriptor::product(SetDescriptor::finite(PointCloud{{0.0}}), SetDescriptor::ball({1.0}, 0.1)),
                         FellMode::Miss));
  EXPECT_TRUE(fell_check(psi, SetDescriptor::product(SetDescriptor::ball({0.0}, 0.1), SetDescriptor::ball({0.0}, 0.2)),
                         FellMode::Hit));
  // The graph passes through (0, 0), so a miss probe around it fails.
  EXPECT_FALSE(fell_check(psi, SetDescriptor::product(SetDescriptor::ball({0.0}, 0.1), SetDescriptor::ball({0.0}, 0.2)),
                          FellMode::Miss));
  EXPECT_FALSE(fell_check(psi,
                          SetDescriptor::product(SetDescriptor::finite(PointCloud{{0.0}}), SetDescriptor::ball({1.0}, 0.1)),
                          FellMode::Hit));
}

TEST(Fell, ConvexHullOfSubdifferentialCounts) {
  // At the kink 0 of |x|, d psi(0) = [-1, 1] meets a small ball around 0.
  const MaxAffinePotential psi(PointCloud{{-1.0}, {1.0}}, {0.0, 0.0}, 0);
  const auto probe = SetDescriptor::product(SetDescriptor::finite(PointCloud{{0.0}}), SetDescriptor::ball({0.0}, 0.1));
  EXPECT_TRUE(fell_check(psi, probe, FellMode::Hit));
}

TEST(Fell, RejectsBadProbes) {
  const auto psi = extension_on(SetDescriptor::box({-1.0}, {1.0}), 4, MapOracle::identity());
  EXPECT_THROW(fell_check(psi, SetDescriptor::ball({0.0}, 1.0), FellMode::Hit), std::invalid_argument);
  const auto unbounded = SetDescriptor::product(SetDescriptor::ball({0.0}, 1.0), SetDescriptor::ray({0.0}, {1.0}));
  EXPECT_THROW(fell_check(psi, unbounded, FellMode::Miss), std::invalid_argument);
  EXPECT_NO_THROW(fell_check(psi, unbounded, FellMode::Hit));
}

TEST(LocalSup, DataSitesWithinOneCell) {
  const auto k = SetDescriptor::box({-1.0, -1.0}, {1.0, 1.0});
  const auto t = diag_map(2.0, 1.0);
  // Data on a lattice of spacing h = 0.25 containing K's lattice (spacing 0.5).
  const double h = 0.25;
  const auto psi = extension_on(SetDescriptor::box({-2.0, -2.0}, {2.0, 2.0}), 16, t);
  const PointCloud sites = grid_points(k, 4);
  for (std::size_t i = 0; i < sites.size(); ++i) {
    const auto v = eval_subdifferential(psi, sites[i]).vertices;
    EXPECT_LE(ConvexRegion(v).violation(t(sites[i])), 1e-12);
  }
  // Tight longest-path edges make data sites kinks: d psi(x_i) also holds the
  // slope of the predecessor, one lattice step away.
  const double step = norm(t(Vector{h, h}));
  EXPECT_LE(local_uniform_sup(psi, t, k, 4), step + 1e-12);
  EXPECT_LE(local_uniform_sup(psi, t, k, 7), 2.0 * step + 1e-12);
  EXPECT_THROW(local_uniform_sup(psi, t, SetDescriptor::whole_space(2), 4), std::invalid_argument);
}

TEST(LocalSup, IdentityPairsWithinOneStep) {
  const auto k = SetDescriptor::box({-1.0, -1.0}, {1.0, 1.0});
  const auto psi = extension_on(k, 8, MapOracle::identity());
  EXPECT_LE(local_uniform_sup(psi, MapOracle::identity(), k, 8), 0.25 * std::sqrt(2.0) + 1e-12);
}

TEST(LocalSup, MonotoneInNestedLattices) {
  Philox rng(4);
  PairSet s;
  const auto xs = random_cloud(rng, 40, 2, -1.5, 1.5);
  const auto t = diag_map(2.0, 1.0);
  for (std::size_t i = 0; i < xs.size(); ++i) {
    Vector y = t(xs[i]);
    y[0] += 0.1 * rng.normal();
    s.add(xs[i], y);
  }
  const auto pi = solve_discrete_ot(DiscreteMeasure::uniform(s.xs()), DiscreteMeasure::uniform(s.ys()));
  const auto psi = rockafellar_potential(coupling_support(pi));
  // Spacing 0.25 in both lattices, so the small one is a sublattice.
  const double small = local_uniform_sup(psi, t, SetDescriptor::box({-0.5, -0.5}, {0.5, 0.5}), 4);
  const double large = local_uniform_sup(psi, t, SetDescriptor::box({-1.0, -1.0}, {1.0, 1.0}), 8);
  EXPECT_LE(small, large);
}

TEST(ImageHausdorff, SinglePointIsZero) {
  PairSet s;
  s.add(Vector{0.3, 0.4}, Vector{1.0, -1.0});
  const auto psi = rockafellar_potential(s);
  const auto t = MapOracle::tabulated(PointCloud{{0.3, 0.4}}, PointCloud{{1.0, -1.0}});
  EXPECT_EQ(image_hausdorff(psi, t, SetDescriptor::finite(PointCloud{{0.3, 0.4}}), 0.0, 4), 0.0);
}

TEST(ImageHausdorff, IdentityBoundedByDeltaPlusSpacing) {
  const auto k = SetDescriptor::box({-1.0, -1.0}, {1.0, 1.0});
  const auto psi = extension_on(SetDescriptor::box({-2.0, -2.0}, {2.0, 2.0}), 32, MapOracle::identity());
  for (double delta : {0.0, 0.1, 0.3}) {
    const double h = image_hausdorff(psi, MapOracle::identity(), k, delta, 8);
    EXPECT_LE(h, delta + 0.25 + 1e-12) << delta;
    if (delta > 0.0) EXPECT_GT(h, 0.0);
  }
}

TEST(ImageHausdorff, LinearExtensionWithinOneCell) {
  const auto k = SetDescriptor::box({-1.0, -1.0}, {1.0, 1.0});
  const auto t = diag_map(2.0, 1.0);
  const auto psi = extension_on(SetDescriptor::box({-2.0, -2.0}, {2.0, 2.0}), 12, t);
  // Data spacing 1/3: one diagonal step of the map.
  EXPECT_LE(image_hausdorff(psi, t, k, 0.0, 8), norm(t(Vector{1.0 / 3.0, 1.0 / 3.0})) + 1e-12);
}

TEST(ImageHausdorff, BoundedBySupError) {
  Philox rng(5);
  const auto t = diag_map(2.0, 1.0);
  const auto k = SetDescriptor::box({-1.0, -1.0}, {1.0, 1.0});
  for (int trial = 0; trial < 10; ++trial) {
    const auto xs = random_cloud(rng, 50, 2, -2.0, 2.0);
    PointCloud ys(2);
    for (std::size_t i = 0; i < xs.size(); ++i) {
      Vector y = t(xs[i]);
      for (auto& v : y) v += 0.2 * rng.normal();
      ys.push_back(y);
    }
    const auto pi = solve_discrete_ot(DiscreteMeasure::uniform(xs), DiscreteMeasure::uniform(ys));
    const auto psi = rockafellar_potential(coupling_support(pi));
    EXPECT_LE(image_hausdorff(psi, t, k, 0.0, 8), local_uniform_sup(psi, t, k, 8) + 1e-12);
  }
}

TEST(Receding, BoundedEqualsLocalSup) {
  Philox rng(6);
  const auto xs = random_cloud(rng, 30, 2);
  const auto ys = random_cloud(rng, 30, 2);
  const auto psi = rockafellar_potential(coupling_support(
      solve_discrete_ot(DiscreteMeasure::uniform(xs), DiscreteMeasure::uniform(ys))));
  const auto e = SetDescriptor::ball({0.0, 0.0}, 0.8);
  const auto t = MapOracle::identity();
  EXPECT_EQ(global_sup_on_receding_set(psi, t, e, PointCloud(2), 10.0, 8), local_uniform_sup(psi, t, e, 8));
}

TEST(Receding, SquareRangeAlongAxisViolatesHypothesis) {
  const PointCloud square{{-1.0, -1.0}, {1.0, -1.0}, {1.0, 1.0}, {-1.0, 1.0}};
  const auto psi = rockafellar_potential(PairSet(square, square));
  try {
    global_sup_on_receding_set(psi, MapOracle::identity(), SetDescriptor::ray({0.0, 0.0}, {1.0, 0.0}), square, 5.0, 4);
    FAIL() << "expected HypothesisViolated";
  } catch (const HypothesisViolated& e) {
    EXPECT_NE(std::string(e.what()).find("hypothesis violated"), std::string::npos);
    EXPECT_NEAR(e.direction()[0], 1.0, 1e-15);
  }
  // A diagonal ray exposes a vertex of the square and passes.
  EXPECT_NO_THROW(global_sup_on_receding_set(psi, MapOracle::identity(), SetDescriptor::ray({0.0, 0.0}, {1.0, 1.0}),
                                             square, 5.0, 4));
}

TEST(Receding, DiscRangeOverWholePlane) {
  Philox rng(7);
  const auto t = MapOracle::gaussian_center_outward(2);
  const auto range = *default_range(Family::spherical_uniform_grid(2));
  PointCloud xs(2), ys(2);
  for (int i = 0; i < 200; ++i) {
    const Vector x{rng.normal(), rng.normal()};
    xs.push_back(x);
    ys.push_back(t(x));
  }
  const auto psi = rockafellar_potential(PairSet(xs, ys));
  const double g = global_sup_on_receding_set(psi, t, SetDescriptor::whole_space(2), range, 10.0, 10);
  EXPECT_TRUE(std::isfinite(g));
  EXPECT_LT(g, 1.0);
  EXPECT_TRUE(range_containment_check(psi, range));
  // An unknown range on an unbounded E cannot pass the hypothesis.
  EXPECT_THROW(global_sup_on_receding_set(psi, t, SetDescriptor::whole_space(2), PointCloud(2), 10.0, 10),
               HypothesisViolated);
}

TEST(Range, Containment) {
  const PointCloud c{{1.0, 0.0}, {0.0, 1.0}, {-1.0, 0.0}, {0.0, -1.0}};
  EXPECT_TRUE(range_containment_check(MaxAffinePotential(c, {0, 0, 0, 0}, 0), c));
  EXPECT_TRUE(range_containment_check(MaxAffinePotential(PointCloud{{0.0, 0.0}}, {0.0}, 0), c));
  EXPECT_FALSE(range_containment_check(MaxAffinePotential(PointCloud{{1.1, 0.0}}, {0.0}, 0), c));
  EXPECT_THROW(range_containment_check(MaxAffinePotential(c, {0, 0, 0, 0}, 0), PointCloud(2)), std::invalid_argument);
}

TEST(Stats, SpearmanAndMedian) {
  EXPECT_DOUBLE_EQ(spearman({1, 2, 3, 4}, {4, 3, 2, 1}), -1.0);
  EXPECT_DOUBLE_EQ(spearman({1, 2, 3, 4}, {1, 5, 7, 100}), 1.0);
  // Ties: ranks (1, 2.5, 2.5, 4) against (1, 2, 3, 4).
  EXPECT_NEAR(spearman({1, 2, 3, 4}, {1, 2, 2, 3}), 0.9486832980505138, 1e-15);
  EXPECT_DOUBLE_EQ(median({3.0, 1.0, 2.0}), 2.0);
  EXPECT_DOUBLE_EQ(median({4.0, 1.0, 2.0, 3.0}), 2.5);
  EXPECT_TRUE(std::isnan(median({})));
}

TEST(Families, SamplesStayInSupport) {
  Philox rng(8);
  const auto box = sample_family(Family::uniform_box({0.0, 1.0}, {1.0, 3.0}), 200, rng, 0);
  for (std::size_t i = 0; i < box.size(); ++i) {
    EXPECT_TRUE(box[i][0] >= 0.0 && box[i][0] < 1.0);
    EXPECT_TRUE(box[i][1] >= 1.0 && box[i][1] < 3.0);
  }
  const auto ball = sample_family(Family::uniform_ball({1.0, 1.0, 1.0}, 2.0), 200, rng, 0);
  for (std::size_t i = 0; i < ball.size(); ++i) EXPECT_LE(distance(ball[i], Vector{1.0, 1.0, 1.0}), 2.0);
  const auto grid = sample_family(Family::spherical_uniform_grid(2), 70, rng, 0);
  EXPECT_EQ(grid.size(), 70u);
}

TEST(Families, GaussianMoments) {
  Philox rng(9);
  Eigen::MatrixXd cov(2, 2);
  cov << 4.0, 1.0, 1.0, 2.0;
  const auto s = sample_family(Family::gaussian({1.0, -1.0}, cov), 20000, rng, 0);
  Eigen::Vector2d mean = Eigen::Vector2d::Zero();
  for (std::size_t i = 0; i < s.size(); ++i) mean += Eigen::Vector2d(s[i][0], s[i][1]) / s.size();
  Eigen::Matrix2d c = Eigen::Matrix2d::Zero();
  for (std::size_t i = 0; i < s.size(); ++i) {
    const Eigen::Vector2d v = Eigen::Vector2d(s[i][0], s[i][1]) - mean;
    c += v * v.transpose() / s.size();
  }
  EXPECT_NEAR(mean(0), 1.0, 0.05);
  EXPECT_NEAR(mean(1), -1.0, 0.05);
  EXPECT_NEAR(c(0, 0), 4.0, 0.15);
  EXPECT_NEAR(c(0, 1), 1.0, 0.1);
  EXPECT_NEAR(c(1, 1), 2.0, 0.1);
}

TEST(Families, GridLayout) {
  const auto g = grid_layout(1024);
  EXPECT_EQ(g.n_r, 16u);
  EXPECT_EQ(g.n_s, 64u);
  EXPECT_EQ(g.n_0, 0u);
  const auto h = grid_layout(70);
  EXPECT_EQ(h.n_r, 4u);
  EXPECT_EQ(h.n_s, 17u);
  EXPECT_EQ(h.n_0, 2u);
  EXPECT_EQ(grid_layout(3).n_r, 1u);
}

TEST(Families, OracleSelection) {
  const auto c = gaussian_config();
  EXPECT_EQ(select_oracle(c.source, c.target).kind(), "linear");
  const Vector y = select_oracle(c.source, c.target)(Vector{1.0, 1.0});
  EXPECT_NEAR(y[0], 2.0, 1e-12);
  EXPECT_NEAR(y[1], 1.0, 1e-12);
  EXPECT_EQ(select_oracle(c.source, c.source).kind(), "identity");
  const auto i = interval_config();
  const auto t = select_oracle(i.source, i.target);
  EXPECT_EQ(t.kind(), "sorted_1d");
  EXPECT_DOUBLE_EQ(t(Vector{0.3})[0], 0.6);
  EXPECT_EQ(select_oracle(c.source, Family::spherical_uniform_grid(2)).kind(), "gaussian_center_outward");
  EXPECT_THROW(select_oracle(c.target, Family::spherical_uniform_grid(2)), std::invalid_argument);
  EXPECT_THROW(select_oracle(Family::uniform_box({0.0}, {1.0}), c.source), std::invalid_argument);
}

TEST(Families, DefaultRangeCoversTarget) {
  const auto disc = *default_range(Family::uniform_ball({0.0, 0.0}, 2.0));
  const ConvexRegion region(disc);
  for (double t = 0.0; t < 6.3; t += 0.01) EXPECT_LE(region.violation(Vector{2.0 * std::cos(t), 2.0 * std::sin(t)}), 1e-14);
  EXPECT_EQ(default_range(Family::uniform_box({0.0, 0.0, 0.0}, {1.0, 1.0, 1.0}))->size(), 8u);
  EXPECT_FALSE(default_range(gaussian_config().source).has_value());
}

TEST(Config, Validation) {
  auto c = gaussian_config();
  EXPECT_NO_THROW(c.validate());
  c.sample_sizes = {64, 64};
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = gaussian_config();
  c.replications = 0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = gaussian_config();
  c.resolution = 0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = gaussian_config();
  c.delta = -0.1;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = gaussian_config();
  c.k = SetDescriptor::whole_space(2);
  EXPECT_THROW(c.validate(), std::invalid_argument);
  // K must sit one lattice cell inside a bounded source support.
  auto i = interval_config();
  EXPECT_NO_THROW(i.validate());
  i.k = SetDescriptor::box({0.0}, {0.75});
  EXPECT_THROW(i.validate(), std::invalid_argument);
  i.k = SetDescriptor::box({0.05}, {0.95});
  EXPECT_THROW(i.validate(), std::invalid_argument);
}

TEST(Experiment, EveryRowCertified) {
  const auto r = run_consistency_experiment(gaussian_config());
  EXPECT_TRUE(r.failures.empty());
  ASSERT_EQ(r.rows.size(), 6u);
  for (const auto& row : r.rows) {
    EXPECT_TRUE(row.monotone_certified);
    EXPECT_GT(row.sup_error_K, 0.0);
    EXPECT_FALSE(row.wall_time.has_value());
    EXPECT_EQ(row.fell_checks.size(), 2u);
  }
  EXPECT_EQ(r.oracle, "linear");
}

TEST(Experiment, IdentityFamilyStillCertified) {
  auto c = gaussian_config();
  c.target = c.source;
  const auto r = run_consistency_experiment(c);
  EXPECT_EQ(r.oracle, "identity");
  for (const auto& row : r.rows) EXPECT_TRUE(row.monotone_certified);
}

TEST(Experiment, DeterministicAndReplayable) {
  const auto c = gaussian_config();
  const auto a = run_consistency_experiment(c), b = run_consistency_experiment(c);
  ASSERT_EQ(a.rows.size(), b.rows.size());
  for (std::size_t i = 0; i < a.rows.size(); ++i) expect_same_row(a.rows[i], b.rows[i]);
  for (const auto& row : a.rows) expect_same_row(row, run_replication(c, row.n, row.rep));
}

TEST(Experiment, ThreadCountDoesNotChangeRows) {
  auto c = gaussian_config();
  c.threads = 1;
  const auto a = run_consistency_experiment(c);
  c.threads = 3;
  const auto b = run_consistency_experiment(c);
  ASSERT_EQ(a.rows.size(), b.rows.size());
  for (std::size_t i = 0; i < a.rows.size(); ++i) expect_same_row(a.rows[i], b.rows[i]);
}

TEST(Experiment, AggregatesRecomputable) {
  auto r = run_consistency_experiment(gaussian_config());
  const auto medians = r.medians;
  const double rho = r.spearman_sup_error_K;
  r.medians.clear();
  r.spearman_sup_error_K = 0.0;
  aggregate(r);
  ASSERT_EQ(r.medians.size(), medians.size());
  for (std::size_t i = 0; i < medians.size(); ++i) {
    EXPECT_EQ(r.medians[i].sup_error_K, medians[i].sup_error_K);
    EXPECT_EQ(r.medians[i].hausdorff_K_delta, medians[i].hausdorff_K_delta);
    std::vector<double> v;
    for (const auto& row : r.rows)
      if (row.n == medians[i].n) v.push_back(row.sup_error_K);
    EXPECT_EQ(median(v), medians[i].sup_error_K);
  }
  EXPECT_EQ(r.spearman_sup_error_K, rho);
}

TEST(Experiment, IntervalDoublingDecays) {
  const auto r = run_consistency_experiment(interval_config());
  ASSERT_EQ(r.medians.size(), 2u);
  EXPECT_LT(r.medians[1].sup_error_K, r.medians[0].sup_error_K);
  EXPECT_DOUBLE_EQ(r.spearman_sup_error_K, -1.0);
  for (const auto& row : r.rows) ASSERT_TRUE(row.range_contained.value_or(false));
}

TEST(Experiment, TimingOnlyWhenRequested) {
  auto c = gaussian_config();
  c.sample_sizes = {16};
  c.replications = 1;
  c.record_timing = true;
  const auto r = run_consistency_experiment(c);
  ASSERT_TRUE(r.rows[0].wall_time.has_value());
  EXPECT_GE(*r.rows[0].wall_time, 0.0);
}

TEST(Experiment, UnboundedEWithUnknownRangeIsRejected) {
  auto c = gaussian_config();
  c.e = SetDescriptor::whole_space(2);
  EXPECT_THROW(run_consistency_experiment(c), HypothesisViolated);
}

TEST(Experiment, UserProbesAppended) {
  auto c = gaussian_config();
  c.sample_sizes = {32};
  c.replications = 1;
  c.probes.push_back({FellMode::Miss, SetDescriptor::product(SetDescriptor::box({-1.0, -1.0}, {1.0, 1.0}),
                                                              SetDescriptor::ball({100.0, 0.0}, 1.0))});
  const auto r = run_consistency_experiment(c);
  ASSERT_EQ(r.rows[0].fell_checks.size(), 3u);
  EXPECT_TRUE(r.rows[0].fell_checks[2]);
}
