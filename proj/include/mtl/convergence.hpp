#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "mtl/geometry.hpp"
#include "mtl/monotone.hpp"
#include "mtl/random.hpp"
#include "mtl/transport.hpp"

namespace mtl {

// ---------------------------------------------------------------------------
// Reference maps

struct IdentityOracle {};
struct LinearOracle {
  LinearMap map;
};
/// Monotone rearrangement in d = 1: piecewise-linear interpolation of matched
/// quantile knots, extended linearly beyond the first and last knot.
struct Sorted1DOracle {
  std::vector<double> source_knots, target_knots;
};
/// Nearest-site lookup in a table of (site, value) pairs.
struct TabulatedOracle {
  PointCloud sites, values;
};
/// Center-outward map of the standard Gaussian onto the spherical uniform
/// law on the unit ball: x -> F(|x|) x/|x| with F the chi_d distribution function.
struct GaussianCenterOutwardOracle {
  std::size_t dim = 2;
};

class MapOracle {
 public:
  using Variant = std::variant<IdentityOracle, LinearOracle, Sorted1DOracle, TabulatedOracle, GaussianCenterOutwardOracle>;

  MapOracle() = default;
  explicit MapOracle(Variant v) : v_(std::move(v)) {}

  static MapOracle identity() { return MapOracle(IdentityOracle{}); }
  static MapOracle linear(LinearMap m) { return MapOracle(LinearOracle{std::move(m)}); }
  static MapOracle sorted_1d(std::vector<double> source_knots, std::vector<double> target_knots);
  static MapOracle tabulated(PointCloud sites, PointCloud values);
  static MapOracle gaussian_center_outward(std::size_t dim) { return MapOracle(GaussianCenterOutwardOracle{dim}); }

  Vector operator()(std::span<const double> x) const;
  std::string kind() const;
  const Variant& variant() const { return v_; }

 private:
  Variant v_;
};

// ---------------------------------------------------------------------------
// Diagnostics

enum class FellMode { Miss, Hit };

/// Finite hit/miss probe of the graph of d psi against Product(X, Y): miss
/// holds when no lattice x of X has conv(d psi(x)) within tol of Y; hit holds
/// when some lattice x does. Miss probes need a bounded X.
bool fell_check(const MaxAffinePotential& psi, const SetDescriptor& probe, FellMode mode, double tol = 1e-9,
                int resolution = 8);

/// max over lattice x of K and vertices y of d psi(x) of |y - T(x)|.
double local_uniform_sup(const MaxAffinePotential& psi, const MapOracle& t, const SetDescriptor& k, int resolution,
                         double tol = 1e-9);

/// Hausdorff distance between the vertices of d psi over the lattice of
/// K + delta*ball and {T(x) : x in lattice of K}.
double image_hausdorff(const MaxAffinePotential& psi, const MapOracle& t, const SetDescriptor& k, double delta,
                       int resolution, double tol = 1e-9);

struct RecedingOptions {
  std::size_t probe_directions = 64;  // used when the horizon is the full sphere
  double convexity_tol = 1e-2;        // face-diameter tolerance on the range cloud
};

/// Thrown when a horizon direction of E is not a direction of strict
/// convexity of the range.
class HypothesisViolated : public DomainError {
 public:
  HypothesisViolated(const std::string& what, Vector direction) : DomainError(what), direction_(std::move(direction)) {}
  const Vector& direction() const { return direction_; }

 private:
  Vector direction_;
};

/// Sup error over the lattice of E truncated to radius r_max plus probes at
/// radii r_max, 2 r_max, 4 r_max along every horizon direction. `range` is a
/// vertex cloud of cl(rge T).
double global_sup_on_receding_set(const MaxAffinePotential& psi, const MapOracle& t, const SetDescriptor& e,
                                  const PointCloud& range, double r_max, int resolution, double tol = 1e-9,
                                  const RecedingOptions& options = {});

/// Every slope of psi lies within tol of conv(range).
bool range_containment_check(const MaxAffinePotential& psi, const PointCloud& range, double tol = 1e-9);

/// Spearman rank correlation with average ranks for ties.
double spearman(const std::vector<double>& a, const std::vector<double>& b);

double median(std::vector<double> v);

// ---------------------------------------------------------------------------
// Experiments

struct Family {
  enum class Kind { Gaussian, UniformBox, UniformBall, SphericalUniformGrid };
  Kind kind = Kind::Gaussian;
  Vector mean;           // gaussian
  Eigen::MatrixXd cov;   // gaussian
  Vector lo, hi;         // uniform_box
  Vector center;         // uniform_ball
  double radius = 1.0;   // uniform_ball

  static Family gaussian(Vector mean, Eigen::MatrixXd cov);
  static Family uniform_box(Vector lo, Vector hi);
  static Family uniform_ball(Vector center, double radius);
  static Family spherical_uniform_grid(std::size_t dim);

  std::size_t dim() const;
  std::string name() const;
  bool operator==(const Family& other) const;
};

/// Ring layout used for an n-point spherical-uniform grid: n_r = max(1,
/// floor(sqrt(n/4))), n_s = floor(n/n_r), n_0 = n - n_r n_s.
struct GridLayout {
  std::size_t n_r, n_s, n_0;
};
GridLayout grid_layout(std::size_t n);

/// Draws n points of the family from the stream.
PointCloud sample_family(const Family& f, std::size_t n, Philox& rng, std::uint64_t grid_seed);

/// Closed-form reference map for a source/target pair, when one is known.
MapOracle select_oracle(const Family& source, const Family& target);

/// Default range vertex cloud for a target family, if bounded: a 1024-gon
/// (d = 2) or sampled sphere directions for the unit ball, box corners for boxes.
std::optional<PointCloud> default_range(const Family& target);

struct FellProbe {
  FellMode mode = FellMode::Miss;
  SetDescriptor set;  // Product(X, Y)
};

struct ExperimentConfig {
  std::size_t dim = 2;
  Family source, target;
  std::vector<std::size_t> sample_sizes;
  std::size_t replications = 1;
  std::uint64_t seed = 0;
  SetDescriptor k;
  double delta = 0.0;
  int resolution = 8;
  std::optional<SetDescriptor> e;
  double r_max = 10.0;
  int e_resolution = 20;
  std::optional<PointCloud> range;     // cl(rge T); defaults from the target family
  std::optional<MapOracle> oracle;     // defaults to select_oracle
  std::vector<FellProbe> probes;
  RecedingOptions receding;
  double monotone_tol = 1e-9;
  double eval_tol = 1e-9;
  double range_tol = 1e-9;
  double fell_tol = 1e-9;
  std::size_t threads = 0;             // 0: MTL_THREADS or hardware concurrency
  bool record_timing = false;

  /// Throws std::invalid_argument on inconsistent settings.
  void validate() const;
};

struct ExperimentRow {
  std::size_t n = 0, rep = 0;
  double transport_cost = 0.0;
  double sup_error_K = 0.0;
  double hausdorff_K = 0.0;
  double hausdorff_K_delta = 0.0;
  std::optional<double> global_sup_E;
  std::optional<bool> range_contained;
  std::vector<bool> fell_checks;
  bool monotone_certified = false;
  std::optional<double> wall_time;
};

struct MedianRow {
  std::size_t n = 0;
  std::size_t rows = 0;
  double sup_error_K = 0.0, hausdorff_K = 0.0, hausdorff_K_delta = 0.0;
  std::optional<double> global_sup_E;
};

struct ExperimentReport {
  ExperimentConfig config;
  std::string oracle;
  std::vector<ExperimentRow> rows;       // ordered by (n, rep)
  std::vector<std::string> failures;     // aborted replications
  std::vector<MedianRow> medians;        // per sample size
  double spearman_sup_error_K = 0.0;     // over (log n, median)
  double spearman_hausdorff_K = 0.0;
  double spearman_hausdorff_K_delta = 0.0;
  std::optional<double> spearman_global_sup_E;
};

/// Runs one (n, rep) replication from its own random stream; rows of
/// run_consistency_experiment are reproduced exactly.
ExperimentRow run_replication(const ExperimentConfig& cfg, std::size_t n, std::size_t rep);

ExperimentReport run_consistency_experiment(const ExperimentConfig& cfg);

/// Recomputes medians and trend statistics from report.rows.
void aggregate(ExperimentReport& report);

}  // namespace mtl
