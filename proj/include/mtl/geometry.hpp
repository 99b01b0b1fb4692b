#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace mtl {

using Vector = std::vector<double>;

/// Raised when a computation is well-posed but its mathematical
/// precondition fails on the given data (non-monotone input, violated
/// convexity hypothesis, ...). Callers distinguish it from argument errors.
class DomainError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

double dot(std::span<const double> a, std::span<const double> b);
double norm(std::span<const double> a);
double squared_distance(std::span<const double> a, std::span<const double> b);
double distance(std::span<const double> a, std::span<const double> b);

/// Dense row-major storage for a list of points of equal dimension.
class PointCloud {
 public:
  PointCloud() = default;
  explicit PointCloud(std::size_t dim) : dim_(dim) {}
  PointCloud(std::size_t dim, std::vector<double> coords);
  PointCloud(std::initializer_list<Vector> points);

  static PointCloud from_rows(const std::vector<Vector>& rows);

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return dim_ == 0 ? 0 : coords_.size() / dim_; }
  bool empty() const { return coords_.empty(); }

  std::span<const double> operator[](std::size_t i) const {
    return {coords_.data() + i * dim_, dim_};
  }
  std::span<double> mutable_point(std::size_t i) {
    return {coords_.data() + i * dim_, dim_};
  }
  Vector point(std::size_t i) const;

  void push_back(std::span<const double> p);
  void append(const PointCloud& other);
  void reserve(std::size_t n) { coords_.reserve(n * dim_); }

  const std::vector<double>& data() const { return coords_; }
  std::vector<Vector> rows() const;

 private:
  std::size_t dim_ = 0;
  std::vector<double> coords_;
};

/// Unit vector; construction normalizes and rejects zero or non-finite input.
class Direction {
 public:
  explicit Direction(Vector u);
  /// Accepts only vectors already of unit norm within `tol`.
  static Direction checked(Vector u, double tol = 1e-12);

  std::size_t dim() const { return u_.size(); }
  const Vector& vec() const { return u_; }
  std::span<const double> span() const { return u_; }

 private:
  Vector u_;
};

/// Extreme points of a hull. `reduced` is false when the dimension is above
/// three and the input was only deduplicated.
struct PolytopeVertices {
  PointCloud vertices;
  bool reduced = true;
};

// ---------------------------------------------------------------------------
// Set descriptors

struct SetDescriptor;

struct BallSet {
  Vector center;
  double radius = 1.0;
};
struct BoxSet {
  Vector lo, hi;
};
struct RaySet {
  Vector origin;
  Vector direction;
};
/// Union of rays from `apex`. With `full` set the cone is all of space and
/// `directions` is ignored.
struct ConeSet {
  Vector apex;
  std::vector<Vector> directions;
  bool full = false;
};
struct FiniteSet {
  PointCloud points;
};
struct ProductSet {
  std::shared_ptr<const SetDescriptor> first, second;
};
struct UnionSet {
  std::vector<SetDescriptor> parts;
};
/// A descriptor whose lattice resolution is pinned.
struct GridOfSet {
  std::shared_ptr<const SetDescriptor> base;
  int resolution = 1;
};

struct SetDescriptor {
  using Shape = std::variant<BallSet, BoxSet, RaySet, ConeSet, FiniteSet,
                             ProductSet, UnionSet, GridOfSet>;
  Shape shape;

  static SetDescriptor ball(Vector center, double radius);
  static SetDescriptor box(Vector lo, Vector hi);
  static SetDescriptor ray(Vector origin, Vector direction);
  static SetDescriptor cone(Vector apex, std::vector<Vector> directions);
  static SetDescriptor whole_space(std::size_t dim);
  static SetDescriptor finite(PointCloud points);
  static SetDescriptor product(SetDescriptor first, SetDescriptor second);
  static SetDescriptor union_of(std::vector<SetDescriptor> parts);
  static SetDescriptor grid_of(SetDescriptor base, int resolution);

  std::size_t dim() const;
  bool bounded() const;
  std::string kind() const;
};

/// Distance from `p` to the set (0 inside). Product descriptors are rejected.
double distance_to(const SetDescriptor& s, std::span<const double> p);
bool contains(const SetDescriptor& s, std::span<const double> p,
              double tol = 1e-12);

// ---------------------------------------------------------------------------
// Operations

/// Symmetric Hausdorff distance between finite point sets. Infinite when
/// exactly one side is empty, zero when both are.
double hausdorff_distance(const PointCloud& a, const PointCloud& b);

struct SupportValue {
  double value = 0.0;
  PointCloud face;  // maximizers within tol * (1 + |value|)
};

SupportValue support_function(const PointCloud& c, const Direction& u,
                              double tol = 1e-9);

/// True iff the exposed face of conv(c) in direction u has diameter <= tol.
bool is_strictly_convex_in_direction(const PointCloud& c, const Direction& u,
                                     double tol = 1e-9);

struct Horizon {
  enum class Kind { Empty, Finite, FullSphere };
  Kind kind = Kind::Empty;
  std::vector<Direction> directions;  // only for Kind::Finite

  bool empty() const { return kind == Kind::Empty; }
};

Horizon horizon(const SetDescriptor& e);

/// Deterministic finite sample of the unit sphere used wherever a full
/// horizon has to be probed: equispaced angles in d = 2, a Fibonacci
/// lattice in d = 3 and seeded Gaussian directions above.
std::vector<Direction> sphere_directions(std::size_t dim, std::size_t count);

PolytopeVertices convex_hull_vertices(const PointCloud& p);

/// Lattice stand-in for a bounded set. Boxes and balls use per-axis spacing
/// extent/resolution over the bounding box; finite sets are returned as is.
PointCloud grid_points(const SetDescriptor& s, int resolution);

/// grid_points of K inflated by a closed ball of radius delta: the bounding
/// box of the inflated set at the same resolution, filtered by distance to K.
/// Finite sets get a ball lattice around each point.
PointCloud inflated_grid_points(const SetDescriptor& k, double delta,
                                int resolution);

/// Facet representation of conv(c) for membership tests. Exact for d <= 3
/// (lower-dimensional hulls handled in their affine span); above that the
/// facet normals are replaced by sampled directions.
class ConvexRegion {
 public:
  explicit ConvexRegion(const PointCloud& c, std::size_t sampled_directions = 256);

  /// Largest facet excess of `p` (<= 0 inside). A lower bound on the
  /// distance to the region, exact when the nearest point lies on a facet.
  double violation(std::span<const double> p) const;
  bool exact() const { return exact_; }

 private:
  std::size_t dim_ = 0;
  Vector origin_;
  std::vector<Vector> basis_;  // orthonormal basis of the affine span
  std::vector<Vector> normals_;
  std::vector<double> offsets_;
  bool exact_ = true;
};

/// Squared-distance-minimizing point of conv(vertices) with respect to a
/// convex set, via projected gradient on the simplex. Returns the distance.
double polytope_distance_to(const PointCloud& vertices, const SetDescriptor& s);

}  // namespace mtl
