#include "mtl/geometry.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <numeric>
#include <utility>

#include "mtl/random.hpp"

namespace mtl {

namespace {

constexpr double kDedupTol = 1e-12;

void require_same_dim(std::size_t a, std::size_t b, const char* what) {
  if (a != b) {
    throw std::invalid_argument(std::string(what) + ": dimension mismatch (" +
                                std::to_string(a) + " vs " + std::to_string(b) + ")");
  }
}

Vector sub(std::span<const double> a, std::span<const double> b) {
  Vector r(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) r[i] = a[i] - b[i];
  return r;
}

double cloud_scale(const PointCloud& p) {
  double s = 0.0;
  for (double v : p.data()) s = std::max(s, std::abs(v));
  return std::max(s, 1.0);
}

PointCloud deduplicate(const PointCloud& p) {
  PointCloud out(p.dim());
  for (std::size_t i = 0; i < p.size(); ++i) {
    bool seen = false;
    for (std::size_t j = 0; j < out.size() && !seen; ++j) {
      seen = distance(p[i], out[j]) <= kDedupTol;
    }
    if (!seen) out.push_back(p[i]);
  }
  return out;
}

double cross2(const std::array<double, 2>& o, const std::array<double, 2>& a,
              const std::array<double, 2>& b) {
  return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0]);
}

// Andrew's monotone chain. Returns indices of the strict hull, counter-clockwise.
std::vector<std::size_t> hull2d(const std::vector<std::array<double, 2>>& pts, double eps) {
  std::vector<std::size_t> order(pts.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return pts[a] < pts[b] || (pts[a] == pts[b] && a < b);
  });
  if (order.size() < 3) return order;
  std::vector<std::size_t> h(2 * order.size());
  std::size_t k = 0;
  for (std::size_t i = 0; i < order.size(); ++i) {
    while (k >= 2 && cross2(pts[h[k - 2]], pts[h[k - 1]], pts[order[i]]) <= eps) --k;
    h[k++] = order[i];
  }
  for (std::size_t i = order.size() - 1, t = k + 1; i-- > 0;) {
    while (k >= t && cross2(pts[h[k - 2]], pts[h[k - 1]], pts[order[i]]) <= eps) --k;
    h[k++] = order[i];
  }
  h.resize(k - 1);
  return h;
}

struct Face3 {
  std::array<std::size_t, 3> v;
  std::array<double, 3> normal;
  double offset;
  bool alive = true;
};

using P3 = std::array<double, 3>;

P3 sub3(const P3& a, const P3& b) { return {a[0] - b[0], a[1] - b[1], a[2] - b[2]}; }
P3 cross3(const P3& a, const P3& b) {
  return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
}
double dot3(const P3& a, const P3& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }

Face3 make_face(const std::vector<P3>& pts, std::size_t a, std::size_t b, std::size_t c) {
  Face3 f{{a, b, c}, {}, 0.0};
  P3 n = cross3(sub3(pts[b], pts[a]), sub3(pts[c], pts[a]));
  const double len = std::sqrt(dot3(n, n));
  for (auto& x : n) x /= len;
  f.normal = n;
  f.offset = dot3(n, pts[a]);
  return f;
}

struct Hull3 {
  std::vector<std::size_t> vertices;
  std::vector<Face3> faces;
};

// Incremental hull of full-rank 3-d points. `seed` holds four affinely
// independent indices.
Hull3 hull3d(const std::vector<P3>& pts, const std::array<std::size_t, 4>& seed, double eps) {
  std::vector<Face3> faces;
  P3 centroid{0, 0, 0};
  for (auto i : seed)
    for (int k = 0; k < 3; ++k) centroid[k] += pts[i][k] / 4.0;
  auto add_oriented = [&](std::size_t a, std::size_t b, std::size_t c) {
    Face3 f = make_face(pts, a, b, c);
    if (dot3(f.normal, centroid) - f.offset > 0) f = make_face(pts, a, c, b);
    faces.push_back(f);
  };
  add_oriented(seed[0], seed[1], seed[2]);
  add_oriented(seed[0], seed[1], seed[3]);
  add_oriented(seed[0], seed[2], seed[3]);
  add_oriented(seed[1], seed[2], seed[3]);

  for (std::size_t p = 0; p < pts.size(); ++p) {
    if (std::find(seed.begin(), seed.end(), p) != seed.end()) continue;
    std::vector<std::size_t> visible;
    for (std::size_t f = 0; f < faces.size(); ++f) {
      if (faces[f].alive && dot3(faces[f].normal, pts[p]) - faces[f].offset > eps) visible.push_back(f);
    }
    if (visible.empty()) continue;
    std::map<std::pair<std::size_t, std::size_t>, int> edges;
    for (auto f : visible) {
      const auto& v = faces[f].v;
      for (int e = 0; e < 3; ++e) edges[{v[e], v[(e + 1) % 3]}] += 1;
      faces[f].alive = false;
    }
    for (const auto& [edge, count] : edges) {
      if (edges.count({edge.second, edge.first}) == 0) {
        faces.push_back(make_face(pts, edge.first, edge.second, p));
      }
    }
  }

  Hull3 out;
  std::vector<char> used(pts.size(), 0);
  for (const auto& f : faces) {
    if (!f.alive) continue;
    out.faces.push_back(f);
    for (auto v : f.v) used[v] = 1;
  }
  // Keep only vertices exposed by the mean of their incident normals; this
  // drops points sitting on hull edges or facets.
  for (std::size_t v = 0; v < pts.size(); ++v) {
    if (!used[v]) continue;
    P3 u{0, 0, 0};
    for (const auto& f : out.faces) {
      if (f.v[0] == v || f.v[1] == v || f.v[2] == v)
        for (int k = 0; k < 3; ++k) u[k] += f.normal[k];
    }
    const double len = std::sqrt(dot3(u, u));
    if (len == 0.0) continue;
    const double best = dot3(u, pts[v]);
    bool unique = true;
    for (std::size_t w = 0; w < pts.size() && unique; ++w) {
      if (w == v || !used[w]) continue;
      if (dot3(u, pts[w]) >= best - eps * len) unique = false;
    }
    if (unique) out.vertices.push_back(v);
  }
  return out;
}

// Orthonormal basis of the affine span of `p`, built greedily from farthest
// points. The returned origin is p[0].
struct AffineSpan {
  Vector origin;
  std::vector<Vector> basis;
  std::vector<std::size_t> anchors;  // anchors[0] = 0, then one index per basis vector
};

AffineSpan affine_span(const PointCloud& p, std::size_t max_rank, double eps) {
  AffineSpan s;
  s.origin = p.point(0);
  s.anchors.push_back(0);
  while (s.basis.size() < max_rank) {
    double best = 0.0;
    std::size_t arg = 0;
    Vector best_resid;
    for (std::size_t i = 0; i < p.size(); ++i) {
      Vector r = sub(p[i], s.origin);
      for (const auto& b : s.basis) {
        const double c = dot(r, b);
        for (std::size_t k = 0; k < r.size(); ++k) r[k] -= c * b[k];
      }
      const double len = norm(r);
      if (len > best) {
        best = len;
        arg = i;
        best_resid = std::move(r);
      }
    }
    if (best <= eps) break;
    for (auto& x : best_resid) x /= best;
    s.basis.push_back(std::move(best_resid));
    s.anchors.push_back(arg);
  }
  return s;
}

Vector project_coords(const AffineSpan& s, std::span<const double> x) {
  Vector r = sub(x, s.origin);
  Vector c(s.basis.size());
  for (std::size_t k = 0; k < s.basis.size(); ++k) c[k] = dot(r, s.basis[k]);
  return c;
}

// Indices of the extreme points of `p` (already deduplicated), for dim <= 3.
// Facets are returned in span coordinates when requested.
struct LowDimHull {
  AffineSpan span;
  std::vector<std::size_t> vertices;
  std::vector<Vector> normals;  // in span coordinates
  std::vector<double> offsets;
};

LowDimHull low_dim_hull(const PointCloud& p) {
  const double scale = cloud_scale(p);
  const double eps = 1e-12 * scale;
  LowDimHull h;
  h.span = affine_span(p, std::min<std::size_t>(p.dim(), 3), eps);
  const std::size_t rank = h.span.basis.size();
  std::vector<Vector> coords;
  coords.reserve(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) coords.push_back(project_coords(h.span, p[i]));

  if (rank == 0) {
    h.vertices = {0};
  } else if (rank == 1) {
    std::size_t lo = 0, hi = 0;
    for (std::size_t i = 1; i < coords.size(); ++i) {
      if (coords[i][0] < coords[lo][0]) lo = i;
      if (coords[i][0] > coords[hi][0]) hi = i;
    }
    h.vertices = {lo, hi};
    if (lo > hi) std::swap(h.vertices[0], h.vertices[1]);
    h.normals = {{1.0}, {-1.0}};
    h.offsets = {coords[hi][0], -coords[lo][0]};
  } else if (rank == 2) {
    std::vector<std::array<double, 2>> pts;
    for (const auto& c : coords) pts.push_back({c[0], c[1]});
    auto ring = hull2d(pts, eps * scale);
    for (std::size_t k = 0; k < ring.size(); ++k) {
      const auto& a = pts[ring[k]];
      const auto& b = pts[ring[(k + 1) % ring.size()]];
      const double ex = b[0] - a[0], ey = b[1] - a[1];
      const double len = std::hypot(ex, ey);
      Vector n{ey / len, -ex / len};
      h.offsets.push_back(n[0] * a[0] + n[1] * a[1]);
      h.normals.push_back(std::move(n));
    }
    h.vertices = std::move(ring);
  } else {
    std::vector<P3> pts;
    for (const auto& c : coords) pts.push_back({c[0], c[1], c[2]});
    const auto& a = h.span.anchors;
    Hull3 hull = hull3d(pts, {a[0], a[1], a[2], a[3]}, eps);
    for (const auto& f : hull.faces) {
      h.normals.push_back({f.normal[0], f.normal[1], f.normal[2]});
      h.offsets.push_back(f.offset);
    }
    h.vertices = std::move(hull.vertices);
  }
  return h;
}

// Nearest point of a convex piece.
Vector project_convex(const SetDescriptor& s, std::span<const double> p) {
  Vector out(p.begin(), p.end());
  if (const auto* b = std::get_if<BallSet>(&s.shape)) {
    const double d = distance(p, b->center);
    if (d > b->radius) {
      for (std::size_t k = 0; k < p.size(); ++k)
        out[k] = b->center[k] + (p[k] - b->center[k]) * (b->radius / d);
    }
  } else if (const auto* x = std::get_if<BoxSet>(&s.shape)) {
    for (std::size_t k = 0; k < p.size(); ++k) out[k] = std::clamp(p[k], x->lo[k], x->hi[k]);
  } else if (const auto* r = std::get_if<RaySet>(&s.shape)) {
    const double t = std::max(0.0, dot(sub(p, r->origin), r->direction));
    for (std::size_t k = 0; k < p.size(); ++k) out[k] = r->origin[k] + t * r->direction[k];
  } else if (const auto* c = std::get_if<ConeSet>(&s.shape); c && c->full) {
    // whole space
  } else {
    throw std::logic_error("project_convex: not a convex piece");
  }
  return out;
}

void convex_pieces(const SetDescriptor& s, std::vector<SetDescriptor>& out) {
  std::visit(
      [&](const auto& v) {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, BallSet> || std::is_same_v<T, BoxSet> ||
                      std::is_same_v<T, RaySet>) {
          out.push_back(s);
        } else if constexpr (std::is_same_v<T, ConeSet>) {
          if (v.full) {
            out.push_back(s);
          } else if (v.directions.empty()) {
            out.push_back(SetDescriptor{BallSet{v.apex, 0.0}});
          } else {
            for (const auto& d : v.directions) out.push_back(SetDescriptor::ray(v.apex, d));
          }
        } else if constexpr (std::is_same_v<T, FiniteSet>) {
          for (std::size_t i = 0; i < v.points.size(); ++i)
            out.push_back(SetDescriptor{BallSet{v.points.point(i), 0.0}});
        } else if constexpr (std::is_same_v<T, UnionSet>) {
          for (const auto& part : v.parts) convex_pieces(part, out);
        } else if constexpr (std::is_same_v<T, GridOfSet>) {
          convex_pieces(*v.base, out);
        } else {
          throw std::invalid_argument("product descriptors have no convex decomposition");
        }
      },
      s.shape);
}

// Euclidean projection onto the probability simplex.
void project_simplex(Vector& w) {
  Vector s = w;
  std::sort(s.begin(), s.end(), std::greater<>());
  double cum = 0.0, theta = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    cum += s[i];
    const double t = (cum - 1.0) / static_cast<double>(i + 1);
    if (s[i] - t > 0) theta = t;
  }
  for (auto& x : w) x = std::max(0.0, x - theta);
}

void lattice_rec(const Vector& lo, const std::vector<double>& step, const std::vector<long>& count,
                 std::size_t axis, Vector& cur, PointCloud& out) {
  if (axis == lo.size()) {
    out.push_back(cur);
    return;
  }
  for (long k = 0; k < count[axis]; ++k) {
    cur[axis] = lo[axis] + static_cast<double>(k) * step[axis];
    lattice_rec(lo, step, count, axis + 1, cur, out);
  }
}

PointCloud lattice(const Vector& lo, const std::vector<double>& step, const std::vector<long>& count) {
  PointCloud out(lo.size());
  Vector cur(lo.size());
  lattice_rec(lo, step, count, 0, cur, out);
  return out;
}

// Per-axis lattice of [lo, hi] with spacing (hi - lo)/resolution, filtered by
// `keep`. Degenerate axes contribute their single coordinate.
template <class Keep>
PointCloud box_lattice(const Vector& lo, const Vector& hi, int resolution, Keep keep) {
  const std::size_t d = lo.size();
  std::vector<double> step(d);
  std::vector<long> count(d);
  for (std::size_t k = 0; k < d; ++k) {
    const double width = hi[k] - lo[k];
    step[k] = width > 0.0 ? width / resolution : 0.0;
    count[k] = width > 0.0 ? resolution + 1 : 1;
  }
  PointCloud raw = lattice(lo, step, count);
  PointCloud out(d);
  for (std::size_t i = 0; i < raw.size(); ++i)
    if (keep(raw[i])) out.push_back(raw[i]);
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

double squared_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double t = a[i] - b[i];
    s += t * t;
  }
  return s;
}

double distance(std::span<const double> a, std::span<const double> b) {
  return std::sqrt(squared_distance(a, b));
}

PointCloud::PointCloud(std::size_t dim, std::vector<double> coords)
    : dim_(dim), coords_(std::move(coords)) {
  if (dim_ == 0 && !coords_.empty()) throw std::invalid_argument("PointCloud: zero dimension");
  if (dim_ != 0 && coords_.size() % dim_ != 0)
    throw std::invalid_argument("PointCloud: coordinate count not a multiple of dimension");
  for (double v : coords_)
    if (!std::isfinite(v)) throw std::invalid_argument("PointCloud: non-finite coordinate");
}

PointCloud::PointCloud(std::initializer_list<Vector> points) {
  for (const auto& p : points) push_back(p);
}

PointCloud PointCloud::from_rows(const std::vector<Vector>& rows) {
  PointCloud out;
  for (const auto& r : rows) out.push_back(r);
  return out;
}

Vector PointCloud::point(std::size_t i) const {
  auto s = (*this)[i];
  return {s.begin(), s.end()};
}

void PointCloud::push_back(std::span<const double> p) {
  if (dim_ == 0) {
    if (p.empty()) throw std::invalid_argument("PointCloud: zero-dimensional point");
    dim_ = p.size();
  }
  require_same_dim(dim_, p.size(), "PointCloud::push_back");
  for (double v : p)
    if (!std::isfinite(v)) throw std::invalid_argument("PointCloud: non-finite coordinate");
  coords_.insert(coords_.end(), p.begin(), p.end());
}

void PointCloud::append(const PointCloud& other) {
  if (other.empty()) return;
  if (dim_ == 0) dim_ = other.dim_;
  require_same_dim(dim_, other.dim_, "PointCloud::append");
  coords_.insert(coords_.end(), other.coords_.begin(), other.coords_.end());
}

std::vector<Vector> PointCloud::rows() const {
  std::vector<Vector> out;
  out.reserve(size());
  for (std::size_t i = 0; i < size(); ++i) out.push_back(point(i));
  return out;
}

Direction::Direction(Vector u) : u_(std::move(u)) {
  const double n = norm(u_);
  if (u_.empty() || !std::isfinite(n) || n == 0.0)
    throw std::invalid_argument("Direction: zero or non-finite vector");
  for (auto& x : u_) x /= n;
}

Direction Direction::checked(Vector u, double tol) {
  if (std::abs(norm(u) - 1.0) > tol) throw std::invalid_argument("Direction: not unit norm");
  return Direction(std::move(u));
}

// ---------------------------------------------------------------------------

SetDescriptor SetDescriptor::ball(Vector center, double radius) {
  if (!(radius > 0.0) || !std::isfinite(radius)) throw std::invalid_argument("ball: radius must be positive");
  return {BallSet{std::move(center), radius}};
}

SetDescriptor SetDescriptor::box(Vector lo, Vector hi) {
  require_same_dim(lo.size(), hi.size(), "box");
  for (std::size_t k = 0; k < lo.size(); ++k)
    if (lo[k] > hi[k]) throw std::invalid_argument("box: lo > hi");
  return {BoxSet{std::move(lo), std::move(hi)}};
}

SetDescriptor SetDescriptor::ray(Vector origin, Vector direction) {
  require_same_dim(origin.size(), direction.size(), "ray");
  return {RaySet{std::move(origin), Direction(std::move(direction)).vec()}};
}

SetDescriptor SetDescriptor::cone(Vector apex, std::vector<Vector> directions) {
  for (auto& d : directions) {
    require_same_dim(apex.size(), d.size(), "cone");
    d = Direction(d).vec();
  }
  return {ConeSet{std::move(apex), std::move(directions), false}};
}

SetDescriptor SetDescriptor::whole_space(std::size_t dim) {
  return {ConeSet{Vector(dim, 0.0), {}, true}};
}

SetDescriptor SetDescriptor::finite(PointCloud points) { return {FiniteSet{std::move(points)}}; }

SetDescriptor SetDescriptor::product(SetDescriptor first, SetDescriptor second) {
  return {ProductSet{std::make_shared<const SetDescriptor>(std::move(first)),
                     std::make_shared<const SetDescriptor>(std::move(second))}};
}

SetDescriptor SetDescriptor::union_of(std::vector<SetDescriptor> parts) {
  if (parts.empty()) throw std::invalid_argument("union: no parts");
  for (const auto& p : parts) require_same_dim(parts.front().dim(), p.dim(), "union");
  return {UnionSet{std::move(parts)}};
}

SetDescriptor SetDescriptor::grid_of(SetDescriptor base, int resolution) {
  if (resolution < 1) throw std::invalid_argument("grid_of: resolution must be positive");
  return {GridOfSet{std::make_shared<const SetDescriptor>(std::move(base)), resolution}};
}

std::size_t SetDescriptor::dim() const {
  return std::visit(
      [](const auto& v) -> std::size_t {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, BallSet>) return v.center.size();
        else if constexpr (std::is_same_v<T, BoxSet>) return v.lo.size();
        else if constexpr (std::is_same_v<T, RaySet>) return v.origin.size();
        else if constexpr (std::is_same_v<T, ConeSet>) return v.apex.size();
        else if constexpr (std::is_same_v<T, FiniteSet>) return v.points.dim();
        else if constexpr (std::is_same_v<T, ProductSet>) return v.first->dim() + v.second->dim();
        else if constexpr (std::is_same_v<T, UnionSet>) return v.parts.front().dim();
        else return v.base->dim();
      },
      shape);
}

bool SetDescriptor::bounded() const {
  return std::visit(
      [](const auto& v) -> bool {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, RaySet>) return false;
        else if constexpr (std::is_same_v<T, ConeSet>) return !v.full && v.directions.empty();
        else if constexpr (std::is_same_v<T, ProductSet>) return v.first->bounded() && v.second->bounded();
        else if constexpr (std::is_same_v<T, UnionSet>)
          return std::all_of(v.parts.begin(), v.parts.end(), [](const auto& p) { return p.bounded(); });
        else if constexpr (std::is_same_v<T, GridOfSet>) return v.base->bounded();
        else return true;
      },
      shape);
}

std::string SetDescriptor::kind() const {
  static constexpr std::array<const char*, 8> names{"ball", "box", "ray", "cone", "finite",
                                                    "product", "union", "grid"};
  return names[shape.index()];
}

double distance_to(const SetDescriptor& s, std::span<const double> p) {
  require_same_dim(s.dim(), p.size(), "distance_to");
  if (const auto* prod = std::get_if<ProductSet>(&s.shape)) {
    const std::size_t d1 = prod->first->dim();
    const double a = distance_to(*prod->first, p.subspan(0, d1));
    const double b = distance_to(*prod->second, p.subspan(d1));
    return std::hypot(a, b);
  }
  std::vector<SetDescriptor> pieces;
  convex_pieces(s, pieces);
  double best = std::numeric_limits<double>::infinity();
  for (const auto& piece : pieces) best = std::min(best, distance(p, project_convex(piece, p)));
  return best;
}

bool contains(const SetDescriptor& s, std::span<const double> p, double tol) {
  return distance_to(s, p) <= tol;
}

// ---------------------------------------------------------------------------

double hausdorff_distance(const PointCloud& a, const PointCloud& b) {
  if (a.empty() && b.empty()) return 0.0;
  if (a.empty() || b.empty()) return std::numeric_limits<double>::infinity();
  require_same_dim(a.dim(), b.dim(), "hausdorff_distance");
  // Largest squared nearest-neighbour distance from each point of `from` to `to`.
  auto directed = [](const PointCloud& from, const PointCloud& to, double lower) {
    double worst = lower;
    for (std::size_t i = 0; i < from.size(); ++i) {
      double nearest = std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j < to.size(); ++j) {
        nearest = std::min(nearest, squared_distance(from[i], to[j]));
        if (nearest <= worst) break;  // cannot raise the running max
      }
      worst = std::max(worst, nearest);
    }
    return worst;
  };
  const double ab = directed(a, b, 0.0);
  return std::sqrt(directed(b, a, ab));
}

SupportValue support_function(const PointCloud& c, const Direction& u, double tol) {
  if (c.empty()) throw std::invalid_argument("support_function: empty set");
  require_same_dim(c.dim(), u.dim(), "support_function");
  double best = -std::numeric_limits<double>::infinity();
  std::vector<double> vals(c.size());
  for (std::size_t i = 0; i < c.size(); ++i) {
    vals[i] = dot(c[i], u.span());
    best = std::max(best, vals[i]);
  }
  SupportValue out{best, PointCloud(c.dim())};
  const double cut = best - tol * (1.0 + std::abs(best));
  for (std::size_t i = 0; i < c.size(); ++i)
    if (vals[i] >= cut) out.face.push_back(c[i]);
  return out;
}

bool is_strictly_convex_in_direction(const PointCloud& c, const Direction& u, double tol) {
  const auto face = support_function(c, u, 1e-12).face;
  double diameter = 0.0;
  for (std::size_t i = 0; i < face.size(); ++i)
    for (std::size_t j = i + 1; j < face.size(); ++j) diameter = std::max(diameter, distance(face[i], face[j]));
  return diameter <= tol;
}

Horizon horizon(const SetDescriptor& e) {
  Horizon h;
  auto add = [&h](const Vector& u) {
    Direction d(u);
    for (const auto& existing : h.directions)
      if (distance(existing.span(), d.span()) <= 1e-12) return;
    h.directions.push_back(std::move(d));
  };
  auto merge = [&](const Horizon& other) {
    if (h.kind == Horizon::Kind::FullSphere) return;
    if (other.kind == Horizon::Kind::FullSphere) {
      h.kind = Horizon::Kind::FullSphere;
      h.directions.clear();
      return;
    }
    for (const auto& d : other.directions) add(d.vec());
    if (!h.directions.empty()) h.kind = Horizon::Kind::Finite;
  };
  std::visit(
      [&](const auto& v) {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, BallSet> || std::is_same_v<T, BoxSet> ||
                      std::is_same_v<T, FiniteSet>) {
        } else if constexpr (std::is_same_v<T, RaySet>) {
          add(v.direction);
          h.kind = Horizon::Kind::Finite;
        } else if constexpr (std::is_same_v<T, ConeSet>) {
          if (v.full) {
            h.kind = Horizon::Kind::FullSphere;
          } else {
            for (const auto& d : v.directions) add(d);
            if (!h.directions.empty()) h.kind = Horizon::Kind::Finite;
          }
        } else if constexpr (std::is_same_v<T, UnionSet>) {
          for (const auto& part : v.parts) merge(horizon(part));
        } else {
          throw std::invalid_argument("horizon: unsupported descriptor '" + e.kind() + "'");
        }
      },
      e.shape);
  return h;
}

std::vector<Direction> sphere_directions(std::size_t dim, std::size_t count) {
  std::vector<Direction> out;
  if (dim == 1) return {Direction({1.0}), Direction({-1.0})};
  if (dim == 2) {
    for (std::size_t k = 0; k < count; ++k) {
      const double t = 2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(count);
      out.emplace_back(Vector{std::cos(t), std::sin(t)});
    }
    return out;
  }
  if (dim == 3) {
    const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
    for (std::size_t k = 0; k < count; ++k) {
      const double z = 1.0 - 2.0 * (static_cast<double>(k) + 0.5) / static_cast<double>(count);
      const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
      const double t = golden * static_cast<double>(k);
      out.emplace_back(Vector{r * std::cos(t), r * std::sin(t), z});
    }
    return out;
  }
  Philox rng(stream_key(0x5EED5EEDull, dim, count));
  for (std::size_t k = 0; k < count; ++k) {
    Vector v(dim);
    for (auto& x : v) x = rng.normal();
    out.emplace_back(std::move(v));
  }
  return out;
}

PolytopeVertices convex_hull_vertices(const PointCloud& p) {
  if (p.empty()) throw std::invalid_argument("convex_hull_vertices: empty input");
  PointCloud unique = deduplicate(p);
  if (p.dim() > 3) return {std::move(unique), false};
  const LowDimHull h = low_dim_hull(unique);
  std::vector<std::size_t> idx = h.vertices;
  if (h.span.basis.size() != 2) std::sort(idx.begin(), idx.end());
  PointCloud out(p.dim());
  for (auto i : idx) out.push_back(unique[i]);
  return {std::move(out), true};
}

PointCloud grid_points(const SetDescriptor& s, int resolution) {
  if (resolution < 1) throw std::invalid_argument("grid_points: resolution must be positive");
  if (!s.bounded()) throw std::invalid_argument("grid_points: unbounded set '" + s.kind() + "'");
  return std::visit(
      [&](const auto& v) -> PointCloud {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, BoxSet>) {
          return box_lattice(v.lo, v.hi, resolution, [](auto) { return true; });
        } else if constexpr (std::is_same_v<T, BallSet>) {
          Vector lo = v.center, hi = v.center;
          for (std::size_t k = 0; k < lo.size(); ++k) {
            lo[k] -= v.radius;
            hi[k] += v.radius;
          }
          const double r = v.radius * (1.0 + 1e-12);
          return box_lattice(lo, hi, resolution, [&](std::span<const double> x) { return distance(x, v.center) <= r; });
        } else if constexpr (std::is_same_v<T, FiniteSet>) {
          return v.points;
        } else if constexpr (std::is_same_v<T, ConeSet>) {
          return PointCloud{v.apex};
        } else if constexpr (std::is_same_v<T, GridOfSet>) {
          return grid_points(*v.base, v.resolution);
        } else if constexpr (std::is_same_v<T, UnionSet>) {
          PointCloud out(s.dim());
          for (const auto& part : v.parts) out.append(grid_points(part, resolution));
          return out;
        } else if constexpr (std::is_same_v<T, ProductSet>) {
          const PointCloud a = grid_points(*v.first, resolution);
          const PointCloud b = grid_points(*v.second, resolution);
          PointCloud out(a.dim() + b.dim());
          Vector row(a.dim() + b.dim());
          for (std::size_t i = 0; i < a.size(); ++i)
            for (std::size_t j = 0; j < b.size(); ++j) {
              std::copy(a[i].begin(), a[i].end(), row.begin());
              std::copy(b[j].begin(), b[j].end(), row.begin() + static_cast<long>(a.dim()));
              out.push_back(row);
            }
          return out;
        } else {
          throw std::invalid_argument("grid_points: unbounded set");
        }
      },
      s.shape);
}

PointCloud inflated_grid_points(const SetDescriptor& k, double delta, int resolution) {
  if (delta < 0.0) throw std::invalid_argument("inflated_grid_points: negative inflation");
  if (delta == 0.0) return grid_points(k, resolution);
  if (!k.bounded()) throw std::invalid_argument("inflated_grid_points: unbounded set");
  const double reach = delta * (1.0 + 1e-12) + 1e-15;
  auto keep = [&](std::span<const double> x) { return distance_to(k, x) <= reach; };
  // Lattice of the inflated set itself: its bounding box at the same resolution.
  auto inflated_box = [&](Vector lo, Vector hi) {
    for (std::size_t i = 0; i < lo.size(); ++i) {
      lo[i] -= delta;
      hi[i] += delta;
    }
    return box_lattice(lo, hi, resolution, keep);
  };
  if (const auto* b = std::get_if<BoxSet>(&k.shape)) return inflated_box(b->lo, b->hi);
  if (const auto* b = std::get_if<BallSet>(&k.shape)) {
    Vector lo = b->center, hi = b->center;
    for (std::size_t i = 0; i < lo.size(); ++i) {
      lo[i] -= b->radius;
      hi[i] += b->radius;
    }
    return inflated_box(lo, hi);
  }
  if (const auto* g = std::get_if<GridOfSet>(&k.shape)) return inflated_grid_points(*g->base, delta, g->resolution);
  if (const auto* u = std::get_if<UnionSet>(&k.shape)) {
    PointCloud out(k.dim());
    for (const auto& part : u->parts) out.append(inflated_grid_points(part, delta, resolution));
    return out;
  }
  // Finite sets and degenerate cones: a ball lattice around each point.
  const PointCloud base = grid_points(k, resolution);
  PointCloud out(k.dim());
  for (std::size_t i = 0; i < base.size(); ++i)
    out.append(grid_points(SetDescriptor{BallSet{base.point(i), delta}}, resolution));
  return out;
}

// ---------------------------------------------------------------------------

ConvexRegion::ConvexRegion(const PointCloud& c, std::size_t sampled_directions) : dim_(c.dim()) {
  if (c.empty()) throw std::invalid_argument("ConvexRegion: empty set");
  if (dim_ <= 3) {
    LowDimHull h = low_dim_hull(deduplicate(c));
    origin_ = h.span.origin;
    basis_ = h.span.basis;
    normals_ = std::move(h.normals);
    offsets_ = std::move(h.offsets);
    return;
  }
  exact_ = false;
  origin_.assign(dim_, 0.0);
  for (std::size_t k = 0; k < dim_; ++k) {
    Vector e(dim_, 0.0);
    e[k] = 1.0;
    basis_.push_back(e);
  }
  std::vector<Direction> dirs = sphere_directions(dim_, sampled_directions);
  for (std::size_t i = 0; i < c.size(); ++i)
    if (norm(c[i]) > 0) dirs.emplace_back(c.point(i));
  for (const auto& u : dirs) {
    normals_.push_back(u.vec());
    offsets_.push_back(support_function(c, u, 0.0).value);
  }
}

double ConvexRegion::violation(std::span<const double> p) const {
  require_same_dim(dim_, p.size(), "ConvexRegion::violation");
  Vector r = sub(p, origin_);
  Vector coords(basis_.size());
  for (std::size_t k = 0; k < basis_.size(); ++k) {
    coords[k] = dot(r, basis_[k]);
    for (std::size_t i = 0; i < dim_; ++i) r[i] -= coords[k] * basis_[k][i];
  }
  double worst = exact_ ? norm(r) : -std::numeric_limits<double>::infinity();
  if (basis_.empty()) return worst;
  for (std::size_t f = 0; f < normals_.size(); ++f) worst = std::max(worst, dot(normals_[f], coords) - offsets_[f]);
  return worst;
}

double polytope_distance_to(const PointCloud& vertices, const SetDescriptor& s) {
  if (vertices.empty()) return std::numeric_limits<double>::infinity();
  require_same_dim(vertices.dim(), s.dim(), "polytope_distance_to");
  if (vertices.size() == 1) return distance_to(s, vertices[0]);
  std::vector<SetDescriptor> pieces;
  convex_pieces(s, pieces);

  const std::size_t m = vertices.size(), d = vertices.dim();
  Vector mean(d, 0.0);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t k = 0; k < d; ++k) mean[k] += vertices[i][k] / static_cast<double>(m);
  double lipschitz = 0.0;
  for (std::size_t i = 0; i < m; ++i) lipschitz += squared_distance(vertices[i], mean);
  if (lipschitz == 0.0) return distance_to(s, mean);
  const double step = 1.0 / lipschitz;

  double best = std::numeric_limits<double>::infinity();
  for (const auto& piece : pieces) {
    Vector w(m, 1.0 / static_cast<double>(m)), point(d), grad(m);
    double dist = std::numeric_limits<double>::infinity();
    double previous = dist;
    for (int it = 0; it < 5000; ++it) {
      std::fill(point.begin(), point.end(), 0.0);
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t k = 0; k < d; ++k) point[k] += w[i] * vertices[i][k];
      const Vector resid = sub(point, project_convex(piece, point));
      const double current = norm(resid);
      dist = std::min(dist, current);
      if (current <= 1e-15) break;
      if (it > 50 && previous - current <= 1e-16 * (1.0 + current)) break;
      previous = current;
      for (std::size_t i = 0; i < m; ++i) grad[i] = dot(vertices[i], resid);
      for (std::size_t i = 0; i < m; ++i) w[i] -= step * grad[i];
      project_simplex(w);
    }
    best = std::min(best, dist);
  }
  return best;
}

}  // namespace mtl
