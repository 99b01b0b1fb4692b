#include "mtl/convergence.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>
#include <thread>

#include <boost/math/special_functions/gamma.hpp>

#include "mtl/random.hpp"
#include "mtl/ranks.hpp"

namespace mtl {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

Eigen::VectorXd to_eigen(std::span<const double> x) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(x.size()));
  for (std::size_t k = 0; k < x.size(); ++k) v(static_cast<Eigen::Index>(k)) = x[k];
  return v;
}

double max_error_at(const MaxAffinePotential& psi, const MapOracle& t, std::span<const double> x, double tol) {
  const auto vertices = eval_subdifferential(psi, x, tol).vertices;
  const Vector tx = t(x);
  double worst = 0.0;
  for (std::size_t i = 0; i < vertices.size(); ++i) worst = std::max(worst, distance(vertices[i], tx));
  return worst;
}

double max_error_over(const MaxAffinePotential& psi, const MapOracle& t, const PointCloud& xs, double tol) {
  double worst = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) worst = std::max(worst, max_error_at(psi, t, xs[i], tol));
  return worst;
}

const ProductSet& require_product(const SetDescriptor& probe, const char* what) {
  const auto* p = std::get_if<ProductSet>(&probe.shape);
  if (!p) throw std::invalid_argument(std::string(what) + ": probe must be a product X x Y, got '" + probe.kind() + "'");
  return *p;
}

// Points along every horizon ray of e at the given radii from its origin or apex.
void ray_probes(const SetDescriptor& e, const std::vector<double>& radii, std::size_t sphere_count, PointCloud& out) {
  auto along = [&](const Vector& origin, std::span<const double> u) {
    Vector p(origin.size());
    for (double r : radii) {
      for (std::size_t k = 0; k < p.size(); ++k) p[k] = origin[k] + r * u[k];
      out.push_back(p);
    }
  };
  std::visit(overloaded{
                 [&](const RaySet& r) { along(r.origin, Direction(r.direction).span()); },
                 [&](const ConeSet& c) {
                   if (c.full) {
                     for (const auto& u : sphere_directions(e.dim(), sphere_count)) along(c.apex, u.span());
                   } else {
                     for (const auto& u : c.directions) along(c.apex, Direction(u).span());
                   }
                 },
                 [&](const UnionSet& u) {
                   for (const auto& part : u.parts) ray_probes(part, radii, sphere_count, out);
                 },
                 [&](const GridOfSet& g) { ray_probes(*g.base, radii, sphere_count, out); },
                 [](const auto&) {},
             },
             e.shape);
}

std::vector<Direction> horizon_directions(const SetDescriptor& e, std::size_t sphere_count) {
  const Horizon h = horizon(e);
  if (h.kind == Horizon::Kind::FullSphere) return sphere_directions(e.dim(), sphere_count);
  return h.directions;
}

void check_receding_hypothesis(const SetDescriptor& e, const PointCloud* range, const RecedingOptions& options) {
  const auto dirs = horizon_directions(e, options.probe_directions);
  if (dirs.empty()) return;
  if (!range || range->empty()) {
    throw HypothesisViolated("hypothesis violated: E is unbounded but the range of T is unbounded or unknown",
                             dirs.front().vec());
  }
  for (const auto& u : dirs) {
    if (!is_strictly_convex_in_direction(*range, u, options.convexity_tol)) {
      std::string msg = "hypothesis violated: range is not strictly convex in direction (";
      for (std::size_t k = 0; k < u.dim(); ++k) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%s%.17g", k ? ", " : "", u.vec()[k]);
        msg += buf;
      }
      throw HypothesisViolated(msg + ")", u.vec());
    }
  }
}

std::vector<double> average_ranks(const std::vector<double>& v) {
  std::vector<std::size_t> idx(v.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> r(v.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) r[idx[k]] = avg;
    i = j + 1;
  }
  return r;
}

PointCloud polygon_around(const Vector& center, double radius, std::size_t count) {
  // Circumscribed regular polygon, so its hull contains the disc.
  const double r = radius / std::cos(std::numbers::pi / static_cast<double>(count));
  PointCloud out(2);
  for (std::size_t k = 0; k < count; ++k) {
    const double t = 2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(count);
    out.push_back(Vector{center[0] + r * std::cos(t), center[1] + r * std::sin(t)});
  }
  return out;
}

PointCloud ball_range(const Vector& center, double radius) {
  const std::size_t d = center.size();
  if (d == 1) return PointCloud{{center[0] - radius}, {center[0] + radius}};
  if (d == 2) return polygon_around(center, radius, 1024);
  // Sampled directions pushed out far enough that the hull covers the ball.
  const std::size_t count = 4096;
  const auto dirs = sphere_directions(d, count);
  const double cap = std::pow(static_cast<double>(count), -1.0 / static_cast<double>(d - 1));
  const double r = radius / std::cos(std::min(1.2, 4.0 * cap));
  PointCloud out(d);
  Vector p(d);
  for (const auto& u : dirs) {
    for (std::size_t k = 0; k < d; ++k) p[k] = center[k] + r * u.vec()[k];
    out.push_back(p);
  }
  return out;
}

// Largest lattice spacing of grid_points(k, resolution).
double lattice_cell(const SetDescriptor& k, int resolution) {
  if (const auto* b = std::get_if<BoxSet>(&k.shape)) {
    double cell = 0.0;
    for (std::size_t i = 0; i < b->lo.size(); ++i) cell = std::max(cell, (b->hi[i] - b->lo[i]) / resolution);
    return cell;
  }
  if (const auto* b = std::get_if<BallSet>(&k.shape)) return 2.0 * b->radius / resolution;
  if (const auto* g = std::get_if<GridOfSet>(&k.shape)) return lattice_cell(*g->base, g->resolution);
  return 0.0;
}

// Distance from x to the boundary of the (bounded) source support, positive inside.
std::optional<double> interior_depth(const Family& f, std::span<const double> x) {
  switch (f.kind) {
    case Family::Kind::Gaussian:
      return std::nullopt;
    case Family::Kind::UniformBox: {
      double depth = std::numeric_limits<double>::infinity();
      for (std::size_t k = 0; k < x.size(); ++k) depth = std::min({depth, x[k] - f.lo[k], f.hi[k] - x[k]});
      return depth;
    }
    case Family::Kind::UniformBall:
    case Family::Kind::SphericalUniformGrid:
      return f.radius - distance(x, f.center);
  }
  return std::nullopt;
}

std::size_t resolve_threads(std::size_t requested, std::size_t tasks) {
  std::size_t n = requested;
  if (n == 0) n = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("MTL_THREADS")) {
    char* end = nullptr;
    const unsigned long cap = std::strtoul(env, &end, 10);
    if (end != env && cap > 0) n = std::min<std::size_t>(n, cap);
  }
  return std::max<std::size_t>(1, std::min(n, tasks));
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

// ---------------------------------------------------------------------------
// MapOracle

MapOracle MapOracle::sorted_1d(std::vector<double> source_knots, std::vector<double> target_knots) {
  if (source_knots.size() != target_knots.size() || source_knots.size() < 2)
    throw std::invalid_argument("MapOracle::sorted_1d: need at least two matched knots");
  for (std::size_t i = 1; i < source_knots.size(); ++i) {
    if (!(source_knots[i] > source_knots[i - 1]))
      throw std::invalid_argument("MapOracle::sorted_1d: source knots must be strictly increasing");
    if (target_knots[i] < target_knots[i - 1])
      throw std::invalid_argument("MapOracle::sorted_1d: target knots must be nondecreasing");
  }
  return MapOracle(Sorted1DOracle{std::move(source_knots), std::move(target_knots)});
}

MapOracle MapOracle::tabulated(PointCloud sites, PointCloud values) {
  if (sites.empty() || sites.size() != values.size())
    throw std::invalid_argument("MapOracle::tabulated: sites and values must be non-empty and aligned");
  return MapOracle(TabulatedOracle{std::move(sites), std::move(values)});
}

Vector MapOracle::operator()(std::span<const double> x) const {
  return std::visit(
      overloaded{
          [&](const IdentityOracle&) { return Vector(x.begin(), x.end()); },
          [&](const LinearOracle& o) {
            if (static_cast<std::size_t>(o.map.matrix.cols()) != x.size())
              throw std::invalid_argument("MapOracle: dimension mismatch");
            return o.map.apply(x);
          },
          [&](const Sorted1DOracle& o) {
            if (x.size() != 1) throw std::invalid_argument("MapOracle: sorted_1d oracle is one-dimensional");
            const auto& s = o.source_knots;
            const auto& t = o.target_knots;
            const auto it = std::upper_bound(s.begin(), s.end(), x[0]);
            std::size_t hi = static_cast<std::size_t>(it - s.begin());
            hi = std::clamp<std::size_t>(hi, 1, s.size() - 1);
            const std::size_t lo = hi - 1;
            const double w = (x[0] - s[lo]) / (s[hi] - s[lo]);
            return Vector{t[lo] + w * (t[hi] - t[lo])};
          },
          [&](const TabulatedOracle& o) {
            if (o.sites.dim() != x.size()) throw std::invalid_argument("MapOracle: dimension mismatch");
            std::size_t best = 0;
            double best_d = std::numeric_limits<double>::infinity();
            for (std::size_t i = 0; i < o.sites.size(); ++i) {
              const double d = squared_distance(o.sites[i], x);
              if (d < best_d) {
                best_d = d;
                best = i;
              }
            }
            return o.values.point(best);
          },
          [&](const GaussianCenterOutwardOracle& o) {
            if (o.dim != x.size()) throw std::invalid_argument("MapOracle: dimension mismatch");
            const double r = norm(x);
            Vector y(x.size(), 0.0);
            if (r == 0.0) return y;
            const double f = boost::math::gamma_p(0.5 * static_cast<double>(o.dim), 0.5 * r * r);
            for (std::size_t k = 0; k < x.size(); ++k) y[k] = f * x[k] / r;
            return y;
          },
      },
      v_);
}

std::string MapOracle::kind() const {
  return std::visit(overloaded{
                        [](const IdentityOracle&) { return std::string("identity"); },
                        [](const LinearOracle&) { return std::string("linear"); },
                        [](const Sorted1DOracle&) { return std::string("sorted_1d"); },
                        [](const TabulatedOracle&) { return std::string("tabulated"); },
                        [](const GaussianCenterOutwardOracle&) { return std::string("gaussian_center_outward"); },
                    },
                    v_);
}

// ---------------------------------------------------------------------------
// Diagnostics

bool fell_check(const MaxAffinePotential& psi, const SetDescriptor& probe, FellMode mode, double tol, int resolution) {
  const ProductSet& p = require_product(probe, "fell_check");
  if (p.first->dim() != psi.dim() || p.second->dim() != psi.dim())
    throw std::invalid_argument("fell_check: probe dimension does not match the potential");
  if (mode == FellMode::Miss && !probe.bounded())
    throw std::invalid_argument("fell_check: miss probes must be bounded");
  if (!p.first->bounded()) throw std::invalid_argument("fell_check: the X part of the probe must be bounded");

  const PointCloud xs = grid_points(*p.first, resolution);
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const auto vertices = eval_subdifferential(psi, xs[i], tol).vertices;
    const bool near = polytope_distance_to(vertices, *p.second) <= tol;
    if (near) return mode == FellMode::Hit;
  }
  return mode == FellMode::Miss;
}

double local_uniform_sup(const MaxAffinePotential& psi, const MapOracle& t, const SetDescriptor& k, int resolution,
                         double tol) {
  if (!k.bounded()) throw std::invalid_argument("local_uniform_sup: K must be bounded");
  return max_error_over(psi, t, grid_points(k, resolution), tol);
}

double image_hausdorff(const MaxAffinePotential& psi, const MapOracle& t, const SetDescriptor& k, double delta,
                       int resolution, double tol) {
  if (!k.bounded()) throw std::invalid_argument("image_hausdorff: K must be bounded");
  const PointCloud inflated = inflated_grid_points(k, delta, resolution);
  PointCloud images(psi.dim());
  for (std::size_t i = 0; i < inflated.size(); ++i) images.append(eval_subdifferential(psi, inflated[i], tol).vertices);
  const PointCloud lattice = grid_points(k, resolution);
  PointCloud targets(psi.dim());
  for (std::size_t i = 0; i < lattice.size(); ++i) targets.push_back(t(lattice[i]));
  return hausdorff_distance(images, targets);
}

double global_sup_on_receding_set(const MaxAffinePotential& psi, const MapOracle& t, const SetDescriptor& e,
                                  const PointCloud& range, double r_max, int resolution, double tol,
                                  const RecedingOptions& options) {
  if (!(r_max > 0.0)) throw std::invalid_argument("global_sup_on_receding_set: R_max must be positive");
  if (e.bounded()) return local_uniform_sup(psi, t, e, resolution, tol);
  check_receding_hypothesis(e, &range, options);

  const std::size_t d = e.dim();
  PointCloud xs(d);
  const PointCloud box = grid_points(SetDescriptor::box(Vector(d, -r_max), Vector(d, r_max)), resolution);
  const double r = r_max * (1.0 + 1e-12);
  for (std::size_t i = 0; i < box.size(); ++i)
    if (norm(box[i]) <= r && distance_to(e, box[i]) <= 1e-12) xs.push_back(box[i]);
  ray_probes(e, {r_max, 2.0 * r_max, 4.0 * r_max}, options.probe_directions, xs);
  return max_error_over(psi, t, xs, tol);
}

bool range_containment_check(const MaxAffinePotential& psi, const PointCloud& range, double tol) {
  if (range.empty()) throw std::invalid_argument("range_containment_check: empty range cloud");
  if (range.dim() != psi.dim()) throw std::invalid_argument("range_containment_check: dimension mismatch");
  const ConvexRegion region(range);
  const auto& slopes = psi.slopes();
  for (std::size_t i = 0; i < slopes.size(); ++i)
    if (region.violation(slopes[i]) > tol) return false;
  return true;
}

double spearman(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size() || a.size() < 2) throw std::invalid_argument("spearman: need two aligned samples of size >= 2");
  const auto ra = average_ranks(a), rb = average_ranks(b);
  const double n = static_cast<double>(a.size());
  const double mean = (n + 1.0) / 2.0;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    sab += (ra[i] - mean) * (rb[i] - mean);
    saa += (ra[i] - mean) * (ra[i] - mean);
    sbb += (rb[i] - mean) * (rb[i] - mean);
  }
  if (saa == 0.0 || sbb == 0.0) return 0.0;
  return sab / std::sqrt(saa * sbb);
}

double median(std::vector<double> v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const std::size_t h = v.size() / 2;
  return v.size() % 2 ? v[h] : 0.5 * (v[h - 1] + v[h]);
}

// ---------------------------------------------------------------------------
// Families

Family Family::gaussian(Vector mean, Eigen::MatrixXd cov) {
  const auto d = static_cast<Eigen::Index>(mean.size());
  if (d == 0 || cov.rows() != d || cov.cols() != d)
    throw std::invalid_argument("Family::gaussian: covariance must be d x d");
  if (!cov.isApprox(cov.transpose(), 1e-12)) throw std::invalid_argument("Family::gaussian: covariance must be symmetric");
  if (Eigen::LLT<Eigen::MatrixXd>(cov).info() != Eigen::Success)
    throw std::invalid_argument("Family::gaussian: covariance must be positive definite");
  Family f;
  f.kind = Kind::Gaussian;
  f.mean = std::move(mean);
  f.cov = std::move(cov);
  return f;
}

Family Family::uniform_box(Vector lo, Vector hi) {
  if (lo.empty() || lo.size() != hi.size()) throw std::invalid_argument("Family::uniform_box: bounds must align");
  for (std::size_t k = 0; k < lo.size(); ++k)
    if (!(hi[k] > lo[k])) throw std::invalid_argument("Family::uniform_box: need lo < hi on every axis");
  Family f;
  f.kind = Kind::UniformBox;
  f.lo = std::move(lo);
  f.hi = std::move(hi);
  return f;
}

Family Family::uniform_ball(Vector center, double radius) {
  if (center.empty() || !(radius > 0.0)) throw std::invalid_argument("Family::uniform_ball: need a centre and radius > 0");
  Family f;
  f.kind = Kind::UniformBall;
  f.center = std::move(center);
  f.radius = radius;
  return f;
}

Family Family::spherical_uniform_grid(std::size_t dim) {
  if (dim < 2) throw std::invalid_argument("Family::spherical_uniform_grid: dimension must be at least 2");
  Family f;
  f.kind = Kind::SphericalUniformGrid;
  f.center.assign(dim, 0.0);
  f.radius = 1.0;
  return f;
}

std::size_t Family::dim() const {
  switch (kind) {
    case Kind::Gaussian:
      return mean.size();
    case Kind::UniformBox:
      return lo.size();
    case Kind::UniformBall:
    case Kind::SphericalUniformGrid:
      return center.size();
  }
  return 0;
}

std::string Family::name() const {
  switch (kind) {
    case Kind::Gaussian:
      return "gaussian";
    case Kind::UniformBox:
      return "uniform_box";
    case Kind::UniformBall:
      return "uniform_ball";
    case Kind::SphericalUniformGrid:
      return "spherical_uniform_grid";
  }
  return "";
}

bool Family::operator==(const Family& o) const {
  if (kind != o.kind || dim() != o.dim()) return false;
  switch (kind) {
    case Kind::Gaussian:
      return mean == o.mean && cov == o.cov;
    case Kind::UniformBox:
      return lo == o.lo && hi == o.hi;
    case Kind::UniformBall:
      return center == o.center && radius == o.radius;
    case Kind::SphericalUniformGrid:
      return true;
  }
  return false;
}

GridLayout grid_layout(std::size_t n) {
  if (n == 0) throw std::invalid_argument("grid_layout: n must be positive");
  const std::size_t n_r = std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(std::sqrt(n / 4.0))));
  const std::size_t n_s = n / n_r;
  return {n_r, n_s, n - n_r * n_s};
}

PointCloud sample_family(const Family& f, std::size_t n, Philox& rng, std::uint64_t grid_seed) {
  const std::size_t d = f.dim();
  PointCloud out(d);
  out.reserve(n);
  Vector p(d);
  switch (f.kind) {
    case Family::Kind::Gaussian: {
      const Eigen::MatrixXd l = Eigen::LLT<Eigen::MatrixXd>(f.cov).matrixL();
      Eigen::VectorXd z(static_cast<Eigen::Index>(d));
      for (std::size_t i = 0; i < n; ++i) {
        for (Eigen::Index k = 0; k < z.size(); ++k) z(k) = rng.normal();
        const Eigen::VectorXd y = l * z;
        for (std::size_t k = 0; k < d; ++k) p[k] = f.mean[k] + y(static_cast<Eigen::Index>(k));
        out.push_back(p);
      }
      break;
    }
    case Family::Kind::UniformBox:
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t k = 0; k < d; ++k) p[k] = f.lo[k] + (f.hi[k] - f.lo[k]) * rng.uniform();
        out.push_back(p);
      }
      break;
    case Family::Kind::UniformBall:
      for (std::size_t i = 0; i < n; ++i) {
        double len = 0.0;
        do {
          len = 0.0;
          for (auto& v : p) {
            v = rng.normal();
            len += v * v;
          }
          len = std::sqrt(len);
        } while (len < 1e-12);
        const double r = f.radius * std::pow(rng.uniform(), 1.0 / static_cast<double>(d));
        for (std::size_t k = 0; k < d; ++k) p[k] = f.center[k] + r * p[k] / len;
        out.push_back(p);
      }
      break;
    case Family::Kind::SphericalUniformGrid: {
      const GridLayout g = grid_layout(n);
      return center_outward_grid(g.n_r, g.n_s, g.n_0, d, grid_seed).points;
    }
  }
  return out;
}

MapOracle select_oracle(const Family& source, const Family& target) {
  if (source.dim() != target.dim()) throw std::invalid_argument("select_oracle: families differ in dimension");
  const std::size_t d = source.dim();
  const auto dd = static_cast<Eigen::Index>(d);
  using K = Family::Kind;
  if (source == target) return MapOracle::identity();
  if (source.kind == K::Gaussian && target.kind == K::Gaussian) {
    LinearMap m = gaussian_brenier(source.cov, target.cov);
    m.shift = to_eigen(target.mean) - m.matrix * to_eigen(source.mean);
    return MapOracle::linear(std::move(m));
  }
  if (source.kind == K::UniformBox && target.kind == K::UniformBox) {
    if (d == 1) return MapOracle::sorted_1d({source.lo[0], source.hi[0]}, {target.lo[0], target.hi[0]});
    LinearMap m{Eigen::MatrixXd::Zero(dd, dd), Eigen::VectorXd::Zero(dd)};
    for (Eigen::Index k = 0; k < dd; ++k) {
      const auto i = static_cast<std::size_t>(k);
      m.matrix(k, k) = (target.hi[i] - target.lo[i]) / (source.hi[i] - source.lo[i]);
      m.shift(k) = target.lo[i] - m.matrix(k, k) * source.lo[i];
    }
    return MapOracle::linear(std::move(m));
  }
  if (source.kind == K::UniformBall && target.kind == K::UniformBall) {
    const double s = target.radius / source.radius;
    LinearMap m{s * Eigen::MatrixXd::Identity(dd, dd), to_eigen(target.center) - s * to_eigen(source.center)};
    return MapOracle::linear(std::move(m));
  }
  if (source.kind == K::Gaussian && target.kind == K::SphericalUniformGrid) {
    const bool standard = std::all_of(source.mean.begin(), source.mean.end(), [](double v) { return v == 0.0; }) &&
                          source.cov.isIdentity(0.0);
    if (standard) return MapOracle::gaussian_center_outward(d);
  }
  throw std::invalid_argument("select_oracle: no closed-form map from " + source.name() + " to " + target.name() +
                              "; supply an explicit oracle");
}

std::optional<PointCloud> default_range(const Family& target) {
  switch (target.kind) {
    case Family::Kind::Gaussian:
      return std::nullopt;
    case Family::Kind::UniformBox: {
      const std::size_t d = target.dim();
      PointCloud out(d);
      Vector p(d);
      for (std::size_t mask = 0; mask < (std::size_t{1} << d); ++mask) {
        for (std::size_t k = 0; k < d; ++k) p[k] = (mask >> k) & 1 ? target.hi[k] : target.lo[k];
        out.push_back(p);
      }
      return out;
    }
    case Family::Kind::UniformBall:
    case Family::Kind::SphericalUniformGrid:
      return ball_range(target.center, target.radius);
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Experiments

void ExperimentConfig::validate() const {
  auto bad = [](const std::string& m) { throw std::invalid_argument("ExperimentConfig: " + m); };
  if (dim < 1) bad("dimension must be positive");
  if (source.dim() != dim || target.dim() != dim) bad("source and target families must have dimension " + std::to_string(dim));
  if (sample_sizes.empty()) bad("sample_sizes is empty");
  for (std::size_t i = 0; i < sample_sizes.size(); ++i) {
    if (sample_sizes[i] < 2) bad("sample sizes must be at least 2");
    if (i > 0 && sample_sizes[i] <= sample_sizes[i - 1]) bad("sample sizes must be strictly increasing");
  }
  if (replications < 1) bad("replications must be at least 1");
  if (resolution < 1 || e_resolution < 1) bad("resolution must be at least 1");
  if (!(delta >= 0.0) || !std::isfinite(delta)) bad("delta must be finite and >= 0");
  if (!(r_max > 0.0)) bad("r_max must be positive");
  if (k.dim() != dim) bad("K has the wrong dimension");
  if (!k.bounded()) bad("K must be bounded");
  if (e && e->dim() != dim) bad("E has the wrong dimension");
  if (range && range->dim() != dim) bad("range has the wrong dimension");
  for (const auto& p : probes) {
    const auto* prod = std::get_if<ProductSet>(&p.set.shape);
    if (!prod || prod->first->dim() != dim || prod->second->dim() != dim) bad("probes must be products X x Y in R^d x R^d");
    if (!prod->first->bounded()) bad("probe X parts must be bounded");
    if (p.mode == FellMode::Miss && !p.set.bounded()) bad("miss probes must be bounded");
  }
  // K must sit inside the source support shrunk by one lattice cell.
  const double cell = lattice_cell(k, resolution);
  const PointCloud lattice = grid_points(k, resolution);
  for (std::size_t i = 0; i < lattice.size(); ++i) {
    const auto depth = interior_depth(source, lattice[i]);
    if (depth && *depth < cell * (1.0 - 1e-12))
      bad("K reaches within one lattice cell of the source support boundary");
  }
}

ExperimentRow run_replication(const ExperimentConfig& cfg, std::size_t n, std::size_t rep) {
  const auto start = std::chrono::steady_clock::now();
  Philox rng(stream_key(cfg.seed, n, rep));
  const PointCloud xs = sample_family(cfg.source, n, rng, cfg.seed);
  const PointCloud ys = sample_family(cfg.target, n, rng, cfg.seed);
  const MapOracle oracle = cfg.oracle ? *cfg.oracle : select_oracle(cfg.source, cfg.target);

  ExperimentRow row;
  row.n = n;
  row.rep = rep;
  const Coupling pi = solve_discrete_ot(DiscreteMeasure::uniform(xs), DiscreteMeasure::uniform(ys));
  row.transport_cost = pi.cost();
  const PairSet support = coupling_support(pi);
  const auto hint = support_potential_hint(pi);
  const MonotoneVerdict verdict = is_cyclically_monotone(support, cfg.monotone_tol, hint);
  if (!verdict.holds) {
    std::string cycle;
    for (auto i : verdict.cycle) cycle += (cycle.empty() ? "" : ",") + std::to_string(i);
    throw DomainError("optimal support failed certification (deficit " + fmt(verdict.deficit) + ", cycle [" + cycle + "])");
  }
  row.monotone_certified = true;
  const MaxAffinePotential psi = rockafellar_potential(support, 0, hint, cfg.monotone_tol);

  row.sup_error_K = local_uniform_sup(psi, oracle, cfg.k, cfg.resolution, cfg.eval_tol);
  row.hausdorff_K = image_hausdorff(psi, oracle, cfg.k, 0.0, cfg.resolution, cfg.eval_tol);
  row.hausdorff_K_delta = cfg.delta == 0.0 ? row.hausdorff_K
                                           : image_hausdorff(psi, oracle, cfg.k, cfg.delta, cfg.resolution, cfg.eval_tol);

  const std::optional<PointCloud> range = cfg.range ? cfg.range : default_range(cfg.target);
  if (range) row.range_contained = range_containment_check(psi, *range, cfg.range_tol);
  if (cfg.e) {
    row.global_sup_E = global_sup_on_receding_set(psi, oracle, *cfg.e, range ? *range : PointCloud(cfg.dim), cfg.r_max,
                                                  cfg.e_resolution, cfg.eval_tol, cfg.receding);
  }

  // Default probes around the lattice point of K nearest its centroid: the
  // graph must hit a cell-sized box around (x_c, T(x_c)) and miss a ball
  // placed beyond T(K).
  const PointCloud lattice = grid_points(cfg.k, cfg.resolution);
  Vector centroid(cfg.dim, 0.0);
  for (std::size_t i = 0; i < lattice.size(); ++i)
    for (std::size_t c = 0; c < cfg.dim; ++c) centroid[c] += lattice[i][c] / static_cast<double>(lattice.size());
  std::size_t center = 0;
  for (std::size_t i = 1; i < lattice.size(); ++i)
    if (distance(lattice[i], centroid) < distance(lattice[center], centroid)) center = i;
  const Vector xc = lattice.point(center), tc = oracle(xc);
  double spread = 0.0;
  for (std::size_t i = 0; i < lattice.size(); ++i) spread = std::max(spread, distance(oracle(lattice[i]), tc));
  const double cell = std::max(lattice_cell(cfg.k, cfg.resolution), 1e-3);

  std::vector<FellProbe> probes;
  probes.push_back({FellMode::Hit, SetDescriptor::product(SetDescriptor::ball(xc, cell), SetDescriptor::ball(tc, cell))});
  Vector far = tc;
  far[0] += 3.0 * (spread + 1.0);
  probes.push_back({FellMode::Miss, SetDescriptor::product(cfg.k, SetDescriptor::ball(far, spread + 1.0))});
  probes.insert(probes.end(), cfg.probes.begin(), cfg.probes.end());
  for (const auto& p : probes) row.fell_checks.push_back(fell_check(psi, p.set, p.mode, cfg.fell_tol, cfg.resolution));

  if (cfg.record_timing) row.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return row;
}

void aggregate(ExperimentReport& report) {
  report.medians.clear();
  std::vector<double> ns, sup, h0, hd, g;
  bool all_global = true;
  for (std::size_t n : report.config.sample_sizes) {
    MedianRow m;
    m.n = n;
    std::vector<double> a, b, c, e;
    for (const auto& r : report.rows) {
      if (r.n != n) continue;
      a.push_back(r.sup_error_K);
      b.push_back(r.hausdorff_K);
      c.push_back(r.hausdorff_K_delta);
      if (r.global_sup_E) e.push_back(*r.global_sup_E);
    }
    m.rows = a.size();
    if (m.rows == 0) continue;
    m.sup_error_K = median(a);
    m.hausdorff_K = median(b);
    m.hausdorff_K_delta = median(c);
    if (e.size() == a.size()) m.global_sup_E = median(e);
    else all_global = false;
    report.medians.push_back(m);
    ns.push_back(std::log(static_cast<double>(n)));
    sup.push_back(m.sup_error_K);
    h0.push_back(m.hausdorff_K);
    hd.push_back(m.hausdorff_K_delta);
    if (m.global_sup_E) g.push_back(*m.global_sup_E);
  }
  report.spearman_global_sup_E.reset();
  if (ns.size() < 2) {
    report.spearman_sup_error_K = report.spearman_hausdorff_K = report.spearman_hausdorff_K_delta = 0.0;
    return;
  }
  report.spearman_sup_error_K = spearman(ns, sup);
  report.spearman_hausdorff_K = spearman(ns, h0);
  report.spearman_hausdorff_K_delta = spearman(ns, hd);
  if (all_global && g.size() == ns.size()) report.spearman_global_sup_E = spearman(ns, g);
}

ExperimentReport run_consistency_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  const MapOracle oracle = cfg.oracle ? *cfg.oracle : select_oracle(cfg.source, cfg.target);
  if (cfg.e) {
    const std::optional<PointCloud> range = cfg.range ? cfg.range : default_range(cfg.target);
    check_receding_hypothesis(*cfg.e, range ? &*range : nullptr, cfg.receding);
  }

  ExperimentReport report;
  report.config = cfg;
  report.oracle = oracle.kind();

  struct Task {
    std::size_t n, rep;
  };
  std::vector<Task> tasks;
  for (std::size_t n : cfg.sample_sizes)
    for (std::size_t r = 0; r < cfg.replications; ++r) tasks.push_back({n, r});

  std::vector<std::optional<ExperimentRow>> rows(tasks.size());
  std::vector<std::string> errors(tasks.size());
  std::vector<std::exception_ptr> fatal(tasks.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t t = next++; t < tasks.size(); t = next++) {
      try {
        rows[t] = run_replication(cfg, tasks[t].n, tasks[t].rep);
      } catch (const DomainError& e) {
        errors[t] = "n=" + std::to_string(tasks[t].n) + " rep=" + std::to_string(tasks[t].rep) + ": " + e.what();
      } catch (...) {
        fatal[t] = std::current_exception();
      }
    }
  };
  const std::size_t threads = resolve_threads(cfg.threads, tasks.size());
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t i = 0; i < threads; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  for (const auto& f : fatal)
    if (f) std::rethrow_exception(f);
  for (std::size_t t = 0; t < tasks.size(); ++t) {
    if (rows[t]) report.rows.push_back(std::move(*rows[t]));
    if (!errors[t].empty()) report.failures.push_back(errors[t]);
  }
  aggregate(report);
  return report;
}

}  // namespace mtl
