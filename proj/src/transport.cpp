#include "mtl/transport.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>

#include "network_simplex.hpp"

namespace mtl {

namespace {

constexpr double kWeightSumTol = 1e-9;
constexpr double kDistinctTol = 1e-12;
// Reduced costs are compared on costs scaled to [0, 1].
constexpr double kReducedCostEps = 1e-11;

void check_distinct(const PointCloud& points) {
  // Sort by first coordinate so only a narrow window needs comparing.
  std::vector<std::size_t> order(points.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return points[a][0] < points[b][0] || (points[a][0] == points[b][0] && a < b);
  });
  for (std::size_t a = 0; a < order.size(); ++a) {
    for (std::size_t b = a + 1; b < order.size(); ++b) {
      if (points[order[b]][0] - points[order[a]][0] > kDistinctTol) break;
      if (distance(points[order[a]], points[order[b]]) <= kDistinctTol) {
        throw std::invalid_argument("DiscreteMeasure: duplicate support points " + std::to_string(order[a]) +
                                    " and " + std::to_string(order[b]));
      }
    }
  }
}

void require_same_dim(const DiscreteMeasure& p, const DiscreteMeasure& q, const char* what) {
  if (p.dim() != q.dim()) {
    throw std::invalid_argument(std::string(what) + ": dimension mismatch (" + std::to_string(p.dim()) + " vs " +
                                std::to_string(q.dim()) + ")");
  }
}

// Affine map matching the first two weighted moments of p onto q. Only used
// to pick candidate arcs, so any failure falls back to the identity.
struct MomentMatch {
  Eigen::MatrixXd a;
  Eigen::VectorXd from, to;
};

Eigen::VectorXd weighted_mean(const DiscreteMeasure& m) {
  Eigen::VectorXd mu = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(m.dim()));
  for (std::size_t i = 0; i < m.size(); ++i)
    for (std::size_t k = 0; k < m.dim(); ++k) mu(static_cast<Eigen::Index>(k)) += m.weights()[i] * m.points()[i][k];
  return mu;
}

Eigen::MatrixXd weighted_cov(const DiscreteMeasure& m, const Eigen::VectorXd& mu) {
  const auto d = static_cast<Eigen::Index>(m.dim());
  Eigen::MatrixXd s = Eigen::MatrixXd::Zero(d, d);
  Eigen::VectorXd v(d);
  for (std::size_t i = 0; i < m.size(); ++i) {
    for (Eigen::Index k = 0; k < d; ++k) v(k) = m.points()[i][static_cast<std::size_t>(k)] - mu(k);
    s += m.weights()[i] * v * v.transpose();
  }
  s += (1e-9 * (1.0 + s.trace())) * Eigen::MatrixXd::Identity(d, d);
  return s;
}

MomentMatch moment_match(const DiscreteMeasure& p, const DiscreteMeasure& q) {
  const auto d = static_cast<Eigen::Index>(p.dim());
  MomentMatch mm{Eigen::MatrixXd::Identity(d, d), weighted_mean(p), weighted_mean(q)};
  try {
    mm.a = gaussian_brenier(weighted_cov(p, mm.from), weighted_cov(q, mm.to)).matrix;
  } catch (const std::exception&) {
    mm.a = Eigen::MatrixXd::Identity(d, d);
  }
  return mm;
}

}  // namespace

DiscreteMeasure DiscreteMeasure::make(PointCloud points, std::vector<double> weights) {
  if (points.empty()) throw std::invalid_argument("DiscreteMeasure: empty support");
  if (points.size() != weights.size()) throw std::invalid_argument("DiscreteMeasure: points and weights differ in length");
  double total = 0.0;
  for (double w : weights) {
    if (!(w > 0.0) || !std::isfinite(w)) throw std::invalid_argument("DiscreteMeasure: weights must be positive");
    total += w;
  }
  if (std::abs(total - 1.0) > kWeightSumTol) {
    throw std::invalid_argument("DiscreteMeasure: weights sum to " + std::to_string(total) + ", expected 1");
  }
  for (double& w : weights) w /= total;
  check_distinct(points);
  DiscreteMeasure m;
  m.points_ = std::move(points);
  m.weights_ = std::move(weights);
  return m;
}

DiscreteMeasure DiscreteMeasure::uniform(PointCloud points) {
  const std::size_t n = points.size();
  if (n == 0) throw std::invalid_argument("DiscreteMeasure: empty support");
  check_distinct(points);
  DiscreteMeasure m;
  m.points_ = std::move(points);
  m.weights_.assign(n, 1.0 / static_cast<double>(n));
  return m;
}

DiscreteMeasure DiscreteMeasure::unchecked(PointCloud points, std::vector<double> weights) {
  DiscreteMeasure m;
  m.points_ = std::move(points);
  m.weights_ = std::move(weights);
  return m;
}

bool DiscreteMeasure::is_uniform() const {
  const double w0 = 1.0 / static_cast<double>(weights_.size());
  return std::all_of(weights_.begin(), weights_.end(), [w0](double w) { return std::abs(w - w0) <= 1e-15; });
}

double Coupling::cost() const {
  double total = 0.0;
  for (const auto& e : plan) total += e.mass * squared_distance(source.points()[e.i], target.points()[e.j]);
  return total;
}

Vector LinearMap::apply(std::span<const double> x) const {
  if (static_cast<std::size_t>(matrix.cols()) != x.size()) throw std::invalid_argument("LinearMap: dimension mismatch");
  Vector y(static_cast<std::size_t>(matrix.rows()), 0.0);
  for (Eigen::Index r = 0; r < matrix.rows(); ++r) {
    double s = shift.size() ? shift(r) : 0.0;
    for (Eigen::Index c = 0; c < matrix.cols(); ++c) s += matrix(r, c) * x[static_cast<std::size_t>(c)];
    y[static_cast<std::size_t>(r)] = s;
  }
  return y;
}

// ---------------------------------------------------------------------------

Coupling solve_discrete_ot(const DiscreteMeasure& p, const DiscreteMeasure& q, const SolverOptions& options) {
  require_same_dim(p, q, "solve_discrete_ot");
  const std::size_t n = p.size(), m = q.size();
  if (n == 0 || m == 0) throw std::invalid_argument("solve_discrete_ot: empty measure");
  const PointCloud& xs = p.points();
  const PointCloud& ys = q.points();

  double max_cost = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) max_cost = std::max(max_cost, squared_distance(xs[i], ys[j]));
  const double scale = max_cost > 0.0 ? max_cost : 1.0;
  auto scaled_cost = [&](std::size_t i, std::size_t j) { return squared_distance(xs[i], ys[j]) / scale; };

  // Uniform measures get integral supplies so flows stay exact.
  std::vector<double> supply, demand;
  double flow_unit = 1.0;
  if (p.is_uniform() && q.is_uniform()) {
    const std::size_t g = std::gcd(n, m);
    supply.assign(n, static_cast<double>(m / g));
    demand.assign(m, static_cast<double>(n / g));
    flow_unit = static_cast<double>(n) * static_cast<double>(m / g);
  } else {
    supply = p.weights();
    demand = q.weights();
  }

  const double artificial = static_cast<double>(n + m + 1);
  detail::TransportSimplex simplex(supply, demand, artificial, kReducedCostEps);

  if (n * m <= options.dense_arc_limit) {
    simplex.reserve_arcs(n * m);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < m; ++j) simplex.add_arc(i, j, scaled_cost(i, j));
    simplex.solve();
  } else {
    // Lazy pricing: seed each source with its nearest targets, then repeatedly
    // add the most negative reduced-cost arcs until none remain.
    const std::size_t seed = std::min(options.initial_neighbours, m);
    const std::size_t per_round = std::max<std::size_t>(1, options.arcs_per_round);
    std::vector<std::pair<double, std::size_t>> row(std::max(n, m));
    const MomentMatch mm = moment_match(p, q);
    const std::size_t d = p.dim();
    PointCloud mapped(d);
    {
      Eigen::VectorXd x(static_cast<Eigen::Index>(d));
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t k = 0; k < d; ++k) x(static_cast<Eigen::Index>(k)) = xs[i][k] - mm.from(static_cast<Eigen::Index>(k));
        const Eigen::VectorXd z = mm.a * x + mm.to;
        mapped.push_back(std::span<const double>(z.data(), d));
      }
    }
    // Candidate arcs: nearest mapped sources for every target and nearest
    // targets for every mapped source.
    std::vector<std::vector<std::size_t>> chosen(n);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < m; ++j) row[j] = {squared_distance(mapped[i], ys[j]), j};
      std::partial_sort(row.begin(), row.begin() + static_cast<long>(seed), row.begin() + static_cast<long>(m));
      for (std::size_t k = 0; k < seed; ++k) chosen[i].push_back(row[k].second);
    }
    const std::size_t seed_back = std::min(options.initial_neighbours, n);
    for (std::size_t j = 0; j < m; ++j) {
      for (std::size_t i = 0; i < n; ++i) row[i] = {squared_distance(mapped[i], ys[j]), i};
      std::partial_sort(row.begin(), row.begin() + static_cast<long>(seed_back), row.begin() + static_cast<long>(n));
      for (std::size_t k = 0; k < seed_back; ++k) chosen[row[k].second].push_back(j);
    }
    for (std::size_t i = 0; i < n; ++i) {
      std::sort(chosen[i].begin(), chosen[i].end());
      chosen[i].erase(std::unique(chosen[i].begin(), chosen[i].end()), chosen[i].end());
      for (std::size_t j : chosen[i]) simplex.add_arc(i, j, scaled_cost(i, j));
    }
    for (;;) {
      simplex.solve();
      std::size_t added = 0;
      for (std::size_t i = 0; i < n; ++i) {
        const double pi_i = simplex.source_potential(i);
        std::size_t found = 0;
        for (std::size_t j = 0; j < m; ++j) {
          const double c = scaled_cost(i, j);
          const double rc = c + pi_i - simplex.sink_potential(j);
          if (rc < -kReducedCostEps) row[found++] = {rc, j};
        }
        const std::size_t take = std::min(found, per_round);
        std::partial_sort(row.begin(), row.begin() + static_cast<long>(take), row.begin() + static_cast<long>(found));
        for (std::size_t k = 0; k < take; ++k) simplex.add_arc(i, row[k].second, scaled_cost(i, row[k].second));
        added += take;
      }
      if (added == 0) break;
    }
  }

  const double total_flow = std::accumulate(supply.begin(), supply.end(), 0.0);
  if (simplex.max_artificial_flow() > 1e-9 * total_flow) {
    throw std::logic_error("solve_discrete_ot: artificial flow left in optimal basis");
  }

  Coupling out{p, q, {}, {}, {}};
  for (std::size_t k = 0; k < simplex.arc_count(); ++k) {
    const double f = simplex.arc_flow(k);
    if (f > 0.0) out.plan.push_back({simplex.arc_source(k), simplex.arc_sink(k), f / flow_unit});
  }
  std::sort(out.plan.begin(), out.plan.end(),
            [](const PlanEntry& a, const PlanEntry& b) { return a.i < b.i || (a.i == b.i && a.j < b.j); });

  // Duals u_i = -pi_i, v_j = pi_j in original cost units, shifted so u_0 = 0.
  const auto pi = simplex.exact_potentials();
  const long double shift = -pi[0];
  out.source_dual.resize(n);
  out.target_dual.resize(m);
  for (std::size_t i = 0; i < n; ++i) out.source_dual[i] = static_cast<double>((-pi[i] - shift) * scale);
  for (std::size_t j = 0; j < m; ++j) out.target_dual[j] = static_cast<double>((pi[n + j] + shift) * scale);
  return out;
}

Coupling brute_force_ot(const DiscreteMeasure& p, const DiscreteMeasure& q) {
  require_same_dim(p, q, "brute_force_ot");
  const std::size_t n = p.size();
  if (q.size() != n) throw std::invalid_argument("brute_force_ot: measures must have equal size");
  if (n > 8) throw std::invalid_argument("brute_force_ot: at most 8 points supported");
  if (!p.is_uniform() || !q.is_uniform()) throw std::invalid_argument("brute_force_ot: uniform weights required");

  std::vector<std::size_t> perm(n), best;
  std::iota(perm.begin(), perm.end(), 0);
  double best_cost = std::numeric_limits<double>::infinity();
  do {
    double c = 0.0;
    for (std::size_t i = 0; i < n; ++i) c += squared_distance(p.points()[i], q.points()[perm[i]]);
    if (c < best_cost) {
      best_cost = c;
      best = perm;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));

  Coupling out{p, q, {}, {}, {}};
  for (std::size_t i = 0; i < n; ++i) out.plan.push_back({i, best[i], 1.0 / static_cast<double>(n)});
  return out;
}

Coupling sorted_1d_ot(const DiscreteMeasure& p, const DiscreteMeasure& q) {
  if (p.dim() != 1 || q.dim() != 1) throw std::invalid_argument("sorted_1d_ot: measures must be one-dimensional");
  auto sorted = [](const DiscreteMeasure& m) {
    std::vector<std::size_t> order(m.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return m.points()[a][0] < m.points()[b][0]; });
    return order;
  };
  const auto po = sorted(p), qo = sorted(q);
  Coupling out{p, q, {}, {}, {}};
  std::size_t a = 0, b = 0;
  double ra = p.weights()[po[0]], rb = q.weights()[qo[0]];
  while (a < po.size() && b < qo.size()) {
    const double mass = std::min(ra, rb);
    if (mass > 0.0) out.plan.push_back({po[a], qo[b], mass});
    ra -= mass;
    rb -= mass;
    // Close whichever side is exhausted; at the end both are, up to rounding.
    const bool close_a = ra <= 1e-15 || b + 1 == qo.size();
    const bool close_b = rb <= 1e-15 || a + 1 == po.size();
    if (close_a && ++a < po.size()) ra = p.weights()[po[a]];
    if (close_b && ++b < qo.size()) rb = q.weights()[qo[b]];
  }
  std::sort(out.plan.begin(), out.plan.end(),
            [](const PlanEntry& x, const PlanEntry& y) { return x.i < y.i || (x.i == y.i && x.j < y.j); });
  return out;
}

PairSet coupling_support(const Coupling& pi, double floor) {
  const auto& ws = pi.source.weights();
  const auto& wt = pi.target.weights();
  const double threshold = floor * std::min(*std::min_element(ws.begin(), ws.end()), *std::min_element(wt.begin(), wt.end()));
  PairSet out;
  for (const auto& e : pi.plan)
    if (e.mass > threshold) out.add(pi.source.points()[e.i], pi.target.points()[e.j]);
  return out;
}

std::vector<double> support_potential_hint(const Coupling& pi, double floor) {
  if (pi.source_dual.size() != pi.source.size()) return {};
  const auto& ws = pi.source.weights();
  const auto& wt = pi.target.weights();
  const double threshold = floor * std::min(*std::min_element(ws.begin(), ws.end()), *std::min_element(wt.begin(), wt.end()));
  std::vector<double> out;
  for (const auto& e : pi.plan) {
    if (e.mass <= threshold) continue;
    const auto x = pi.source.points()[e.i];
    out.push_back(0.5 * (dot(x, x) - pi.source_dual[e.i]));
  }
  return out;
}

std::pair<DiscreteMeasure, DiscreteMeasure> margins_of(const Coupling& pi) {
  std::vector<double> rows(pi.source.size(), 0.0), cols(pi.target.size(), 0.0);
  for (const auto& e : pi.plan) {
    rows.at(e.i) += e.mass;
    cols.at(e.j) += e.mass;
  }
  return {DiscreteMeasure::unchecked(pi.source.points(), std::move(rows)),
          DiscreteMeasure::unchecked(pi.target.points(), std::move(cols))};
}

double margin_error(const Coupling& pi) {
  const auto [rows, cols] = margins_of(pi);
  double worst = 0.0;
  for (std::size_t i = 0; i < rows.size(); ++i) worst = std::max(worst, std::abs(rows.weights()[i] - pi.source.weights()[i]));
  for (std::size_t j = 0; j < cols.size(); ++j) worst = std::max(worst, std::abs(cols.weights()[j] - pi.target.weights()[j]));
  for (const auto& e : pi.plan)
    if (e.mass < 0.0) worst = std::max(worst, -e.mass);
  return worst;
}

// ---------------------------------------------------------------------------

namespace {

Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> spd_eigen(const Eigen::MatrixXd& s, const char* name) {
  if (s.rows() != s.cols() || s.rows() == 0) throw std::invalid_argument(std::string(name) + ": not a square matrix");
  if (!s.allFinite()) throw std::invalid_argument(std::string(name) + ": non-finite entries");
  if ((s - s.transpose()).norm() > 1e-10 * (1.0 + s.norm()))
    throw std::invalid_argument(std::string(name) + ": not symmetric");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (s + s.transpose()));
  if (es.info() != Eigen::Success || es.eigenvalues().minCoeff() <= 0.0)
    throw std::invalid_argument(std::string(name) + ": not positive definite");
  return es;
}

Eigen::MatrixXd matrix_power(const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>& es, double power) {
  const Eigen::VectorXd lambda = es.eigenvalues().cwiseMax(1e-12).array().pow(power).matrix();
  return es.eigenvectors() * lambda.asDiagonal() * es.eigenvectors().transpose();
}

}  // namespace

LinearMap gaussian_brenier(const Eigen::MatrixXd& s1, const Eigen::MatrixXd& s2) {
  const auto e1 = spd_eigen(s1, "gaussian_brenier: first covariance");
  spd_eigen(s2, "gaussian_brenier: second covariance");
  if (s1.rows() != s2.rows()) throw std::invalid_argument("gaussian_brenier: dimension mismatch");
  const Eigen::MatrixXd root = matrix_power(e1, 0.5);
  const Eigen::MatrixXd inv_root = matrix_power(e1, -0.5);
  const Eigen::MatrixXd middle = root * s2 * root;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> em(0.5 * (middle + middle.transpose()));
  Eigen::MatrixXd a = inv_root * matrix_power(em, 0.5) * inv_root;
  a = 0.5 * (a + a.transpose());
  return {a, Eigen::VectorXd::Zero(a.rows())};
}

}  // namespace mtl
