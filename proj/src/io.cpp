#include "mtl/io.hpp"

#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include "mtl/random.hpp"

namespace mtl::io {

namespace {

[[noreturn]] void fail(const std::string& where, const std::string& what) { throw InputError(where + ": " + what); }

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

bool parse_number(const std::string& field, double& out) {
  const std::string t = trim(field);
  if (t.empty()) return false;
  char* end = nullptr;
  errno = 0;
  out = std::strtod(t.c_str(), &end);
  return end == t.c_str() + t.size() && errno != ERANGE;
}

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(path, "cannot open file");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

const Json& field(const Json& j, const char* key, const std::string& where) {
  if (!j.is_object()) fail(where, "expected an object");
  const auto it = j.find(key);
  if (it == j.end()) fail(where, std::string("missing key '") + key + "'");
  return *it;
}

void only_keys(const Json& j, std::initializer_list<const char*> keys, const std::string& where) {
  if (!j.is_object()) fail(where, "expected an object");
  const std::set<std::string> allowed(keys.begin(), keys.end());
  for (const auto& [k, v] : j.items())
    if (!allowed.count(k)) fail(where, "unknown key '" + k + "'");
}

double num(const Json& j, const std::string& where) {
  try {
    return json_double(j);
  } catch (const std::exception&) {
    fail(where, "expected a number");
  }
}

std::size_t count(const Json& j, const std::string& where) {
  if (!j.is_number_unsigned() && !(j.is_number_integer() && j.get<long long>() >= 0))
    fail(where, "expected a non-negative integer");
  return j.get<std::size_t>();
}

Vector vec(const Json& j, const std::string& where) {
  if (!j.is_array()) fail(where, "expected an array of numbers");
  Vector v;
  v.reserve(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) v.push_back(num(j[i], where + "[" + std::to_string(i) + "]"));
  return v;
}

Json vec_json(std::span<const double> v) {
  Json a = Json::array();
  for (double x : v) a.push_back(x);
  return a;
}

Eigen::MatrixXd matrix(const Json& j, const std::string& where) {
  if (!j.is_array() || j.empty()) fail(where, "expected a non-empty array of rows");
  const auto rows = static_cast<Eigen::Index>(j.size());
  Eigen::MatrixXd m;
  for (Eigen::Index r = 0; r < rows; ++r) {
    const Vector row = vec(j[static_cast<std::size_t>(r)], where + "[" + std::to_string(r) + "]");
    if (r == 0) m.resize(rows, static_cast<Eigen::Index>(row.size()));
    if (static_cast<Eigen::Index>(row.size()) != m.cols()) fail(where, "ragged matrix");
    for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = row[static_cast<std::size_t>(c)];
  }
  return m;
}

Json matrix_json(const Eigen::MatrixXd& m) {
  Json a = Json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    Json row = Json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    a.push_back(row);
  }
  return a;
}

PointCloud cloud_at(const Json& j, const std::string& where, std::size_t dim = 0) {
  try {
    return cloud_from_json(j, dim);
  } catch (const InputError& e) {
    fail(where, e.what());
  }
}

template <class F>
auto wrap(const std::string& where, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const InputError&) {
    throw;
  } catch (const std::invalid_argument& e) {
    fail(where, e.what());
  }
}

void dump_rec(const Json& j, int indent, std::string& out) {
  const std::string pad(static_cast<std::size_t>(indent) * 2, ' ');
  const std::string inner(static_cast<std::size_t>(indent + 1) * 2, ' ');
  switch (j.type()) {
    case Json::value_t::object: {
      if (j.empty()) {
        out += "{}";
        return;
      }
      out += "{\n";
      bool first = true;
      for (const auto& [k, v] : j.items()) {
        if (!first) out += ",\n";
        first = false;
        out += inner + Json(k).dump() + ": ";
        dump_rec(v, indent + 1, out);
      }
      out += "\n" + pad + "}";
      return;
    }
    case Json::value_t::array: {
      if (j.empty()) {
        out += "[]";
        return;
      }
      const bool flat = std::all_of(j.begin(), j.end(), [](const Json& e) { return e.is_primitive(); });
      if (flat) {
        out += "[";
        for (std::size_t i = 0; i < j.size(); ++i) {
          if (i) out += ", ";
          dump_rec(j[i], indent + 1, out);
        }
        out += "]";
        return;
      }
      out += "[\n";
      for (std::size_t i = 0; i < j.size(); ++i) {
        if (i) out += ",\n";
        out += inner;
        dump_rec(j[i], indent + 1, out);
      }
      out += "\n" + pad + "]";
      return;
    }
    case Json::value_t::number_float: {
      const double v = j.get<double>();
      out += std::isfinite(v) ? format_double(v) : "\"" + format_double(v) + "\"";
      return;
    }
    default:
      out += j.dump();
  }
}

Json optional_double(const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); }

}  // namespace

// ---------------------------------------------------------------------------
// CSV

Table parse_csv(const std::string& text, const std::string& name) {
  Table t;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  bool seen_data = false, seen_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string s = trim(line);
    if (s.empty() || s[0] == '#') continue;
    std::vector<std::string> fields;
    std::stringstream ls(s);
    std::string f;
    while (std::getline(ls, f, ',')) fields.push_back(f);
    if (!s.empty() && s.back() == ',') fields.emplace_back();
    std::vector<double> row(fields.size());
    bool numeric = true;
    std::size_t bad = 0;
    for (std::size_t k = 0; k < fields.size() && numeric; ++k) {
      numeric = parse_number(fields[k], row[k]);
      if (!numeric) bad = k;
    }
    if (!numeric) {
      if (!seen_data && !seen_header) {
        seen_header = true;
        continue;
      }
      fail(name + ":" + std::to_string(line_no),
           "malformed row (column " + std::to_string(bad + 1) + " is not a number: '" + trim(fields[bad]) + "')");
    }
    for (double v : row)
      if (!std::isfinite(v)) fail(name + ":" + std::to_string(line_no), "non-finite value");
    if (!seen_data) t.columns = row.size();
    else if (row.size() != t.columns)
      fail(name + ":" + std::to_string(line_no), "malformed row (expected " + std::to_string(t.columns) + " columns, got " +
                                                     std::to_string(row.size()) + ")");
    seen_data = true;
    t.rows.push_back(std::move(row));
  }
  if (!seen_data) fail(name, "no data rows");
  return t;
}

Table read_csv(const std::string& path) { return parse_csv(read_file(path), path); }

namespace {

enum class Want { Any, Cloud, Pairs, Measure };

Loaded from_table(const Table& t, std::optional<std::size_t> dim, Want want, const std::string& path) {
  const std::size_t c = t.columns;
  auto cloud = [&](std::size_t from, std::size_t d) {
    PointCloud out(d);
    out.reserve(t.rows.size());
    for (const auto& r : t.rows) out.push_back(std::span<const double>(r.data() + from, d));
    return out;
  };
  auto as_pairs = [&](std::size_t d) -> Loaded { return PairSet(cloud(0, d), cloud(d, d)); };
  auto as_measure = [&](std::size_t d) -> Loaded {
    std::vector<double> w;
    for (const auto& r : t.rows) w.push_back(r[d]);
    return wrap(path, [&] { return DiscreteMeasure::make(cloud(0, d), w); });
  };
  auto as_uniform = [&](std::size_t d) -> Loaded { return wrap(path, [&] { return DiscreteMeasure::uniform(cloud(0, d)); }); };

  if (dim) {
    const std::size_t d = *dim;
    if (d == 0) fail(path, "dimension must be positive");
    switch (want) {
      case Want::Cloud:
        if (c == d) return cloud(0, d);
        break;
      case Want::Pairs:
        if (c == 2 * d) return as_pairs(d);
        break;
      case Want::Measure:
        if (c == d) return as_uniform(d);
        if (c == d + 1) return as_measure(d);
        break;
      case Want::Any:
        if (c == d) return cloud(0, d);
        if (c == 2 * d) return as_pairs(d);
        if (c == d + 1) return as_measure(d);
        break;
    }
    fail(path, std::to_string(c) + " columns do not fit dimension " + std::to_string(d));
  }
  switch (want) {
    case Want::Cloud:
      return cloud(0, c);
    case Want::Pairs:
      if (c % 2) fail(path, "pair files need an even number of columns");
      return as_pairs(c / 2);
    case Want::Measure:
      return as_uniform(c);
    case Want::Any:
      if (c == 1) return cloud(0, 1);
      fail(path, std::to_string(c) + " columns are ambiguous (point, pair or weighted row); pass --dim");
  }
  fail(path, "unreachable");
}

Loaded from_json_doc(const Json& j, std::optional<std::size_t> dim, Want want, const std::string& path) {
  if (j.is_array()) {
    const PointCloud c = cloud_at(j, path, dim.value_or(0));
    if (want == Want::Pairs) fail(path, "expected {\"x\": ..., \"y\": ...}");
    if (want == Want::Measure) return wrap(path, [&] { return DiscreteMeasure::uniform(c); });
    return c;
  }
  if (j.is_object() && j.contains("x")) {
    only_keys(j, {"x", "y"}, path);
    const PointCloud x = cloud_at(field(j, "x", path), path + ".x", dim.value_or(0));
    const PointCloud y = cloud_at(field(j, "y", path), path + ".y", x.dim());
    if (want == Want::Cloud || want == Want::Measure) fail(path, "expected points, found pairs");
    return wrap(path, [&] { return PairSet(x, y); });
  }
  if (j.is_object() && j.contains("points")) {
    only_keys(j, {"points", "weights"}, path);
    const PointCloud c = cloud_at(j["points"], path + ".points", dim.value_or(0));
    if (want == Want::Pairs) fail(path, "expected pairs, found points");
    if (j.contains("weights")) {
      if (want == Want::Cloud) return c;
      const Vector w = vec(j["weights"], path + ".weights");
      return wrap(path, [&] { return DiscreteMeasure::make(c, w); });
    }
    if (want == Want::Measure) return wrap(path, [&] { return DiscreteMeasure::uniform(c); });
    return c;
  }
  fail(path, "unrecognised point document");
}

Loaded load(const std::string& path, std::optional<std::size_t> dim, Want want) {
  if (ends_with(path, ".json")) return from_json_doc(read_json_file(path), dim, want, path);
  return from_table(read_csv(path), dim, want, path);
}

}  // namespace

Loaded load_points(const std::string& path, std::optional<std::size_t> dim_hint) { return load(path, dim_hint, Want::Any); }

PointCloud load_cloud(const std::string& path, std::optional<std::size_t> dim_hint) {
  return std::get<PointCloud>(load(path, dim_hint, Want::Cloud));
}

PairSet load_pairs(const std::string& path, std::optional<std::size_t> dim_hint) {
  return std::get<PairSet>(load(path, dim_hint, Want::Pairs));
}

DiscreteMeasure load_measure(const std::string& path, std::optional<std::size_t> dim_hint) {
  return std::get<DiscreteMeasure>(load(path, dim_hint, Want::Measure));
}

Json read_json_file(const std::string& path) {
  const std::string text = read_file(path);
  try {
    return Json::parse(text);
  } catch (const Json::parse_error& e) {
    fail(path, std::string("invalid JSON: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// Numbers and output

std::string format_double(double v) {
  if (std::isnan(v)) return "NaN";
  if (std::isinf(v)) return v > 0 ? "Infinity" : "-Infinity";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double json_double(const Json& j) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "Infinity") return std::numeric_limits<double>::infinity();
    if (s == "-Infinity") return -std::numeric_limits<double>::infinity();
    if (s == "NaN") return std::numeric_limits<double>::quiet_NaN();
  }
  throw InputError("expected a number");
}

std::string dump(const Json& j) {
  std::string out;
  dump_rec(j, 0, out);
  out += "\n";
  return out;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error(path + ": cannot open for writing");
  out << text;
  if (!out) throw std::runtime_error(path + ": write failed");
}

// ---------------------------------------------------------------------------
// JSON conversions

Json to_json(const PointCloud& c) {
  Json a = Json::array();
  for (std::size_t i = 0; i < c.size(); ++i) a.push_back(vec_json(c[i]));
  return a;
}

PointCloud cloud_from_json(const Json& j, std::size_t dim) {
  if (!j.is_array()) throw InputError("expected an array of points");
  if (j.empty()) {
    if (dim == 0) throw InputError("empty point array without a dimension");
    return PointCloud(dim);
  }
  PointCloud out;
  for (std::size_t i = 0; i < j.size(); ++i) {
    const Vector p = vec(j[i], "point " + std::to_string(i));
    if (i == 0) {
      if (p.empty()) throw InputError("points must have at least one coordinate");
      if (dim && p.size() != dim)
        throw InputError("point 0 has " + std::to_string(p.size()) + " coordinates, expected " + std::to_string(dim));
      out = PointCloud(p.size());
    }
    if (p.size() != out.dim()) throw InputError("point " + std::to_string(i) + " has the wrong dimension");
    out.push_back(p);
  }
  return out;
}

Json to_json(const SetDescriptor& s) {
  return std::visit(
      [&](const auto& v) -> Json {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, BallSet>) {
          return {{"type", "ball"}, {"center", vec_json(v.center)}, {"radius", v.radius}};
        } else if constexpr (std::is_same_v<T, BoxSet>) {
          return {{"type", "box"}, {"lo", vec_json(v.lo)}, {"hi", vec_json(v.hi)}};
        } else if constexpr (std::is_same_v<T, RaySet>) {
          return {{"type", "ray"}, {"origin", vec_json(v.origin)}, {"direction", vec_json(v.direction)}};
        } else if constexpr (std::is_same_v<T, ConeSet>) {
          if (v.full) return {{"type", "whole_space"}, {"apex", vec_json(v.apex)}};
          Json dirs = Json::array();
          for (const auto& d : v.directions) dirs.push_back(vec_json(d));
          return {{"type", "cone"}, {"apex", vec_json(v.apex)}, {"directions", dirs}};
        } else if constexpr (std::is_same_v<T, FiniteSet>) {
          return {{"type", "finite"}, {"points", to_json(v.points)}};
        } else if constexpr (std::is_same_v<T, ProductSet>) {
          return {{"type", "product"}, {"first", to_json(*v.first)}, {"second", to_json(*v.second)}};
        } else if constexpr (std::is_same_v<T, UnionSet>) {
          Json parts = Json::array();
          for (const auto& p : v.parts) parts.push_back(to_json(p));
          return {{"type", "union"}, {"parts", parts}};
        } else {
          return {{"type", "grid"}, {"base", to_json(*v.base)}, {"resolution", v.resolution}};
        }
      },
      s.shape);
}

SetDescriptor set_from_json(const Json& j) {
  const std::string where = "set";
  const auto& type = field(j, "type", where);
  if (!type.is_string()) fail(where, "'type' must be a string");
  const std::string t = type.get<std::string>();
  return wrap(where + " '" + t + "'", [&]() -> SetDescriptor {
    if (t == "ball") {
      only_keys(j, {"type", "center", "radius"}, where);
      return SetDescriptor::ball(vec(field(j, "center", where), "center"), num(field(j, "radius", where), "radius"));
    }
    if (t == "box") {
      only_keys(j, {"type", "lo", "hi"}, where);
      return SetDescriptor::box(vec(field(j, "lo", where), "lo"), vec(field(j, "hi", where), "hi"));
    }
    if (t == "ray") {
      only_keys(j, {"type", "origin", "direction"}, where);
      return SetDescriptor::ray(vec(field(j, "origin", where), "origin"), vec(field(j, "direction", where), "direction"));
    }
    if (t == "cone") {
      only_keys(j, {"type", "apex", "directions"}, where);
      std::vector<Vector> dirs;
      for (const auto& d : field(j, "directions", where)) dirs.push_back(vec(d, "directions"));
      return SetDescriptor::cone(vec(field(j, "apex", where), "apex"), std::move(dirs));
    }
    if (t == "whole_space") {
      only_keys(j, {"type", "dim", "apex"}, where);
      if (j.contains("apex")) {
        SetDescriptor s = SetDescriptor::whole_space(0);
        std::get<ConeSet>(s.shape).apex = vec(j["apex"], "apex");
        return s;
      }
      return SetDescriptor::whole_space(count(field(j, "dim", where), "dim"));
    }
    if (t == "finite") {
      only_keys(j, {"type", "points"}, where);
      return SetDescriptor::finite(cloud_at(field(j, "points", where), "points"));
    }
    if (t == "product") {
      only_keys(j, {"type", "first", "second"}, where);
      return SetDescriptor::product(set_from_json(field(j, "first", where)), set_from_json(field(j, "second", where)));
    }
    if (t == "union") {
      only_keys(j, {"type", "parts"}, where);
      std::vector<SetDescriptor> parts;
      for (const auto& p : field(j, "parts", where)) parts.push_back(set_from_json(p));
      return SetDescriptor::union_of(std::move(parts));
    }
    if (t == "grid") {
      only_keys(j, {"type", "base", "resolution"}, where);
      return SetDescriptor::grid_of(set_from_json(field(j, "base", where)),
                                    static_cast<int>(count(field(j, "resolution", where), "resolution")));
    }
    fail(where, "unknown type '" + t + "'");
  });
}

Json to_json(const Family& f) {
  switch (f.kind) {
    case Family::Kind::Gaussian:
      return {{"type", "gaussian"}, {"mean", vec_json(f.mean)}, {"cov", matrix_json(f.cov)}};
    case Family::Kind::UniformBox:
      return {{"type", "uniform_box"}, {"lo", vec_json(f.lo)}, {"hi", vec_json(f.hi)}};
    case Family::Kind::UniformBall:
      return {{"type", "uniform_ball"}, {"center", vec_json(f.center)}, {"radius", f.radius}};
    case Family::Kind::SphericalUniformGrid:
      return {{"type", "spherical_uniform_grid"}, {"dim", f.dim()}};
  }
  return nullptr;
}

Family family_from_json(const Json& j) {
  const std::string where = "family";
  const auto& type = field(j, "type", where);
  if (!type.is_string()) fail(where, "'type' must be a string");
  const std::string t = type.get<std::string>();
  return wrap(where + " '" + t + "'", [&]() -> Family {
    if (t == "gaussian") {
      only_keys(j, {"type", "mean", "cov"}, where);
      return Family::gaussian(vec(field(j, "mean", where), "mean"), matrix(field(j, "cov", where), "cov"));
    }
    if (t == "uniform_box") {
      only_keys(j, {"type", "lo", "hi"}, where);
      return Family::uniform_box(vec(field(j, "lo", where), "lo"), vec(field(j, "hi", where), "hi"));
    }
    if (t == "uniform_ball") {
      only_keys(j, {"type", "center", "radius"}, where);
      return Family::uniform_ball(vec(field(j, "center", where), "center"), num(field(j, "radius", where), "radius"));
    }
    if (t == "spherical_uniform_grid") {
      only_keys(j, {"type", "dim"}, where);
      return Family::spherical_uniform_grid(count(field(j, "dim", where), "dim"));
    }
    fail(where, "unknown family '" + t + "'");
  });
}

Json to_json(const MapOracle& t) {
  return std::visit(
      [](const auto& o) -> Json {
        using T = std::decay_t<decltype(o)>;
        if constexpr (std::is_same_v<T, IdentityOracle>) {
          return {{"type", "identity"}};
        } else if constexpr (std::is_same_v<T, LinearOracle>) {
          return {{"type", "linear"},
                  {"matrix", matrix_json(o.map.matrix)},
                  {"shift", vec_json(std::span<const double>(o.map.shift.data(), static_cast<std::size_t>(o.map.shift.size())))}};
        } else if constexpr (std::is_same_v<T, Sorted1DOracle>) {
          return {{"type", "sorted_1d"}, {"source_knots", vec_json(o.source_knots)}, {"target_knots", vec_json(o.target_knots)}};
        } else if constexpr (std::is_same_v<T, TabulatedOracle>) {
          return {{"type", "tabulated"}, {"sites", to_json(o.sites)}, {"values", to_json(o.values)}};
        } else {
          return {{"type", "gaussian_center_outward"}, {"dim", o.dim}};
        }
      },
      t.variant());
}

MapOracle oracle_from_json(const Json& j) {
  const std::string where = "oracle";
  const auto& type = field(j, "type", where);
  if (!type.is_string()) fail(where, "'type' must be a string");
  const std::string t = type.get<std::string>();
  return wrap(where + " '" + t + "'", [&]() -> MapOracle {
    if (t == "identity") {
      only_keys(j, {"type"}, where);
      return MapOracle::identity();
    }
    if (t == "linear") {
      only_keys(j, {"type", "matrix", "shift"}, where);
      LinearMap m;
      m.matrix = matrix(field(j, "matrix", where), "matrix");
      const Vector s = j.contains("shift") ? vec(j["shift"], "shift") : Vector(static_cast<std::size_t>(m.matrix.rows()), 0.0);
      if (static_cast<Eigen::Index>(s.size()) != m.matrix.rows()) fail(where, "shift length must match the matrix");
      m.shift = Eigen::Map<const Eigen::VectorXd>(s.data(), static_cast<Eigen::Index>(s.size()));
      return MapOracle::linear(std::move(m));
    }
    if (t == "sorted_1d") {
      only_keys(j, {"type", "source_knots", "target_knots"}, where);
      return MapOracle::sorted_1d(vec(field(j, "source_knots", where), "source_knots"),
                                  vec(field(j, "target_knots", where), "target_knots"));
    }
    if (t == "tabulated") {
      only_keys(j, {"type", "sites", "values"}, where);
      return MapOracle::tabulated(cloud_at(field(j, "sites", where), "sites"), cloud_at(field(j, "values", where), "values"));
    }
    if (t == "gaussian_center_outward") {
      only_keys(j, {"type", "dim"}, where);
      return MapOracle::gaussian_center_outward(count(field(j, "dim", where), "dim"));
    }
    fail(where, "unknown oracle '" + t + "'");
  });
}

Json to_json(const MaxAffinePotential& psi) {
  return {{"slopes", to_json(psi.slopes())}, {"intercepts", vec_json(psi.intercepts())}, {"base_index", psi.base_index()}};
}

MaxAffinePotential potential_from_json(const Json& j) {
  const std::string where = "potential";
  only_keys(j, {"slopes", "intercepts", "base_index"}, where);
  const PointCloud slopes = cloud_at(field(j, "slopes", where), where + ".slopes");
  const Vector c = vec(field(j, "intercepts", where), where + ".intercepts");
  const std::size_t base = j.contains("base_index") ? count(j["base_index"], where + ".base_index") : 0;
  if (c.size() != slopes.size()) fail(where, "slopes and intercepts differ in length");
  if (base >= slopes.size()) fail(where, "base_index out of range");
  return MaxAffinePotential(slopes, c, base);
}

Json to_json(const ExperimentConfig& cfg) {
  Json j;
  j["dim"] = cfg.dim;
  j["source"] = to_json(cfg.source);
  j["target"] = to_json(cfg.target);
  j["sample_sizes"] = cfg.sample_sizes;
  j["replications"] = cfg.replications;
  j["seed"] = cfg.seed;
  j["K"] = to_json(cfg.k);
  j["delta"] = cfg.delta;
  j["resolution"] = cfg.resolution;
  if (cfg.e) j["E"] = to_json(*cfg.e);
  j["r_max"] = cfg.r_max;
  j["e_resolution"] = cfg.e_resolution;
  if (cfg.range) j["range"] = to_json(*cfg.range);
  if (cfg.oracle) j["oracle"] = to_json(*cfg.oracle);
  Json probes = Json::array();
  for (const auto& p : cfg.probes) probes.push_back({{"mode", p.mode == FellMode::Miss ? "miss" : "hit"}, {"set", to_json(p.set)}});
  j["probes"] = probes;
  j["receding"] = {{"probe_directions", cfg.receding.probe_directions}, {"convexity_tol", cfg.receding.convexity_tol}};
  j["tolerances"] = {{"monotone", cfg.monotone_tol}, {"eval", cfg.eval_tol}, {"range", cfg.range_tol}, {"fell", cfg.fell_tol}};
  j["threads"] = cfg.threads;
  j["record_timing"] = cfg.record_timing;
  return j;
}

ExperimentConfig config_from_json(const Json& j) {
  const std::string where = "config";
  only_keys(j,
            {"dim", "source", "target", "sample_sizes", "replications", "seed", "K", "delta", "resolution", "E", "r_max",
             "e_resolution", "range", "oracle", "probes", "receding", "tolerances", "threads", "record_timing"},
            where);
  ExperimentConfig c;
  c.source = family_from_json(field(j, "source", where));
  c.target = family_from_json(field(j, "target", where));
  c.dim = j.contains("dim") ? count(j["dim"], "config.dim") : c.source.dim();
  const auto& sizes = field(j, "sample_sizes", where);
  if (!sizes.is_array()) fail("config.sample_sizes", "expected an array");
  for (const auto& s : sizes) c.sample_sizes.push_back(count(s, "config.sample_sizes"));
  if (j.contains("replications")) c.replications = count(j["replications"], "config.replications");
  if (j.contains("seed")) {
    if (!j["seed"].is_number_unsigned() && !j["seed"].is_number_integer()) fail("config.seed", "expected an integer");
    c.seed = j["seed"].get<std::uint64_t>();
  }
  c.k = set_from_json(field(j, "K", where));
  if (j.contains("delta")) c.delta = num(j["delta"], "config.delta");
  if (j.contains("resolution")) c.resolution = static_cast<int>(count(j["resolution"], "config.resolution"));
  if (j.contains("E")) c.e = set_from_json(j["E"]);
  if (j.contains("r_max")) c.r_max = num(j["r_max"], "config.r_max");
  if (j.contains("e_resolution")) c.e_resolution = static_cast<int>(count(j["e_resolution"], "config.e_resolution"));
  if (j.contains("range")) c.range = cloud_at(j["range"], "config.range");
  if (j.contains("oracle")) c.oracle = oracle_from_json(j["oracle"]);
  if (j.contains("probes")) {
    if (!j["probes"].is_array()) fail("config.probes", "expected an array");
    for (const auto& p : j["probes"]) {
      only_keys(p, {"mode", "set"}, "config.probes");
      const auto& mode = field(p, "mode", "config.probes");
      if (mode != "miss" && mode != "hit") fail("config.probes", "mode must be 'miss' or 'hit'");
      c.probes.push_back({mode == "miss" ? FellMode::Miss : FellMode::Hit, set_from_json(field(p, "set", "config.probes"))});
    }
  }
  if (j.contains("receding")) {
    const auto& r = j["receding"];
    only_keys(r, {"probe_directions", "convexity_tol"}, "config.receding");
    if (r.contains("probe_directions")) c.receding.probe_directions = count(r["probe_directions"], "config.receding");
    if (r.contains("convexity_tol")) c.receding.convexity_tol = num(r["convexity_tol"], "config.receding");
  }
  if (j.contains("tolerances")) {
    const auto& t = j["tolerances"];
    only_keys(t, {"monotone", "eval", "range", "fell"}, "config.tolerances");
    if (t.contains("monotone")) c.monotone_tol = num(t["monotone"], "config.tolerances.monotone");
    if (t.contains("eval")) c.eval_tol = num(t["eval"], "config.tolerances.eval");
    if (t.contains("range")) c.range_tol = num(t["range"], "config.tolerances.range");
    if (t.contains("fell")) c.fell_tol = num(t["fell"], "config.tolerances.fell");
  }
  if (j.contains("threads")) c.threads = count(j["threads"], "config.threads");
  if (j.contains("record_timing")) {
    if (!j["record_timing"].is_boolean()) fail("config.record_timing", "expected a boolean");
    c.record_timing = j["record_timing"].get<bool>();
  }
  wrap(where, [&] {
    c.validate();
    return 0;
  });
  return c;
}

Json to_json(const ExperimentRow& r) {
  Json j;
  j["n"] = r.n;
  j["rep"] = r.rep;
  j["transport_cost"] = r.transport_cost;
  j["sup_error_K"] = r.sup_error_K;
  j["hausdorff_K"] = r.hausdorff_K;
  j["hausdorff_K_delta"] = r.hausdorff_K_delta;
  j["global_sup_E"] = optional_double(r.global_sup_E);
  j["range_contained"] = r.range_contained ? Json(*r.range_contained) : Json(nullptr);
  j["fell_checks"] = Json::array();
  for (bool b : r.fell_checks) j["fell_checks"].push_back(b);
  j["monotone_certified"] = r.monotone_certified;
  if (r.wall_time) j["wall_time"] = *r.wall_time;
  return j;
}

ExperimentRow row_from_json(const Json& j) {
  const std::string where = "row";
  ExperimentRow r;
  r.n = count(field(j, "n", where), "row.n");
  r.rep = count(field(j, "rep", where), "row.rep");
  r.transport_cost = num(field(j, "transport_cost", where), "row.transport_cost");
  r.sup_error_K = num(field(j, "sup_error_K", where), "row.sup_error_K");
  r.hausdorff_K = num(field(j, "hausdorff_K", where), "row.hausdorff_K");
  r.hausdorff_K_delta = num(field(j, "hausdorff_K_delta", where), "row.hausdorff_K_delta");
  if (j.contains("global_sup_E") && !j["global_sup_E"].is_null()) r.global_sup_E = num(j["global_sup_E"], "row.global_sup_E");
  if (j.contains("range_contained") && !j["range_contained"].is_null()) r.range_contained = j["range_contained"].get<bool>();
  for (const auto& b : field(j, "fell_checks", where)) r.fell_checks.push_back(b.get<bool>());
  r.monotone_certified = field(j, "monotone_certified", where).get<bool>();
  if (j.contains("wall_time")) r.wall_time = num(j["wall_time"], "row.wall_time");
  return r;
}

Json to_json(const MonotoneVerdict& v) {
  return {{"holds", v.holds}, {"cycle", v.cycle}, {"deficit", v.deficit}};
}

Json to_json(const Coupling& pi) {
  Json plan = Json::array();
  for (const auto& e : pi.plan) {
    plan.push_back({{"i", e.i},
                    {"j", e.j},
                    {"mass", e.mass},
                    {"x", vec_json(pi.source.points()[e.i])},
                    {"y", vec_json(pi.target.points()[e.j])}});
  }
  Json j;
  j["cost"] = pi.cost();
  j["plan"] = plan;
  j["source_dual"] = pi.source_dual;
  j["target_dual"] = pi.target_dual;
  j["margin_error"] = margin_error(pi);
  return j;
}

Json to_json(const RankAssignment& r) {
  const auto& g = r.grid;
  Json rows = Json::array();
  for (std::size_t i = 0; i < r.assignment.size(); ++i) {
    const std::size_t k = r.assignment[i];
    Json row{{"sample_index", i},
             {"grid_index", k},
             {"sample", vec_json(r.sample[i])},
             {"grid", vec_json(g.points[k])},
             {"ring", g.ring[k]}};
    if (g.dim == 2 && g.ring[k] > 0) row["angle"] = grid_angle(g, k);
    else row["direction"] = vec_json(g.directions[k]);
    rows.push_back(row);
  }
  Json j;
  j["grid"] = {{"n_r", g.n_r}, {"n_s", g.n_s}, {"n_0", g.n_0}, {"dim", g.dim}, {"seed", g.seed}};
  if (g.n_0 > 1) j["grid"]["origin_jitter"] = 1e-9;
  j["cost"] = r.cost();
  j["assignment"] = rows;
  return j;
}

Json report_to_json(const ExperimentReport& report) {
  Json j;
  j["header"] = {{"tool", "mtl"},
                 {"version", kVersion},
                 {"command", "converge"},
                 {"rng", Philox::name},
                 {"seed", report.config.seed},
                 {"oracle", report.oracle},
                 {"config", to_json(report.config)}};
  j["rows"] = Json::array();
  for (const auto& r : report.rows) j["rows"].push_back(to_json(r));
  j["medians"] = Json::array();
  for (const auto& m : report.medians) {
    j["medians"].push_back({{"n", m.n},
                            {"rows", m.rows},
                            {"sup_error_K", m.sup_error_K},
                            {"hausdorff_K", m.hausdorff_K},
                            {"hausdorff_K_delta", m.hausdorff_K_delta},
                            {"global_sup_E", optional_double(m.global_sup_E)}});
  }
  j["trend"] = {{"spearman_sup_error_K", report.spearman_sup_error_K},
                {"spearman_hausdorff_K", report.spearman_hausdorff_K},
                {"spearman_hausdorff_K_delta", report.spearman_hausdorff_K_delta},
                {"spearman_global_sup_E", optional_double(report.spearman_global_sup_E)}};
  j["failures"] = report.failures;
  return j;
}

std::string report_to_csv(const ExperimentReport& report) {
  std::string out = "n,rep,metric,value\n";
  for (const auto& r : report.rows) {
    const std::string prefix = std::to_string(r.n) + "," + std::to_string(r.rep) + ",";
    auto line = [&](const std::string& metric, double v) { out += prefix + metric + "," + format_double(v) + "\n"; };
    line("transport_cost", r.transport_cost);
    line("sup_error_K", r.sup_error_K);
    line("hausdorff_K", r.hausdorff_K);
    line("hausdorff_K_delta", r.hausdorff_K_delta);
    if (r.global_sup_E) line("global_sup_E", *r.global_sup_E);
    if (r.range_contained) line("range_contained", *r.range_contained ? 1.0 : 0.0);
    for (std::size_t k = 0; k < r.fell_checks.size(); ++k) line("fell_check_" + std::to_string(k), r.fell_checks[k] ? 1.0 : 0.0);
    line("monotone_certified", r.monotone_certified ? 1.0 : 0.0);
    if (r.wall_time) line("wall_time", *r.wall_time);
  }
  return out;
}

}  // namespace mtl::io
