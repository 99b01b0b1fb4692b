#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"
#include "mtl/convergence.hpp"
#include "mtl/geometry.hpp"
#include "mtl/monotone.hpp"
#include "mtl/ranks.hpp"
#include "mtl/transport.hpp"

namespace mtl::io {

using Json = nlohmann::json;

inline constexpr const char* kVersion = "0.1.0";

/// Malformed or unreadable input; the message names the file and line.
class InputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// ---------------------------------------------------------------------------
// Point files
//
// CSV: one point per line, comma separated; blank lines and lines starting
// with '#' are skipped, and a first line that is not numeric is a header.
// A row has d columns (point), 2d (pair x, y) or d + 1 (point, weight).
// JSON: {"points": [[...]], "weights": [...]} or {"x": [[...]], "y": [[...]]}.

struct Table {
  std::size_t columns = 0;
  std::vector<std::vector<double>> rows;
};

Table read_csv(const std::string& path);
Table parse_csv(const std::string& text, const std::string& name = "<input>");

using Loaded = std::variant<PointCloud, PairSet, DiscreteMeasure>;

/// Column count decides the kind given the dimension; without a hint only
/// single-column files are unambiguous.
Loaded load_points(const std::string& path, std::optional<std::size_t> dim_hint);

PointCloud load_cloud(const std::string& path, std::optional<std::size_t> dim_hint = std::nullopt);
PairSet load_pairs(const std::string& path, std::optional<std::size_t> dim_hint = std::nullopt);
/// Uniform weights for d columns, explicit weights for d + 1.
DiscreteMeasure load_measure(const std::string& path, std::optional<std::size_t> dim_hint = std::nullopt);

// ---------------------------------------------------------------------------
// JSON conversions

Json to_json(const PointCloud& c);
PointCloud cloud_from_json(const Json& j, std::size_t dim = 0);
Json to_json(const SetDescriptor& s);
SetDescriptor set_from_json(const Json& j);
Json to_json(const Family& f);
Family family_from_json(const Json& j);
Json to_json(const MapOracle& t);
MapOracle oracle_from_json(const Json& j);
Json to_json(const MaxAffinePotential& psi);
MaxAffinePotential potential_from_json(const Json& j);
Json to_json(const ExperimentConfig& cfg);
ExperimentConfig config_from_json(const Json& j);
Json to_json(const ExperimentRow& row);
ExperimentRow row_from_json(const Json& j);
Json to_json(const MonotoneVerdict& v);
Json to_json(const Coupling& pi);
Json to_json(const RankAssignment& r);

/// Report document: {"header": {...}, "rows": [...], "medians": [...], ...}.
Json report_to_json(const ExperimentReport& report);
/// One line per (n, rep, metric): n,rep,metric,value.
std::string report_to_csv(const ExperimentReport& report);

Json read_json_file(const std::string& path);

// ---------------------------------------------------------------------------
// Output

/// Number formatting shared by every writer: %.17g, integers exact,
/// non-finite values as the strings "Infinity", "-Infinity", "NaN".
std::string format_double(double v);
/// Inverse of format_double for JSON values (numbers or the three strings).
double json_double(const Json& j);

/// Deterministic JSON text: sorted keys, 17 significant digits, two-space indent.
std::string dump(const Json& j);

void write_text(const std::string& path, const std::string& text);

}  // namespace mtl::io
