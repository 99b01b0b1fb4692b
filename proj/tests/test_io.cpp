#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "mtl/io.hpp"
#include "support.hpp"

using namespace mtl;
using io::Json;
using mtl::testing::random_cloud;

namespace {

std::string temp_file(const std::string& name, const std::string& text) {
  const std::string path = ::testing::TempDir() + "mtl_io_" + name;
  std::ofstream(path) << text;
  return path;
}

ExperimentConfig small_config() {
  ExperimentConfig c;
  c.dim = 2;
  c.source = Family::gaussian({0.0, 0.0}, Eigen::MatrixXd::Identity(2, 2));
  c.target = Family::spherical_uniform_grid(2);
  c.sample_sizes = {16, 32};
  c.replications = 2;
  c.seed = 18446744073709551615ull;
  c.k = SetDescriptor::box({-1.0, -1.0}, {1.0, 1.0});
  c.delta = 0.1;
  c.resolution = 4;
  c.e = SetDescriptor::whole_space(2);
  c.e_resolution = 4;
  c.probes.push_back({FellMode::Hit, SetDescriptor::product(SetDescriptor::ball({0.0, 0.0}, 0.5),
                                                             SetDescriptor::ball({0.0, 0.0}, 0.5))});
  return c;
}

}  // namespace

TEST(Csv, HeaderCommentsAndBlankLines) {
  const auto t = io::parse_csv("x,y\n# note\n\n1, 2\n3,4.5e-1\n");
  EXPECT_EQ(t.columns, 2u);
  ASSERT_EQ(t.rows.size(), 2u);
  EXPECT_EQ(t.rows[1][1], 0.45);
}

TEST(Csv, MalformedRowNamesLine) {
  try {
    io::parse_csv("1,2\n3,abc\n", "pts.csv");
    FAIL();
  } catch (const io::InputError& e) {
    EXPECT_NE(std::string(e.what()).find("pts.csv:2"), std::string::npos) << e.what();
  }
  EXPECT_THROW(io::parse_csv("1,2\n3\n"), io::InputError);
  EXPECT_THROW(io::parse_csv("1,2\n3,\n"), io::InputError);
  EXPECT_THROW(io::parse_csv("# only comments\n"), io::InputError);
  EXPECT_THROW(io::parse_csv("1,nan\n"), io::InputError);
}

TEST(LoadPoints, KindFromColumnsAndDimension) {
  const auto three = temp_file("three.csv", "1,2,3\n4,5,6\n");
  EXPECT_TRUE(std::holds_alternative<PointCloud>(io::load_points(three, 3)));
  EXPECT_TRUE(std::holds_alternative<DiscreteMeasure>(io::load_points(temp_file("w.csv", "1,2,0.5\n4,5,0.5\n"), 2)));
  const auto two = temp_file("two.csv", "0,1\n1,0\n");
  const auto loaded = io::load_points(two, 1);
  ASSERT_TRUE(std::holds_alternative<PairSet>(loaded));
  EXPECT_EQ(std::get<PairSet>(loaded).size(), 2u);
  EXPECT_THROW(io::load_points(two, std::nullopt), io::InputError);
  EXPECT_THROW(io::load_points(three, 2), io::InputError);
  EXPECT_TRUE(std::holds_alternative<PointCloud>(io::load_points(temp_file("one.csv", "1\n2\n"), std::nullopt)));
  EXPECT_THROW(io::load_points(::testing::TempDir() + "does_not_exist.csv", 1), io::InputError);
}

TEST(LoadPoints, TypedLoaders) {
  const auto two = temp_file("typed.csv", "0,1\n1,0\n");
  EXPECT_EQ(io::load_cloud(two).dim(), 2u);
  EXPECT_EQ(io::load_pairs(two).dim(), 1u);
  EXPECT_TRUE(io::load_measure(two).is_uniform());
  const auto m = io::load_measure(temp_file("weighted.csv", "0,0.25\n1,0.75\n"), 1);
  EXPECT_EQ(m.dim(), 1u);
  EXPECT_DOUBLE_EQ(m.weights()[1], 0.75);
  EXPECT_THROW(io::load_measure(two, 1), io::InputError);
  EXPECT_THROW(io::load_measure(temp_file("dup.csv", "0\n0\n")), io::InputError);
}

TEST(LoadPoints, JsonDocuments) {
  const auto pts = temp_file("pts.json", R"({"points": [[0, 1], [2, 3]], "weights": [0.25, 0.75]})");
  const auto m = io::load_measure(pts);
  EXPECT_EQ(m.weights()[1], 0.75);
  EXPECT_EQ(io::load_cloud(pts).size(), 2u);
  const auto pairs = temp_file("pairs.json", R"({"x": [[0], [1]], "y": [[1], [0]]})");
  EXPECT_EQ(io::load_pairs(pairs).size(), 2u);
  EXPECT_THROW(io::load_cloud(pairs), io::InputError);
  EXPECT_EQ(io::load_cloud(temp_file("arr.json", "[[1, 2, 3]]")).dim(), 3u);
  EXPECT_THROW(io::load_cloud(temp_file("ragged.json", "[[1, 2], [3]]")), io::InputError);
  EXPECT_THROW(io::load_cloud(temp_file("broken.json", "[[1, 2]")), io::InputError);
}

TEST(Numbers, SeventeenDigitRoundTrip) {
  Philox rng(1);
  for (int i = 0; i < 1000; ++i) {
    const double x = std::ldexp(rng.uniform() - 0.5, static_cast<int>(rng() % 200) - 100);
    const Json j = Json::parse(io::dump(Json{{"v", x}}));
    EXPECT_EQ(io::json_double(j["v"]), x);
  }
  EXPECT_EQ(io::format_double(0.1), "0.10000000000000001");
  EXPECT_EQ(io::format_double(std::numeric_limits<double>::infinity()), "Infinity");
  EXPECT_TRUE(std::isinf(io::json_double(Json::parse(io::dump(Json{{"v", -std::numeric_limits<double>::infinity()}}))["v"])));
  EXPECT_TRUE(std::isnan(io::json_double(Json("NaN"))));
  EXPECT_THROW(io::json_double(Json("one")), io::InputError);
}

TEST(Dump, SortedKeysAndStable) {
  Json j;
  j["zeta"] = 1;
  j["alpha"] = {{"b", 2.5}, {"a", Json::array({1, 2})}};
  const std::string text = io::dump(j);
  EXPECT_LT(text.find("\"alpha\""), text.find("\"zeta\""));
  EXPECT_LT(text.find("\"a\""), text.find("\"b\""));
  EXPECT_EQ(text, io::dump(Json::parse(text)));
}

TEST(RoundTrip, SetDescriptors) {
  const std::vector<SetDescriptor> sets{
      SetDescriptor::ball({0.1, 0.2}, 0.3),
      SetDescriptor::box({-1.0}, {1.0}),
      SetDescriptor::ray({0.0, 0.0}, {0.6, 0.8}),
      SetDescriptor::cone({1.0, 1.0}, {{1.0, 0.0}, {0.0, 1.0}}),
      SetDescriptor::whole_space(3),
      SetDescriptor::finite(PointCloud{{0.5, 0.25}, {1.0 / 3.0, 2.0}}),
      SetDescriptor::product(SetDescriptor::box({0.0}, {1.0}), SetDescriptor::ball({2.0}, 0.5)),
      SetDescriptor::union_of({SetDescriptor::ball({0.0, 0.0}, 1.0), SetDescriptor::box({2.0, 2.0}, {3.0, 3.0})}),
      SetDescriptor::grid_of(SetDescriptor::box({0.0, 0.0}, {1.0, 1.0}), 5),
  };
  for (const auto& s : sets) {
    const Json j = Json::parse(io::dump(io::to_json(s)));
    const SetDescriptor back = io::set_from_json(j);
    EXPECT_EQ(back.kind(), s.kind());
    EXPECT_EQ(io::dump(io::to_json(back)), io::dump(io::to_json(s)));
  }
  EXPECT_THROW(io::set_from_json(Json::parse(R"({"type": "ball", "center": [0], "radius": 0})")), io::InputError);
  EXPECT_THROW(io::set_from_json(Json::parse(R"({"type": "blob"})")), io::InputError);
  EXPECT_THROW(io::set_from_json(Json::parse(R"({"type": "box", "lo": [0], "hi": [1], "extra": 1})")), io::InputError);
}

TEST(RoundTrip, FamiliesAndOracles) {
  Eigen::MatrixXd cov(2, 2);
  cov << 2.0, 0.3, 0.3, 1.0;
  for (const auto& f : {Family::gaussian({0.1, 0.2}, cov), Family::uniform_box({0.0}, {2.0}),
                        Family::uniform_ball({1.0, 2.0, 3.0}, 0.5), Family::spherical_uniform_grid(3)}) {
    EXPECT_TRUE(io::family_from_json(Json::parse(io::dump(io::to_json(f)))) == f);
  }
  LinearMap m{cov, Eigen::Vector2d(0.5, -0.25)};
  Philox rng(2);
  for (const auto& t : {MapOracle::identity(), MapOracle::linear(m), MapOracle::gaussian_center_outward(2),
                        MapOracle::tabulated(PointCloud{{0.0, 0.0}, {1.0, 1.0}}, PointCloud{{1.0, 0.0}, {0.0, 1.0}})}) {
    const MapOracle back = io::oracle_from_json(Json::parse(io::dump(io::to_json(t))));
    EXPECT_EQ(back.kind(), t.kind());
    for (int i = 0; i < 20; ++i) {
      const Vector x{rng.normal(), rng.normal()};
      EXPECT_EQ(back(x), t(x));
    }
  }
  const auto s = MapOracle::sorted_1d({0.0, 0.1, 1.0}, {0.0, 0.5, 2.0});
  EXPECT_EQ(io::oracle_from_json(io::to_json(s))(Vector{0.7}), s(Vector{0.7}));
}

TEST(RoundTrip, PotentialEvaluatesIdentically) {
  Philox rng(3);
  const auto xs = random_cloud(rng, 40, 3);
  const auto ys = random_cloud(rng, 40, 3);
  const auto pi = solve_discrete_ot(DiscreteMeasure::uniform(xs), DiscreteMeasure::uniform(ys));
  const auto psi = rockafellar_potential(coupling_support(pi), 5);
  const auto path = temp_file("potential.json", io::dump(io::to_json(psi)));
  const auto back = io::potential_from_json(io::read_json_file(path));
  EXPECT_EQ(back.base_index(), 5u);
  EXPECT_EQ(back.slopes().data(), psi.slopes().data());
  EXPECT_EQ(back.intercepts(), psi.intercepts());
  for (int i = 0; i < 100; ++i) {
    const Vector z{2 * rng.normal(), 2 * rng.normal(), 2 * rng.normal()};
    EXPECT_EQ(back.value(z), psi.value(z));
    EXPECT_EQ(eval_subdifferential(back, z).vertices.data(), eval_subdifferential(psi, z).vertices.data());
  }
  EXPECT_THROW(io::potential_from_json(Json::parse(R"({"slopes": [[1]], "intercepts": [0, 1]})")), io::InputError);
}

TEST(RoundTrip, ConfigAndRows) {
  const auto c = small_config();
  const Json j = Json::parse(io::dump(io::to_json(c)));
  const auto back = io::config_from_json(j);
  EXPECT_EQ(io::dump(io::to_json(back)), io::dump(io::to_json(c)));
  EXPECT_EQ(back.seed, c.seed);

  const auto report = run_consistency_experiment(c);
  const Json rj = Json::parse(io::dump(io::report_to_json(report)));
  ASSERT_EQ(rj["rows"].size(), report.rows.size());
  for (std::size_t i = 0; i < report.rows.size(); ++i) {
    const auto row = io::row_from_json(rj["rows"][i]);
    EXPECT_EQ(io::dump(io::to_json(row)), io::dump(io::to_json(report.rows[i])));
  }
  EXPECT_EQ(rj["header"]["rng"], "philox4x32-10");
  EXPECT_EQ(rj["header"]["seed"].get<std::uint64_t>(), c.seed);
}

TEST(Config, RejectsBadDocuments) {
  Json j = io::to_json(small_config());
  j["unexpected"] = 1;
  EXPECT_THROW(io::config_from_json(j), io::InputError);
  j = io::to_json(small_config());
  j.erase("K");
  EXPECT_THROW(io::config_from_json(j), io::InputError);
  j = io::to_json(small_config());
  j["sample_sizes"] = {32, 16};
  EXPECT_THROW(io::config_from_json(j), std::invalid_argument);
  j = io::to_json(small_config());
  j["probes"] = Json::array({{{"mode", "maybe"}, {"set", io::to_json(SetDescriptor::box({0.0}, {1.0}))}}});
  EXPECT_THROW(io::config_from_json(j), io::InputError);
}

TEST(ReportCsv, OneRowPerMetric) {
  auto c = small_config();
  c.record_timing = true;
  const auto report = run_consistency_experiment(c);
  const std::string csv = io::report_to_csv(report);
  std::istringstream in(csv);
  std::string line;
  std::getline(in, line);
  std::size_t lines = 0;
  while (std::getline(in, line)) {
    ++lines;
    EXPECT_EQ(std::count(line.begin(), line.end(), ','), 3) << line;
  }
  // transport_cost, sup, two hausdorff values, global sup, range, 3 fell checks, certified, wall time.
  EXPECT_EQ(lines, report.rows.size() * 11);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "n,rep,metric,value");
}
