#include <cstdio>
#include <ctime>
#include <functional>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "mtl/convergence.hpp"
#include "mtl/io.hpp"
#include "mtl/monotone.hpp"
#include "mtl/ranks.hpp"
#include "mtl/transport.hpp"

using namespace mtl;
using io::Json;

namespace {

constexpr int kOk = 0, kDomain = 1, kUsage = 2;

struct Result {
  Json body;
  int code = kOk;
  std::string csv;  // optional side output for converge
};

struct Common {
  std::string command;
  std::string out;
  bool timestamp = false;
  std::optional<std::uint64_t> seed;
};

Json header(const Common& c) {
  Json h{{"tool", "mtl"}, {"version", io::kVersion}, {"command", c.command}};
  if (c.seed) h["seed"] = *c.seed;
  if (c.timestamp) {
    char buf[32];
    const std::time_t now = std::time(nullptr);
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
    h["timestamp"] = buf;
  }
  return h;
}

void emit(const Common& c, Json body, const std::string& path) {
  if (!body.contains("header")) body["header"] = header(c);
  const std::string text = io::dump(body);
  if (path.empty() || path == "-") std::fwrite(text.data(), 1, text.size(), stdout);
  else io::write_text(path, text);
}

std::optional<std::size_t> dim_of(int d) { return d > 0 ? std::optional<std::size_t>(d) : std::nullopt; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Exact discrete optimal transport, cyclically monotone maps and consistency diagnostics", "mtl"};
  app.require_subcommand(1);
  app.set_version_flag("--version", io::kVersion);

  Common common;
  std::function<Result()> run;
  int dim = 0;
  double tol = 1e-9;

  auto add_common = [&](CLI::App* sub, bool with_dim) {
    sub->add_option("--out,-o", common.out, "Output file (default: stdout)");
    sub->add_flag("--timestamp", common.timestamp, "Add a UTC timestamp to the header");
    if (with_dim) sub->add_option("--dim", dim, "Point dimension")->check(CLI::PositiveNumber);
  };

  // check-monotone
  std::string pairs_path;
  auto* check = app.add_subcommand("check-monotone", "Certify cyclical monotonicity of a pair set (CSV x,y or JSON)");
  check->add_option("pairs", pairs_path, "Pair file")->required()->check(CLI::ExistingFile);
  check->add_option("--tol", tol, "Tolerance");
  add_common(check, true);
  check->callback([&] {
    run = [&] {
      const PairSet s = io::load_pairs(pairs_path, dim_of(dim));
      const auto verdict = is_cyclically_monotone(s, tol);
      const auto pairwise = is_monotone(s, tol);
      Json body{{"pairs", s.size()}, {"dim", s.dim()}, {"verdict", io::to_json(verdict)}, {"pairwise", io::to_json(pairwise)}};
      return Result{body, verdict.holds ? kOk : kDomain, {}};
    };
  });

  // solve-ot
  std::string p_path, q_path;
  auto* solve = app.add_subcommand("solve-ot", "Exact optimal coupling of two discrete measures (d or d+1 columns)");
  solve->add_option("source", p_path, "Source points")->required()->check(CLI::ExistingFile);
  solve->add_option("target", q_path, "Target points")->required()->check(CLI::ExistingFile);
  add_common(solve, true);
  solve->callback([&] {
    run = [&] {
      const auto p = io::load_measure(p_path, dim_of(dim));
      const auto q = io::load_measure(q_path, dim_of(dim));
      const Coupling pi = solve_discrete_ot(p, q);
      const auto verdict = is_cyclically_monotone(coupling_support(pi), tol, support_potential_hint(pi));
      Json body{{"coupling", io::to_json(pi)}, {"support_certified", verdict.holds}};
      return Result{body, verdict.holds ? kOk : kDomain, {}};
    };
  });

  // potential
  std::size_t base = 0;
  auto* pot = app.add_subcommand("potential", "Rockafellar potential of a cyclically monotone pair set");
  pot->add_option("pairs", pairs_path, "Pair file")->required()->check(CLI::ExistingFile);
  pot->add_option("--base", base, "Base pair index");
  pot->add_option("--tol", tol, "Tolerance");
  add_common(pot, true);
  pot->callback([&] {
    run = [&] {
      const PairSet s = io::load_pairs(pairs_path, dim_of(dim));
      if (base >= s.size()) throw std::invalid_argument("--base " + std::to_string(base) + " is out of range");
      const auto psi = rockafellar_potential(s, base, {}, tol);
      return Result{Json{{"potential", io::to_json(psi)}}, kOk, {}};
    };
  });

  // eval-map
  std::string potential_path, queries_path;
  auto* eval = app.add_subcommand("eval-map", "Evaluate psi and the vertices of its subdifferential at query points");
  eval->add_option("--potential", potential_path, "Potential JSON written by 'potential'")->required()->check(CLI::ExistingFile);
  eval->add_option("queries", queries_path, "Query points")->required()->check(CLI::ExistingFile);
  eval->add_option("--tol", tol, "Active-piece tolerance");
  add_common(eval, true);
  eval->callback([&] {
    run = [&] {
      const Json doc = io::read_json_file(potential_path);
      const auto psi = io::potential_from_json(doc.contains("potential") ? doc["potential"] : doc);
      const PointCloud qs = io::load_cloud(queries_path, dim ? dim_of(dim) : std::optional<std::size_t>(psi.dim()));
      if (qs.dim() != psi.dim()) throw std::invalid_argument("query dimension does not match the potential");
      Json rows = Json::array();
      for (std::size_t i = 0; i < qs.size(); ++i) {
        const auto v = eval_subdifferential(psi, qs[i], tol);
        rows.push_back({{"x", io::to_json(PointCloud{qs.point(i)})[0]}, {"value", psi.value(qs[i])}, {"vertices", io::to_json(v.vertices)}});
      }
      return Result{Json{{"evaluations", rows}}, kOk, {}};
    };
  });

  // hausdorff
  std::string a_path, b_path;
  auto* haus = app.add_subcommand("hausdorff", "Hausdorff distance between two point sets");
  haus->add_option("a", a_path, "First point set")->required()->check(CLI::ExistingFile);
  haus->add_option("b", b_path, "Second point set")->required()->check(CLI::ExistingFile);
  add_common(haus, true);
  haus->callback([&] {
    run = [&] {
      const auto a = io::load_cloud(a_path, dim_of(dim));
      const auto b = io::load_cloud(b_path, dim_of(dim));
      if (a.dim() != b.dim()) throw std::invalid_argument("point sets differ in dimension");
      return Result{Json{{"distance", hausdorff_distance(a, b)}}, kOk, {}};
    };
  });

  // ranks
  std::string sample_path;
  std::size_t n_r = 0, n_s = 0, n_0 = 0;
  std::uint64_t seed = 0;
  auto* ranks = app.add_subcommand("ranks", "Center-outward ranks of a sample against the spherical-uniform grid");
  ranks->add_option("--sample", sample_path, "Sample points")->required()->check(CLI::ExistingFile);
  ranks->add_option("--nr", n_r, "Number of rings")->required();
  ranks->add_option("--ns", n_s, "Points per ring")->required();
  ranks->add_option("--n0", n_0, "Origin copies");
  ranks->add_option("--seed", seed, "Seed for d >= 3 directions");
  add_common(ranks, true);
  ranks->callback([&] {
    common.seed = seed;
    run = [&] {
      const auto sample = io::load_cloud(sample_path, dim_of(dim));
      const auto grid = center_outward_grid(n_r, n_s, n_0, sample.dim(), seed);
      const auto r = center_outward_ranks(sample, grid);
      const auto verdict = is_cyclically_monotone(coupling_support(r.coupling), tol, support_potential_hint(r.coupling));
      Json body = io::to_json(r);
      body["support_certified"] = verdict.holds;
      return Result{body, verdict.holds ? kOk : kDomain, {}};
    };
  });

  // converge
  std::string config_path, csv_path;
  bool timing = false;
  std::size_t threads = 0;
  auto* conv = app.add_subcommand("converge", "Seeded consistency experiment from a JSON config");
  conv->add_option("--config", config_path, "Experiment config JSON")->required()->check(CLI::ExistingFile);
  conv->add_option("--csv", csv_path, "Also write one CSV row per (n, rep, metric)");
  conv->add_flag("--timing", timing, "Record per-replication wall time (reports are then not byte-stable)");
  conv->add_option("--threads", threads, "Worker threads (0: auto, capped by MTL_THREADS)");
  add_common(conv, false);
  conv->callback([&] {
    run = [&] {
      ExperimentConfig cfg = io::config_from_json(io::read_json_file(config_path));
      if (timing) cfg.record_timing = true;
      if (threads) cfg.threads = threads;
      common.seed = cfg.seed;
      const auto report = run_consistency_experiment(cfg);
      Json body = io::report_to_json(report);
      if (common.timestamp) body["header"]["timestamp"] = header(common)["timestamp"];
      return Result{body, report.failures.empty() ? kOk : kDomain, csv_path.empty() ? "" : io::report_to_csv(report)};
    };
  });

  // gen-grid
  std::size_t grid_dim = 2;
  std::string format = "csv";
  auto* gen = app.add_subcommand("gen-grid", "Write the spherical-uniform grid");
  gen->add_option("--nr", n_r, "Number of rings")->required();
  gen->add_option("--ns", n_s, "Points per ring")->required();
  gen->add_option("--n0", n_0, "Origin copies");
  gen->add_option("--dim", grid_dim, "Dimension (>= 2)");
  gen->add_option("--seed", seed, "Seed for d >= 3 directions");
  gen->add_option("--format", format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
  gen->add_option("--out,-o", common.out, "Output file (default: stdout)");
  gen->add_flag("--timestamp", common.timestamp, "Add a UTC timestamp to the JSON header");
  gen->callback([&] {
    common.seed = seed;
    run = [&] {
      const auto g = center_outward_grid(n_r, n_s, n_0, grid_dim, seed);
      Result r;
      if (format == "json") {
        r.body = Json{{"points", io::to_json(g.points)}, {"ring", g.ring}};
        return r;
      }
      std::string text;
      for (std::size_t k = 0; k < g.dim; ++k) text += (k ? ",x" : "x") + std::to_string(k + 1);
      text += "\n";
      for (std::size_t i = 0; i < g.size(); ++i) {
        for (std::size_t k = 0; k < g.dim; ++k) text += (k ? "," : "") + io::format_double(g.points[i][k]);
        text += "\n";
      }
      r.csv = text;
      r.body = nullptr;
      return r;
    };
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kUsage;
  }
  for (auto* sub : app.get_subcommands()) common.command = sub->get_name();

  try {
    Result r = run();
    if (r.body.is_null()) {
      // CSV-only output (gen-grid).
      if (common.out.empty() || common.out == "-") std::fwrite(r.csv.data(), 1, r.csv.size(), stdout);
      else io::write_text(common.out, r.csv);
      return kOk;
    }
    emit(common, r.body, common.out);
    if (!csv_path.empty() && !r.csv.empty()) io::write_text(csv_path, r.csv);
    return r.code;
  } catch (const NotCyclicallyMonotone& e) {
    emit(common, Json{{"error", {{"kind", "domain"}, {"message", e.what()}}}, {"verdict", io::to_json(e.verdict())}}, "");
    return kDomain;
  } catch (const DomainError& e) {
    Json err{{"kind", "domain"}, {"message", e.what()}};
    if (const auto* h = dynamic_cast<const HypothesisViolated*>(&e)) err["direction"] = h->direction();
    emit(common, Json{{"error", err}}, "");
    return kDomain;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "mtl %s: %s\n", common.command.c_str(), e.what());
    return kUsage;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "mtl %s: internal error: %s\n", common.command.c_str(), e.what());
    return kDomain;
  }
}
