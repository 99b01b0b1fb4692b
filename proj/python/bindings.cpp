#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "mtl/convergence.hpp"
#include "mtl/io.hpp"
#include "mtl/monotone.hpp"
#include "mtl/ranks.hpp"
#include "mtl/transport.hpp"

namespace py = pybind11;
using namespace mtl;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

// Accepts (n,) as n points in one dimension, or (n, d).
PointCloud to_cloud(const Array& a) {
  if (a.ndim() != 1 && a.ndim() != 2) throw std::invalid_argument("expected a 1-D or 2-D array of points");
  const std::size_t n = a.shape(0);
  const std::size_t d = a.ndim() == 2 ? a.shape(1) : 1;
  PointCloud c(d);
  c.reserve(n);
  const double* p = a.data();
  for (std::size_t i = 0; i < n; ++i) c.push_back(std::span<const double>(p + i * d, d));
  return c;
}

py::array_t<double> to_array(const PointCloud& c) {
  py::array_t<double> out({c.size(), c.dim()});
  auto m = out.mutable_unchecked<2>();
  for (std::size_t i = 0; i < c.size(); ++i)
    for (std::size_t k = 0; k < c.dim(); ++k) m(i, k) = c[i][k];
  return out;
}

DiscreteMeasure to_measure(const Array& points, const std::optional<std::vector<double>>& weights) {
  return weights ? DiscreteMeasure::make(to_cloud(points), *weights) : DiscreteMeasure::uniform(to_cloud(points));
}

py::dict coupling_dict(const Coupling& pi) {
  std::vector<std::tuple<std::size_t, std::size_t, double>> plan;
  for (const auto& e : pi.plan) plan.emplace_back(e.i, e.j, e.mass);
  py::dict d;
  d["cost"] = pi.cost();
  d["plan"] = plan;
  d["source_dual"] = pi.source_dual;
  d["target_dual"] = pi.target_dual;
  return d;
}

py::dict verdict_dict(const MonotoneVerdict& v) {
  py::dict d;
  d["holds"] = v.holds;
  d["cycle"] = v.cycle;
  d["deficit"] = v.deficit;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.attr("__version__") = io::kVersion;

  py::register_exception<DomainError>(m, "DomainError", PyExc_ArithmeticError);

  m.def(
      "solve_ot",
      [](const Array& x, const Array& y, std::optional<std::vector<double>> wx, std::optional<std::vector<double>> wy) {
        return coupling_dict(solve_discrete_ot(to_measure(x, wx), to_measure(y, wy)));
      },
      py::arg("x"), py::arg("y"), py::arg("x_weights") = py::none(), py::arg("y_weights") = py::none(),
      "Exact squared-Euclidean optimal coupling between two discrete measures.");
  m.def(
      "brute_force_ot",
      [](const Array& x, const Array& y) {
        return coupling_dict(brute_force_ot(DiscreteMeasure::uniform(to_cloud(x)), DiscreteMeasure::uniform(to_cloud(y))));
      },
      py::arg("x"), py::arg("y"));
  m.def(
      "is_cyclically_monotone",
      [](const Array& x, const Array& y, double tol) {
        return verdict_dict(is_cyclically_monotone(PairSet(to_cloud(x), to_cloud(y)), tol));
      },
      py::arg("x"), py::arg("y"), py::arg("tol") = 1e-9);
  m.def(
      "hausdorff",
      [](const Array& a, const Array& b) { return hausdorff_distance(to_cloud(a), to_cloud(b)); }, py::arg("a"),
      py::arg("b"));

  py::class_<MaxAffinePotential>(m, "Potential")
      .def_property_readonly("slopes", [](const MaxAffinePotential& p) { return to_array(p.slopes()); })
      .def_property_readonly("intercepts", &MaxAffinePotential::intercepts)
      .def_property_readonly("base_index", &MaxAffinePotential::base_index)
      .def("value", [](const MaxAffinePotential& p, const std::vector<double>& x) { return p.value(x); })
      .def(
          "subdifferential",
          [](const MaxAffinePotential& p, const std::vector<double>& x, double tol) {
            return to_array(eval_subdifferential(p, x, tol).vertices);
          },
          py::arg("x"), py::arg("tol") = 1e-9)
      .def("to_json", [](const MaxAffinePotential& p) { return io::dump(io::to_json(p)); });

  m.def(
      "rockafellar_potential",
      [](const Array& x, const Array& y, std::size_t base, double tol) {
        return rockafellar_potential(PairSet(to_cloud(x), to_cloud(y)), base, {}, tol);
      },
      py::arg("x"), py::arg("y"), py::arg("base_index") = 0, py::arg("tol") = 1e-9);

  m.def(
      "center_outward_ranks",
      [](const Array& sample, std::size_t n_r, std::size_t n_s, std::size_t n_0, std::uint64_t seed) {
        const auto pts = to_cloud(sample);
        const auto r = center_outward_ranks(pts, center_outward_grid(n_r, n_s, n_0, pts.dim(), seed));
        py::dict d;
        d["assignment"] = r.assignment;
        d["grid"] = to_array(r.grid.points);
        d["ring"] = r.grid.ring;
        d["cost"] = r.cost();
        return d;
      },
      py::arg("sample"), py::arg("n_r"), py::arg("n_s"), py::arg("n_0") = 0, py::arg("seed") = 0);

  m.def(
      "run_experiment",
      [](const std::string& config_json) {
        const auto cfg = io::config_from_json(io::Json::parse(config_json));
        ExperimentReport report;
        {
          py::gil_scoped_release release;
          report = run_consistency_experiment(cfg);
        }
        return io::dump(io::report_to_json(report));
      },
      py::arg("config_json"), "Run a consistency experiment from a JSON config; returns the JSON report text.");
}
