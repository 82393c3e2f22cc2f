#include <pybind11/complex.h>
#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "holodisc/arc.hpp"
#include "holodisc/cli.hpp"
#include "holodisc/dbar.hpp"
#include "holodisc/errors.hpp"
#include "holodisc/parallel.hpp"
#include "holodisc/runge.hpp"

namespace py = pybind11;
using namespace holodisc;

namespace {

Domain make_domain(const std::string& kind, double a, double b, double c) {
  if (kind == "disc") return Domain::disc(a);
  if (kind == "tube") return Domain::tube(a, b, c);
  if (kind == "annulus") return Domain::annulus(a, b);
  throw InvalidArgument("unknown domain kind '" + kind + "'");
}

GridMap to_map(const GridPtr& g, const CMatrix& values) {
  if (values.rows() != static_cast<Eigen::Index>(g->size()))
    throw InvalidArgument("values need one row per grid node");
  return GridMap(g, values);
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Pseudoholomorphic discs: certified d-bar solver and Poletsky disc pipeline";
  m.attr("__version__") = std::string(kVersion);

  // Translators run newest first, so the subclass is registered last.
  auto& base = py::register_exception<Error>(m, "HolodiscError", PyExc_RuntimeError);
  py::register_exception<ConfigError>(m, "ConfigError", base.ptr());

  m.def("force_sequential", &force_sequential, py::arg("on") = true);
  m.def("thread_count", &thread_count);

  // Structures
  py::class_<ComplexMatrixField, std::shared_ptr<ComplexMatrixField>>(m, "Field")
      .def_property_readonly("dimension", &ComplexMatrixField::dimension)
      .def("__call__", &ComplexMatrixField::eval, py::arg("z"))
      .def("describe", &ComplexMatrixField::describe)
      .def("__repr__", [](const ComplexMatrixField& f) { return "<Field " + f.describe() + ">"; });
  auto const_cast_field = [](FieldPtr f) { return std::const_pointer_cast<ComplexMatrixField>(f); };
  m.def("standard", [=](int n) { return const_cast_field(make_standard(n)); }, py::arg("n") = 1);
  m.def("constant", [=](cplx a) { return const_cast_field(make_constant(a)); }, py::arg("a"));
  m.def("a_lambda", [=](double l) { return const_cast_field(make_a_lambda(l)); }, py::arg("lam") = 0.3);
  m.def("catalog_names", [] {
    std::vector<std::string> names;
    for (const auto& e : catalog()) names.push_back(e.name);
    return names;
  });
  m.def("catalog_field", [=](const std::string& name) {
    for (const auto& e : catalog())
      if (e.name == name) return const_cast_field(e.field);
    throw InvalidArgument("unknown catalog entry '" + name + "'");
  });
  m.def("standard_structure", &standard_structure, py::arg("n") = 1);
  m.def("complex_matrix_of", py::overload_cast<const RMatrix&, double>(&complex_matrix_of), py::arg("j"),
        py::arg("det_threshold") = 1e-12);
  m.def("structure_from_complex_matrix", &structure_from_complex_matrix, py::arg("a"));

  // Grids and maps
  py::class_<DiscGrid, std::shared_ptr<DiscGrid>>(m, "Grid")
      .def_property_readonly("resolution", &DiscGrid::resolution)
      .def_property_readonly("spacing", &DiscGrid::spacing)
      .def_property_readonly("size", &DiscGrid::size)
      .def_property_readonly("origin_index", &DiscGrid::origin_index)
      .def_property_readonly("nodes", [](const DiscGrid& g) {
        return Eigen::Map<const Eigen::VectorXcd>(g.nodes().data(), static_cast<Eigen::Index>(g.size())).eval();
      })
      .def_property_readonly("weights", [](const DiscGrid& g) {
        return Eigen::Map<const Eigen::VectorXd>(g.weights().data(), static_cast<Eigen::Index>(g.size())).eval();
      })
      .def_property_readonly("interior_nodes", &DiscGrid::interior_nodes)
      .def("describe", &DiscGrid::describe);
  m.def(
      "grid",
      [](const std::string& kind, int resolution, double a, double b, double c) {
        return std::const_pointer_cast<DiscGrid>(build_grid(make_domain(kind, a, b, c), resolution));
      },
      py::arg("kind") = "disc", py::arg("resolution") = 64, py::arg("a") = 1.0, py::arg("b") = 0.0,
      py::arg("c") = 0.0,
      "disc: a = radius; tube: [a, b] with half-width c; annulus: radii a < b.");

  m.def("cauchy_green", [](std::shared_ptr<DiscGrid> g, const CMatrix& v) { return cauchy_green(to_map(g, v)).values; });
  m.def("wirtinger", [](std::shared_ptr<DiscGrid> g, const CMatrix& v) {
    const auto [dz, dzb] = wirtinger(to_map(g, v));
    return std::make_pair(dz.values, dzb.values);
  });
  m.def(
      "holder_norm",
      [](std::shared_ptr<DiscGrid> g, const CMatrix& v, double alpha, int order) {
        return holder_norm(to_map(g, v), alpha, order).total;
      },
      py::arg("grid"), py::arg("values"), py::arg("alpha") = 0.5, py::arg("order") = 0);
  m.def(
      "residual",
      [](std::shared_ptr<ComplexMatrixField> f, std::shared_ptr<DiscGrid> g, const CMatrix& v) {
        const GridMap u = to_map(g, v);
        return residual({f, g, u, 0.5}, u).values;
      },
      py::arg("field"), py::arg("grid"), py::arg("values"));
  m.def(
      "newton_solve",
      [](std::shared_ptr<ComplexMatrixField> f, std::shared_ptr<DiscGrid> g, const CMatrix& phi, double alpha,
         double tol, bool centered) {
        NewtonOptions o;
        o.tol = tol;
        o.centered = centered;
        const NewtonResult r = newton_solve({f, g, to_map(g, phi), alpha}, o);
        return std::make_pair(r.u.values, certificate_json(r.cert));
      },
      py::arg("field"), py::arg("grid"), py::arg("phi"), py::arg("alpha") = 0.5, py::arg("tol") = 0.0,
      py::arg("centered") = false, "Returns (u values, certificate JSON text).");

  // Grafts
  m.def(
      "graft_value",
      [](cplx center, cplx c, cplx a, cplx b, double r, cplx z) {
        const Graft g{center, CVector::Constant(1, c), CVector::Constant(1, a), CVector::Constant(1, b), r, 0.5, 0};
        return g.value(z)[0];
      },
      py::arg("center"), py::arg("c"), py::arg("a"), py::arg("b"), py::arg("r"), py::arg("z"));

  // Config-driven runs
  m.def("fnv1a", &fnv1a);
  m.def("validate_config", &validate_config, py::arg("text"));
  m.def(
      "run_config",
      [](const std::string& text, const std::string& out, bool sequential) {
        RunResult r;
        {
          py::gil_scoped_release release;
          r = run_config(text, out, sequential);
        }
        return py::make_tuple(r.exit_code, r.report, r.files, r.message);
      },
      py::arg("text"), py::arg("output_dir") = "", py::arg("sequential") = false,
      "Returns (exit_code, report JSON text, files, message).");
}
