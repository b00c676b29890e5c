#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <limits>

#include "scfo/bench.hpp"
#include "scfo/bounds.hpp"
#include "scfo/certify.hpp"
#include "scfo/engine.hpp"
#include "scfo/fj.hpp"
#include "scfo/io.hpp"
#include "scfo/qp.hpp"

namespace py = pybind11;
using namespace scfo;

namespace {

HalfspaceSet halfspaces(const Matrix& normals, const Vector& offsets, const Vector& anchor, const Vector& lower,
                        const Vector& upper) {
  return HalfspaceSet(normals, offsets, anchor, Box(lower, upper));
}

py::dict trajectory_dict(const Trajectory& traj) {
  const auto n = static_cast<Eigen::Index>(traj.records.size());
  const auto n_u = traj.records.front().u.size();
  Matrix u(n, n_u);
  Vector phi(n), K(n);
  std::vector<int> level;
  std::vector<std::size_t> k;
  std::vector<std::string> status;
  std::vector<Vector> g_p, g;
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& r = traj.records[static_cast<std::size_t>(i)];
    u.row(i) = r.u.transpose();
    phi[i] = r.measurement.phi;
    K[i] = r.K ? *r.K : std::numeric_limits<double>::quiet_NaN();
    level.push_back(r.params_level);
    k.push_back(r.k);
    status.push_back(to_string(r.status));
    g_p.push_back(r.measurement.g_p);
    g.push_back(r.g_values);
  }
  py::dict d;
  d["k"] = k;
  d["u"] = u;
  d["phi"] = phi;
  d["g_p"] = g_p;
  d["g"] = g;
  d["K"] = K;
  d["level"] = level;
  d["status"] = status;
  d["terminal"] = traj.terminal ? py::cast(*traj.terminal) : py::none();
  d["csv"] = trajectory_csv(traj);
  return d;
}

}  // namespace

PYBIND11_MODULE(_scfo, m) {
  m.doc() = "Feasible-side experimental optimization";

  py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
  py::register_exception<InternalError>(m, "InternalError", PyExc_RuntimeError);

  py::class_<ProblemSpec>(m, "Problem")
      .def_readonly("name", &ProblemSpec::name)
      .def_property_readonly("n_u", &ProblemSpec::n_u)
      .def_property_readonly("n_gp", &ProblemSpec::n_gp)
      .def_property_readonly("n_g", &ProblemSpec::n_g)
      .def_readonly("u0", &ProblemSpec::u0)
      .def_property_readonly("lower", [](const ProblemSpec& s) { return s.box.lower(); })
      .def_property_readonly("upper", [](const ProblemSpec& s) { return s.box.upper(); })
      .def("measure", [](const ProblemSpec& s, const Vector& u) {
        const Measurement r = s.oracle->measure(u);
        py::dict d;
        d["phi"] = r.phi;
        d["g_p"] = r.g_p;
        d["grad_phi"] = r.grad_phi;
        d["grad_g_p"] = r.grad_g_p;
        d["g"] = evaluate_numerical(s, u).values;
        return d;
      });

  m.def("builtin", &builtin, py::arg("name"));
  m.def("builtin_names", &builtin_names);
  m.def("load_problem", [](const std::string& path) { return load_problem(path); }, py::arg("path"));

  m.def(
      "run",
      [](const ProblemSpec& spec, std::size_t budget, int max_halvings, bool adapt, int fixed_level) {
        RunConfig cfg;
        cfg.budget = budget;
        cfg.max_halvings = max_halvings;
        cfg.adapt = adapt;
        cfg.fixed_level = fixed_level;
        Trajectory traj;
        {
          py::gil_scoped_release release;
          traj = scfo::run(spec, cfg);
        }
        return trajectory_dict(traj);
      },
      py::arg("problem"), py::arg("budget") = 200, py::arg("max_halvings") = 10, py::arg("adapt") = true,
      py::arg("fixed_level") = 0);

  m.def("linear_growth", &linear_growth, py::arg("kappa_row"), py::arg("frm"), py::arg("to"));
  m.def("quadratic_growth", &quadratic_growth, py::arg("M"), py::arg("frm"), py::arg("to"));
  m.def("worst_case_growth", [](const ProblemSpec& s) {
    const GrowthBounds gb = worst_case_growth(s.lipschitz, s.box);
    py::dict d;
    d["L_p"] = gb.L_p;
    d["L"] = gb.L;
    d["Q_phi"] = gb.Q_phi;
    d["Q_g"] = gb.Q_g;
    d["Q_gp"] = gb.Q_gp;
    return d;
  });
  m.def(
      "filter_gain_floor",
      [](const ProblemSpec& s, int level) {
        Engine e(s, RunConfig{});
        const ProjectionParams p = ProjectionParams::at_level(e.ceilings(), level);
        return filter_gain_floor(p, e.growth(), s.lipschitz, s.oracle->measure(s.u0).g_p);
      },
      py::arg("problem"), py::arg("level") = 0);

  m.def(
      "lp_feasible",
      [](const Matrix& normals, const Vector& offsets, const Vector& anchor, const Vector& lower,
         const Vector& upper) {
        const FeasibilityWitness w = lp_feasible(halfspaces(normals, offsets, anchor, lower, upper));
        return py::make_tuple(w.feasible, w.feasible ? py::cast(w.point) : py::none());
      },
      py::arg("normals"), py::arg("offsets"), py::arg("anchor"), py::arg("lower"), py::arg("upper"));
  m.def(
      "qp_project",
      [](const Vector& target, const Matrix& normals, const Vector& offsets, const Vector& anchor,
         const Vector& lower, const Vector& upper) {
        return qp_project(target, halfspaces(normals, offsets, anchor, lower, upper));
      },
      py::arg("target"), py::arg("normals"), py::arg("offsets"), py::arg("anchor"), py::arg("lower"),
      py::arg("upper"));

  m.def(
      "fj_error",
      [](const ProblemSpec& s, const Vector& u, const std::string& mode) {
        const FjCertificate c = fj_error(u, s, s.oracle->measure(u), parse_fj_normalization(mode));
        return py::make_tuple(c.error, c.multipliers);
      },
      py::arg("problem"), py::arg("u"), py::arg("mode") = "fixed");
  m.def(
      "min_nonnegative_rayleigh",
      [](const Matrix& psi) {
        const SphereMinimum s = min_nonnegative_rayleigh(psi);
        return py::make_tuple(s.value, s.argmin);
      },
      py::arg("psi"));

  m.def("derived_optimum", &derived_optimum, py::arg("problem"), py::arg("resolution") = 1e-3);
  m.def(
      "validate_lipschitz",
      [](const ProblemSpec& s, std::size_t samples, std::uint64_t seed, double scale) {
        ProblemSpec copy = s;
        if (scale != 1.0) copy.lipschitz = s.lipschitz.scaled(scale);
        const LipschitzReport r = validate_lipschitz(copy, samples, seed);
        py::dict worst;
        for (const auto& c : r.checks) worst[py::str(c.constant)] = c.worst_ratio;
        return py::make_tuple(r.ok, worst);
      },
      py::arg("problem"), py::arg("samples") = 10000, py::arg("seed") = 1, py::arg("scale") = 1.0);
}
