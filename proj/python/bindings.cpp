#include "react/cli.hpp"
#include "react/formation.hpp"
#include "react/io.hpp"
#include "react/minco.hpp"
#include "react/sim.hpp"
#include "react/tcf_r2t.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <string>
#include <vector>

namespace py = pybind11;
using namespace react;

namespace {

using Points = Eigen::Matrix<double, Eigen::Dynamic, 2, Eigen::RowMajor>;

std::vector<Vec2> to_points(const Points& m) {
  std::vector<Vec2> out;
  out.reserve(static_cast<std::size_t>(m.rows()));
  for (Eigen::Index i = 0; i < m.rows(); ++i) out.emplace_back(m(i, 0), m(i, 1));
  return out;
}

Points from_points(const std::vector<Vec2>& v) {
  Points m(static_cast<Eigen::Index>(v.size()), 2);
  for (std::size_t i = 0; i < v.size(); ++i) m.row(static_cast<Eigen::Index>(i)) = v[i].transpose();
  return m;
}

py::object to_python(const io::Json& j) { return py::module_::import("json").attr("loads")(j.dump()); }

minco::BoundaryState boundary(const Points& rows) {
  if (rows.rows() != 3) throw InvalidArgument("boundary state needs 3 rows: position, velocity, acceleration");
  return {rows.row(0).transpose(), rows.row(1).transpose(), rows.row(2).transpose()};
}

}  // namespace

PYBIND11_MODULE(_reactnav, m) {
  m.attr("__version__") = cli::version();

  py::register_exception<InvalidArgument>(m, "InvalidArgument", PyExc_ValueError);
  py::register_exception<io::SchemaError>(m, "SchemaError", PyExc_ValueError);

  m.def(
      "structure_with_columns",
      [](int n, int columns, double spacing) {
        formation::StructureParams params;
        params.column_spacing = spacing;
        params.row_spacing = spacing;
        return from_points(formation::structure_with_columns(n, columns, params).relative_positions);
      },
      py::arg("n_robots"), py::arg("columns"), py::arg("spacing") = 0.6,
      "Relative slot positions (n x 2) of the interlaced column structure.");

  m.def(
      "normalized_formation_error",
      [](const Points& positions, const Points& desired, double a) {
        if (positions.rows() != desired.rows()) throw InvalidArgument("position counts differ");
        formation::WeightParams w;
        w.a = a;
        return formation::normalized_formation_error(to_points(positions), to_points(desired), w);
      },
      py::arg("positions"), py::arg("desired"), py::arg("a") = 1.0);

  m.def(
      "solve_assignment",
      [](const Points& robots, const Points& targets, double cell_size, bool warm_start) {
        assign::AssignmentOptions options;
        options.warm_start = warm_start;
        const auto r = assign::solve_assignment(to_points(robots), to_points(targets), cell_size, options);
        std::vector<std::vector<std::pair<int, int>>> cells;
        for (const auto& path : r.grid_trajectories) {
          auto& out = cells.emplace_back();
          for (const auto& c : path) out.emplace_back(c.x, c.y);
        }
        py::dict d;
        d["assignment"] = r.assignment;
        d["makespan"] = r.makespan;
        d["cost"] = r.total_cost;
        d["grid_width"] = r.problem.grid_width;
        d["grid_height"] = r.problem.grid_height;
        d["grid_trajectories"] = cells;
        d["conflict_free"] = assign::validate_conflict_free(r).ok;
        return d;
      },
      py::arg("robots"), py::arg("targets"), py::arg("cell_size") = 0.3, py::arg("warm_start") = false,
      "Conflict-free minimum-makespan, minimum-cost assignment of robots to targets.");

  py::class_<minco::PiecewiseQuintic>(m, "Trajectory")
      .def_property_readonly("durations", &minco::PiecewiseQuintic::durations)
      .def_property_readonly("total_duration", &minco::PiecewiseQuintic::total_duration)
      .def_property_readonly("pieces", &minco::PiecewiseQuintic::pieces)
      .def("evaluate", &minco::PiecewiseQuintic::evaluate, py::arg("t"), py::arg("order") = 0)
      .def("coefficients", [](const minco::PiecewiseQuintic& t) { return t.coefficients(); })
      .def("waypoints", [](const minco::PiecewiseQuintic& t) { return from_points(minco::waypoints_of(t).waypoints); })
      .def("jerk_energy", [](const minco::PiecewiseQuintic& t) { return minco::jerk_energy(t); })
      .def("to_json", [](const minco::PiecewiseQuintic& t) { return to_python(io::trajectory_to_json(t)); });

  m.def(
      "construct_trajectory",
      [](const Points& head, const Points& tail, const Points& waypoints, const std::vector<double>& durations) {
        minco::WaypointParam p;
        p.head = boundary(head);
        p.tail = boundary(tail);
        p.waypoints = to_points(waypoints);
        p.durations = durations;
        return minco::construct(p);
      },
      py::arg("head"), py::arg("tail"), py::arg("waypoints"), py::arg("durations"),
      "Minimum-jerk quintic trajectory. head and tail are 3 x 2 (position, velocity, acceleration).");

  m.def(
      "run_scenario",
      [](const std::string& path, std::optional<std::uint64_t> seed) {
        auto scenario = cli::resolve_scenario(path, seed, std::nullopt);
        sim::RunResult result;
        {
          py::gil_scoped_release release;
          result = sim::run_scenario(scenario);
        }
        return to_python(sim::summary_json(scenario, result));
      },
      py::arg("path"), py::arg("seed") = py::none(), "Runs a scenario file and returns its summary.");
}
