#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "nocperf/analytic.hpp"
#include "nocperf/canonical.hpp"
#include "nocperf/error.hpp"
#include "nocperf/experiment.hpp"
#include "nocperf/network.hpp"
#include "nocperf/traceburst.hpp"
#include "nocperf/traffic.hpp"

namespace py = pybind11;
using namespace nocperf;

namespace {

ExperimentConfig config_from(const py::object& obj) {
  if (obj.is_none())
    return {};
  const auto json_mod = py::module_::import("json");
  const std::string text = py::str(json_mod.attr("dumps")(obj));
  return ExperimentConfig::from_json(nlohmann::json::parse(text));
}

py::object to_py(const nlohmann::ordered_json& j) {
  return py::module_::import("json").attr("loads")(j.dump());
}

} // namespace

PYBIND11_MODULE(_nocperf, m) {
  m.doc() = "Analytic NoC latency model and cycle-accurate simulator";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<DomainError>(m, "DomainError", PyExc_ValueError);
  py::register_exception<InstabilityError>(m, "InstabilityError", PyExc_RuntimeError);
  py::register_exception<NonConvergenceError>(m, "NonConvergenceError", PyExc_RuntimeError);
  py::register_exception<ModelBreakdownError>(m, "ModelBreakdownError", PyExc_RuntimeError);

  m.def("scv_from_burst", &scv_from_burst, py::arg("rate"), py::arg("burst_prob"));
  m.def("burst_from_scv", &burst_from_scv, py::arg("rate"), py::arg("scv"));
  m.def("departure_scv", &departure_scv, py::arg("utilization"), py::arg("arrival_scv"),
        py::arg("service_scv"));
  m.def("ggeo_g1_occupancy", &ggeo_g1_occupancy, py::arg("utilization"), py::arg("arrival_scv"),
        py::arg("service_scv"));
  m.def("sample_interarrivals",
        [](double rate, double burst_prob, std::uint64_t seed, std::size_t count) {
          return sample_interarrivals(GGeoProcess(rate, burst_prob), seed, count);
        },
        py::arg("rate"), py::arg("burst_prob"), py::arg("seed"), py::arg("count"));

  m.def("single_queue_wait",
        [](double rate, double burst_prob, int service_time) {
          WaitingClass c{rate, scv_from_burst(rate, burst_prob), service_time,
                         static_cast<double>(service_time), 0.0};
          return waiting_time({c}).front();
        },
        py::arg("rate"), py::arg("burst_prob"), py::arg("service_time") = 1,
        "GGeo/D/1 mean queueing time in cycles.");

  m.def("basic_priority",
        [](const std::vector<std::pair<double, double>>& classes, int service_time) {
          PriorityGroup g;
          for (std::size_t i = 0; i < classes.size(); ++i)
            g.classes.push_back({std::to_string(i + 1),
                                 {classes[i].first,
                                  scv_from_burst(classes[i].first, classes[i].second)},
                                 service_time, 0.0, static_cast<int>(i), -1});
          std::vector<double> w;
          for (const auto& c : decompose_basic_priority(g).classes)
            w.push_back(c.waiting);
          return w;
        },
        py::arg("classes"), py::arg("service_time") = 1,
        "Waits of (rate, burst_prob) classes in priority order at one server.");

  m.def("analyze",
        [](const py::object& config, bool baseline) {
          const auto cfg = config_from(config);
          return to_py(analysis_json(analyze(cfg, baseline), cfg, baseline, false));
        },
        py::arg("config") = py::none(), py::arg("baseline") = false);

  m.def("simulate",
        [](const py::object& config) {
          const auto cfg = config_from(config);
          py::gil_scoped_release release;
          const auto rep = simulate(cfg, cfg.rate, cfg.burst_prob);
          py::gil_scoped_acquire acquire;
          return to_py(simulation_json(rep));
        },
        py::arg("config") = py::none());

  m.def("compare",
        [](const py::object& config, int jobs) {
          const auto cfg = config_from(config);
          std::vector<ComparisonRow> rows;
          {
            py::gil_scoped_release release;
            rows = compare(cfg, jobs);
          }
          return to_py(comparison_json(rows));
        },
        py::arg("config") = py::none(), py::arg("jobs") = 1);

  m.def("estimate_burstiness",
        [](const std::vector<std::tuple<std::uint64_t, int, int>>& events, int service_time,
           std::uint64_t window, bool per_flow) {
          std::vector<TraceEvent> ev;
          for (const auto& [c, s, d] : events)
            ev.push_back({c, s, d});
          const auto est = estimate_burstiness(ev, {service_time, window, per_flow});
          return py::module_::import("json").attr("loads")(estimates_to_json(est));
        },
        py::arg("events"), py::arg("service_time") = 1, py::arg("window") = 200000,
        py::arg("per_flow") = false);
}
