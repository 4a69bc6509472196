#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <memory>
#include <optional>

#include "crossflow/agent/trainer.hpp"
#include "crossflow/config.hpp"
#include "crossflow/controllers.hpp"
#include "crossflow/dtse.hpp"
#include "crossflow/error.hpp"
#include "crossflow/harness.hpp"
#include "crossflow/sim/scenario.hpp"
#include "crossflow/sim/simulation.hpp"

namespace py = pybind11;
using namespace crossflow;

namespace {

sim::DemandConfig make_demand(const sim::Intersection& x, const std::optional<std::vector<double>>& flows,
                              double p_cv, std::uint64_t seed) {
  if (!flows) {
    auto d = harness::episode_demand(x, seed);
    d.p_cv = p_cv;
    return d;
  }
  if (flows->size() != sim::kApproaches) throw ConfigError("flows needs one value per approach (N, E, S, W)");
  sim::DemandConfig d;
  for (int i = 0; i < sim::kApproaches; ++i) d.flows[i] = (*flows)[i];
  d.p_cv = p_cv;
  d.turn_weights = sim::uniform_turn_weights(x);
  d.seed = seed;
  return d;
}

py::array_t<float> to_array(const dtse::PartialDtse& s) {
  const auto& sh = s.shape();
  py::array_t<float> out({sh.channels, sh.lanes, sh.cells});
  std::copy(s.values().begin(), s.values().end(), out.mutable_data());
  return out;
}

py::dict to_dict(const harness::EpisodeStats& e) {
  py::dict d;
  d["scenario"] = std::string(1, e.scenario);
  d["controller"] = e.controller;
  d["seed"] = e.seed;
  d["p_cv"] = e.p_cv;
  d["emtd"] = e.emtd;
  d["throughput"] = e.throughput;
  d["inserted"] = e.inserted;
  d["mean_queue"] = e.mean_queue;
  d["steps"] = e.steps;
  return d;
}

RunConfig config_from(const std::map<std::string, std::string>& overrides) {
  RunConfig cfg;
  for (const auto& [k, v] : overrides) set_config_value(cfg, k, v);
  validate(cfg);
  return cfg;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Single-intersection signal control: simulator, state encoder, baselines and DQN training";

  // Later registrations are tried first, so the base class goes first.
  const auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
  py::register_exception<CheckpointError>(m, "CheckpointError", base.ptr());

  m.def(
      "state_shape",
      [](char scenario) {
        const auto s = dtse::state_shape(scenario);
        return py::make_tuple(s.channels, s.lanes, s.cells);
      },
      py::arg("scenario"));

  m.def(
      "phase_count", [](char scenario) { return sim::build_scenario(scenario).program.phases.size(); },
      py::arg("scenario"));

  py::class_<sim::Simulation>(m, "Simulation")
      .def(py::init([](char scenario, std::optional<std::vector<double>> flows, double p_cv, std::uint64_t seed,
                       double horizon) {
             auto x = sim::build_scenario(scenario);
             auto d = make_demand(x, flows, p_cv, seed);
             sim::SimParams p;
             p.horizon = horizon;
             return std::make_unique<sim::Simulation>(std::move(x), std::move(d), p);
           }),
           py::arg("scenario") = 'a', py::arg("flows") = py::none(), py::arg("p_cv") = 1.0,
           py::arg("seed") = 0, py::arg("horizon") = 3600.0)
      .def("step",
           [](sim::Simulation& s) {
             const auto ev = s.step();
             py::dict d;
             d["inserted"] = ev.inserted.size();
             d["crossed"] = ev.crossed.size();
             d["exited"] = ev.exited.size();
             return d;
           })
      .def("apply_action", &sim::Simulation::apply_action, py::arg("phase"))
      .def_property_readonly("time", &sim::Simulation::time)
      .def_property_readonly("done", &sim::Simulation::done)
      .def_property_readonly("decision_point", &sim::Simulation::decision_point)
      .def_property_readonly("phase", [](const sim::Simulation& s) { return s.timer().phase(); })
      .def_property_readonly("stage", [](const sim::Simulation& s) { return sim::stage_name(s.timer().stage()); })
      .def_property_readonly("in_network", &sim::Simulation::in_network)
      .def_property_readonly("arrived", &sim::Simulation::arrived_total)
      .def_property_readonly("exited", &sim::Simulation::exited_total)
      .def_property_readonly("total_delay", &sim::Simulation::total_delay)
      .def("state", [](const sim::Simulation& s) { return to_array(dtse::encode(s.observe().cv_view(), s.intersection())); })
      .def("vehicles", [](const sim::Simulation& s) {
        py::list out;
        for (const auto& v : s.observe().vehicles) {
          py::dict d;
          d["id"] = v.id;
          d["lane"] = v.lane;
          d["pos"] = v.pos;
          d["speed"] = v.speed;
          d["is_cv"] = v.is_cv;
          out.append(d);
        }
        return out;
      });

  m.def(
      "run_episode",
      [](char scenario, const std::string& controller, std::optional<std::vector<double>> flows, double p_cv,
         std::uint64_t seed, std::optional<std::string> checkpoint, double horizon) {
        const auto x = sim::build_scenario(scenario);
        const auto d = make_demand(x, flows, p_cv, seed);
        harness::ParamsRef params;
        if (checkpoint) params = harness::load_policy(*checkpoint, scenario);
        auto ctrl = harness::make_controller(controller, params);
        sim::SimParams p;
        p.horizon = horizon;
        harness::EpisodeStats e;
        {
          py::gil_scoped_release release;
          e = harness::run_episode(x, *ctrl, d, seed, p);
        }
        e.scenario = scenario;
        return to_dict(e);
      },
      py::arg("scenario"), py::arg("controller"), py::arg("flows") = py::none(), py::arg("p_cv") = 1.0,
      py::arg("seed") = 0, py::arg("checkpoint") = py::none(), py::arg("horizon") = 3600.0,
      "Runs one episode and returns its statistics. Without `flows`, demand is sampled from `seed`.");

  m.def(
      "config",
      [](const std::map<std::string, std::string>& overrides) {
        const auto cfg = config_from(overrides);
        std::map<std::string, std::string> out;
        for (const auto& k : config_keys()) out[k.key] = get_config_value(cfg, k.key);
        return out;
      },
      py::arg("overrides") = std::map<std::string, std::string>{},
      "Effective configuration as key -> text value, after `overrides`.");

  m.def(
      "train",
      [](const std::string& out, const std::map<std::string, std::string>& overrides) {
        const auto cfg = config_from(overrides);
        agent::TrainOutputs r;
        {
          py::gil_scoped_release release;
          r = agent::train(cfg.train, out);
        }
        py::dict d;
        d["checkpoint"] = r.checkpoint.string();
        d["log"] = r.log.string();
        std::vector<std::string> inter;
        for (const auto& p : r.intermediate) inter.push_back(p.string());
        d["intermediate"] = inter;
        return d;
      },
      py::arg("out"), py::arg("overrides") = std::map<std::string, std::string>{},
      "Trains with the given config overrides; `out` must be an existing directory.");
}
