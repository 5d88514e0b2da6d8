#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "teamlab/experiment.hpp"
#include "teamlab/incentives.hpp"
#include "teamlab/metrics.hpp"
#include "teamlab/team.hpp"

namespace py = pybind11;
using namespace teamlab;

namespace {

experiment::ExperimentConfig config_from_text(
    const std::string& text, const std::vector<std::string>& overrides) {
  auto kv = cfg::KeyValues::from_string(text);
  for (const auto& assignment : overrides) kv.apply_override(assignment);
  return experiment::ExperimentConfig::from_keyvalues(kv);
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "population team-reward experiments: pairwise dilemma and gridworld cleanup";

  py::class_<TeamPartition>(m, "TeamPartition")
      .def(py::init<int, int>(), py::arg("num_teams"), py::arg("team_size"))
      .def_property_readonly("num_agents", &TeamPartition::num_agents)
      .def_property_readonly("num_teams", &TeamPartition::num_teams)
      .def_property_readonly("team_size", &TeamPartition::team_size)
      .def("team_of", &TeamPartition::team_of, py::arg("agent"))
      .def("members", &TeamPartition::members, py::arg("team"))
      .def("notation", &TeamPartition::notation)
      .def("__repr__", [](const TeamPartition& p) {
        return "TeamPartition('" + p.notation() + "')";
      });

  m.def("parse_structure", &parse_structure, py::arg("notation"),
        py::arg("n_agents"),
        "Parse k/m team notation against a population size.");

  m.def("apply_team_transform", &apply_team_transform, py::arg("partition"),
        py::arg("rewards"),
        "Replace each reward with the mean over the agent's team.");

  m.def(
      "teammate_probability",
      [](const TeamPartition& partition, const std::string& mode) {
        return teammate_probability(partition, parse_pairing_mode(mode));
      },
      py::arg("partition"), py::arg("mode") = "team_first");

  py::class_<incentives::IncentiveEntry>(m, "IncentiveEntry")
      .def_readonly("structure", &incentives::IncentiveEntry::structure)
      .def_readonly("benefit", &incentives::IncentiveEntry::benefit)
      .def_readonly("cost", &incentives::IncentiveEntry::cost)
      .def_readonly("nu", &incentives::IncentiveEntry::nu)
      .def_readonly("margin", &incentives::IncentiveEntry::margin)
      .def_property_readonly("incentivized_action",
                             [](const incentives::IncentiveEntry& e) {
                               return e.action ==
                                              incentives::IncentivizedAction::Cooperate
                                          ? "cooperate"
                                          : "defect";
                             })
      .def("__repr__", [](const incentives::IncentiveEntry& e) {
        return "IncentiveEntry(" + e.structure + ", b=" +
               std::to_string(e.benefit) + ", margin=" + std::to_string(e.margin) +
               ")";
      });

  m.def("incentive_table", &incentives::incentive_table, py::arg("structures"),
        py::arg("n_agents"), py::arg("bc_pairs"),
        py::arg("nu_override") = std::nullopt,
        "Incentive margin per (structure, benefit/cost) combination.");

  m.def("format_incentive_table", &incentives::format_incentive_table,
        py::arg("entries"));

  m.def("cooperation_threshold", &incentives::cooperation_threshold,
        py::arg("benefit"), py::arg("cost"));
  m.def("incentive_margin", &incentives::incentive_margin, py::arg("nu"),
        py::arg("benefit"), py::arg("cost"));

  m.def("normalized_reward", &metrics::normalized_reward,
        py::arg("mean_per_agent_reward"), py::arg("benefit"), py::arg("cost"));
  m.def("equality", &metrics::equality, py::arg("rewards"),
        "Inverse Gini index; None when the mean reward is not positive.");
  m.def(
      "confidence_interval",
      [](const std::vector<double>& samples, double level) {
        const auto ci = metrics::confidence_interval(samples, level);
        return std::make_pair(ci.mean, ci.half_width);
      },
      py::arg("samples"), py::arg("level") = 0.95,
      "Student-t interval as (mean, half_width).");

  m.def(
      "config_hash",
      [](const std::string& config_text) {
        return config_from_text(config_text, {}).config_hash();
      },
      py::arg("config_text"),
      "Canonical hash of a key=value experiment config.");

  m.def(
      "run_experiment",
      [](const std::string& config_text, const std::vector<std::string>& overrides,
         const std::optional<std::string>& output_dir) {
        auto config = config_from_text(config_text, overrides);
        if (output_dir) config.output_dir = *output_dir;
        const auto result = experiment::run_experiment(config);

        py::list trials;
        for (const auto& t : result.trials) {
          py::dict d;
          d["trial"] = t.trial;
          d["seed"] = t.seed;
          if (config.environment == experiment::Environment::Ipd) {
            d["normalized_reward"] = t.normalized_reward;
            d["coop_teammate"] = t.coop_teammate;
            d["coop_other"] = t.coop_other;
          } else {
            d["population_reward"] = t.population_reward;
            d["apples_total"] = t.apples_total;
            d["cleans_total"] = t.cleans_total;
            d["punishes_total"] = t.punishes_total;
          }
          d["equality"] = t.equality;
          trials.append(std::move(d));
        }

        py::dict out;
        out["environment"] = experiment::to_string(config.environment);
        out["structure"] = config.structure;
        out["config_hash"] = config.config_hash();
        out["output_dir"] = result.output_dir;
        out["files"] = result.output_files;
        out["trials"] = std::move(trials);
        return out;
      },
      py::arg("config_text"), py::arg("overrides") = std::vector<std::string>{},
      py::arg("output_dir") = std::nullopt,
      "Run all trials of a key=value config and write the CSV artifacts.");

  m.attr("__version__") = "0.1.0";
}
