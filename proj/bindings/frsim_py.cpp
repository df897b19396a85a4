// Python bindings: thin JSON-string wrappers over the simulator, the moment
// harness, the closed-form evaluators, and detection. The package-level
// __init__.py turns the returned JSON text into dicts, which keeps this
// module free of per-field converter code.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "frsim/detection.hpp"
#include "frsim/federation.hpp"
#include "frsim/monte_carlo.hpp"
#include "frsim/scenario_io.hpp"
#include "frsim/theory.hpp"

namespace py = pybind11;
using namespace frsim;
using nlohmann::json;

namespace {

Scenario scenario_from_text(const std::string& text,
                            std::optional<std::uint64_t> seed = std::nullopt) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ValidationError(std::string("scenario: ") + e.what());
  }
  Scenario scenario = parse_scenario(doc);
  if (seed) {
    scenario.seed = *seed;
  }
  return scenario;
}

std::string theory_json(const std::string& scenario_text) {
  const Scenario scenario = scenario_from_text(scenario_text);
  const TheoryInputs inputs = TheoryInputs::from_scenario(scenario);
  json out;
  out["epsilon"] = inputs.epsilon();
  out["ratio"] = inputs.ratio();
  out["expectation"] = 0.0;
  out["asymptotic_variance"] = disguised_asymptotic_variance(inputs);
  out["exact_gap_variance"] = exact_gap_variance(inputs);
  return out.dump();
}

std::string simulate_csv(const std::string& scenario_text, std::optional<std::uint64_t> seed) {
  const Scenario scenario = scenario_from_text(scenario_text, seed);
  return trace_to_csv(run_training(scenario), scenario);
}

std::string simulate_json(const std::string& scenario_text, std::optional<std::uint64_t> seed) {
  const Scenario scenario = scenario_from_text(scenario_text, seed);
  return trace_to_json(run_training(scenario), scenario).dump();
}

std::string monte_carlo_json(const std::string& scenario_text, std::int64_t replicates,
                             const std::vector<std::int64_t>& checkpoints, int threads) {
  const Scenario scenario = scenario_from_text(scenario_text);
  const std::int64_t count = replicates > 0 ? replicates : scenario.replicate_count;
  return report_to_json(monte_carlo(scenario, count, checkpoints, threads)).dump();
}

std::string detect_json(const std::string& trace_csv, const std::string& scenario_text,
                        double tolerance) {
  const Scenario scenario = scenario_from_text(scenario_text);
  const RunTrace trace = trace_from_csv(trace_csv, scenario);
  return detection_to_json(increment_stats(trace, tolerance)).dump();
}

std::string fair_band_json(const std::string& scenario_text, int fair_seeds, int threads) {
  const Scenario scenario = scenario_from_text(scenario_text);
  return band_to_json(fair_band_experiment(scenario, fair_seeds, threads)).dump();
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Federated-averaging free-rider simulator core";

  py::register_exception<ValidationError>(m, "ScenarioError", PyExc_ValueError);
  py::register_exception<RuntimeFailure>(m, "SimulationError", PyExc_RuntimeError);

  m.def("theory_json", &theory_json, py::arg("scenario"),
        "Closed-form gap moments of a scenario, as a JSON string.");
  m.def("simulate_csv", &simulate_csv, py::arg("scenario"), py::arg("seed") = std::nullopt,
        "Run one seeded training run and return the per-round trace as CSV text.");
  m.def("simulate_json", &simulate_json, py::arg("scenario"), py::arg("seed") = std::nullopt,
        "Run one seeded training run and return the full trace as a JSON string.");
  m.def("monte_carlo_json", &monte_carlo_json, py::arg("scenario"), py::arg("replicates") = 0,
        py::arg("checkpoints") = std::vector<std::int64_t>{}, py::arg("threads") = 1,
        "Estimate gap moments over replicated coupled runs; JSON report string. "
        "replicates <= 0 falls back to the scenario's replicate_count.",
        py::call_guard<py::gil_scoped_release>());
  m.def("detect_json", &detect_json, py::arg("trace_csv"), py::arg("scenario"),
        py::arg("tolerance") = 0.0,
        "Per-client increment statistics and plain-upload flags for a CSV trace.");
  m.def("fair_band_json", &fair_band_json, py::arg("scenario"), py::arg("fair_seeds") = 30,
        py::arg("threads") = 1,
        "Fair-only loss band versus the attacked run for descent scenarios.",
        py::call_guard<py::gil_scoped_release>());
}
