#pragma once

#include <string>

#include <json.hpp>

#include "frsim/detection.hpp"
#include "frsim/federation.hpp"
#include "frsim/monte_carlo.hpp"

namespace frsim {

// Parses and validates a scenario document. Every failure names the
// offending field path, e.g. "fair_clients[2].eta". Unknown keys are
// rejected. Defaults: scheme fedavg, rounds 100, seed 0, replicate_count 1,
// theta0 all-zero with the dimension taken from the clients.
Scenario load_scenario(const std::string& path);
Scenario parse_scenario(const nlohmann::json& j);

// Optional output paths declared inside the scenario file.
struct ScenarioOutputs {
  std::string trace_path;   // "output_trace"
  std::string report_path;  // "output_report"
};
ScenarioOutputs scenario_outputs(const nlohmann::json& j);

// Trace serialization. CSV columns: round, client_id, role(fair|rider), one
// column p0..p{D-1} per coordinate of the upload, plus a loss column when
// the scenario has descent clients. Doubles print with 17 significant
// digits, so text round-trips reproduce the exact bits.
std::string trace_to_csv(const RunTrace& trace, const Scenario& scenario);
nlohmann::json trace_to_json(const RunTrace& trace, const Scenario& scenario);

// Rebuilds a run trace from CSV text: uploads come from the rows and the
// per-round broadcasts replay the weighted aggregation from theta0.
RunTrace trace_from_csv(const std::string& text, const Scenario& scenario);

nlohmann::json report_to_json(const MomentReport& report);
MomentReport report_from_json(const nlohmann::json& j);

nlohmann::json detection_to_json(const DetectionReport& report);
nlohmann::json band_to_json(const BandResult& band);

// Writes a trace or report to path in the requested format ("csv"|"json").
void export_trace(const RunTrace& trace, const Scenario& scenario, const std::string& path,
                  const std::string& format);
void export_report(const MomentReport& report, const std::string& path,
                   const std::string& format);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& text);

}  // namespace frsim
