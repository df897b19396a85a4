#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "frsim/errors.hpp"
#include "frsim/scenario_io.hpp"

using namespace frsim;
using nlohmann::json;

namespace {

json minimal_document() {
  return json::parse(R"({
    "fair_clients": [
      {"type": "ou", "samples": 10, "eta": 0.5, "theta_star": [1.0, 2.0], "rho": 0.1}
    ]
  })");
}

std::string error_message(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const ValidationError& e) {
    return e.what();
  }
  return "";
}

struct TempFile {
  std::filesystem::path path;
  explicit TempFile(const std::string& name)
      : path(std::filesystem::temp_directory_path() / name) {}
  ~TempFile() {
    std::error_code ec;
    std::filesystem::remove(path, ec);
  }
};

}  // namespace

TEST_CASE("minimal scenario fills in the documented defaults") {
  const Scenario scenario = parse_scenario(minimal_document());
  CHECK(scenario.rounds == 100);
  CHECK(scenario.seed == 0);
  CHECK(scenario.replicate_count == 1);
  CHECK(scenario.scheme.kind == Scheme::Kind::kFedAvg);
  CHECK(scenario.free_riders.empty());
  // theta0 is inferred as the all-zero vector in the clients' dimension.
  CHECK(scenario.theta0 == ParameterVector{0.0, 0.0});
}

TEST_CASE("field errors carry the full path") {
  json bad = minimal_document();
  bad["fair_clients"][0]["samples"] = 0;
  CHECK(error_message([&] { parse_scenario(bad); }).find("fair_clients[0].samples") !=
        std::string::npos);

  json eta = minimal_document();
  eta["fair_clients"][0]["eta"] = 1.5;
  CHECK(error_message([&] { parse_scenario(eta); }).find("fair_clients[0].eta") !=
        std::string::npos);

  json rounds = minimal_document();
  rounds["rounds"] = "soon";
  CHECK(error_message([&] { parse_scenario(rounds); }).find("rounds") != std::string::npos);

  json rider = minimal_document();
  rider["free_riders"] = json::array({{{"samples", 10}, {"strategy", "sneaky"}}});
  CHECK(error_message([&] { parse_scenario(rider); }).find("free_riders[0].strategy") !=
        std::string::npos);
}

TEST_CASE("unknown keys are rejected at every level") {
  json top = minimal_document();
  top["banana"] = 1;
  const std::string top_message = error_message([&] { parse_scenario(top); });
  CHECK(top_message.find("banana") != std::string::npos);

  json nested = minimal_document();
  nested["fair_clients"][0]["mystery"] = true;
  const std::string nested_message = error_message([&] { parse_scenario(nested); });
  CHECK(nested_message.find("fair_clients[0]") != std::string::npos);
  CHECK(nested_message.find("mystery") != std::string::npos);

  json schedule = minimal_document();
  schedule["free_riders"] = json::array(
      {{{"samples", 10},
        {"strategy", "disguised"},
        {"schedule", {{"kind", "fixed"}, {"phi", 0.1}, {"extra", 2}}}}});
  CHECK(error_message([&] { parse_scenario(schedule); }).find("schedule") != std::string::npos);
}

TEST_CASE("theta0 is required when no client fixes the dimension") {
  json doc = json::parse(R"({
    "free_riders": [{"samples": 10, "strategy": "plain"}]
  })");
  const std::string message = error_message([&] { parse_scenario(doc); });
  CHECK(message.find("theta0") != std::string::npos);

  doc["theta0"] = json::array({0.5});
  const Scenario scenario = parse_scenario(doc);
  CHECK(scenario.theta0 == ParameterVector{0.5});
}

TEST_CASE("rider-heavy population mixes parse to the expected totals") {
  for (const int riders : {1, 5, 45}) {
    json doc;
    doc["fair_clients"] = json::array();
    for (int j = 0; j < 5; ++j) {
      doc["fair_clients"].push_back(
          {{"type", "ou"}, {"samples", 100}, {"eta", 0.5}, {"theta_star", {1.0}}, {"rho", 0.1}});
    }
    doc["free_riders"] = json::array();
    for (int k = 0; k < riders; ++k) {
      doc["free_riders"].push_back({{"samples", 100}, {"strategy", "plain"}});
    }
    const Scenario scenario = parse_scenario(doc);
    CHECK(scenario.fair_samples() == 500);
    CHECK(scenario.rider_samples() == 100 * riders);
    CHECK(scenario.total_samples() == 500 + 100 * riders);
  }
}

TEST_CASE("trace CSV layout") {
  Scenario scenario;
  OUClientSpec fair;
  fair.samples = 100;
  fair.eta = 0.5;
  fair.theta_star = {1.0};
  fair.rho = 0.0;
  scenario.fair_clients.push_back(fair);
  FreeRiderSpec rider;
  rider.samples = 100;
  scenario.free_riders.push_back(rider);
  scenario.rounds = 2;
  scenario.theta0 = {0.0};

  const RunTrace trace = run_training(scenario);
  const std::string csv = trace_to_csv(trace, scenario);
  std::vector<std::string> lines;
  std::size_t start = 0;
  while (start < csv.size()) {
    const std::size_t end = csv.find('\n', start);
    lines.push_back(csv.substr(start, end - start));
    if (end == std::string::npos) {
      break;
    }
    start = end + 1;
  }
  REQUIRE(lines.size() == 5);  // header + 2 rounds x 2 clients
  CHECK(lines[0] == "round,client_id,role,p0");
  CHECK(lines[1].rfind("0,0,fair,", 0) == 0);
  CHECK(lines[2].rfind("0,1,rider,", 0) == 0);
  CHECK(lines[3].rfind("1,0,fair,", 0) == 0);

  scenario.rounds = 0;
  const std::string empty_csv = trace_to_csv(run_training(scenario), scenario);
  CHECK(empty_csv == "round,client_id,role,p0\n");
}

TEST_CASE("trace CSV round-trips bit-exactly") {
  Scenario scenario;
  OUClientSpec fair;
  fair.samples = 100;
  fair.eta = 0.37;
  fair.theta_star = {1.0, -0.5};
  fair.rho = 0.21;
  scenario.fair_clients.push_back(fair);
  FreeRiderSpec plain;
  plain.samples = 60;
  FreeRiderSpec disguised;
  disguised.samples = 40;
  disguised.schedule = FixedSchedule{0.07};
  scenario.free_riders = {plain, disguised};
  scenario.rounds = 7;
  scenario.theta0 = {0.3, -0.9};
  scenario.seed = 13;

  const RunTrace trace = run_training(scenario);
  const RunTrace replayed = trace_from_csv(trace_to_csv(trace, scenario), scenario);

  REQUIRE(replayed.rounds.size() == trace.rounds.size());
  for (std::size_t t = 0; t < trace.rounds.size(); ++t) {
    CHECK(replayed.rounds[t].theta_global == trace.rounds[t].theta_global);
    CHECK(replayed.rounds[t].aggregated == trace.rounds[t].aggregated);
    for (std::size_t j = 0; j < trace.rounds[t].fair.size(); ++j) {
      CHECK(replayed.rounds[t].fair[j].upload == trace.rounds[t].fair[j].upload);
    }
    for (std::size_t k = 0; k < trace.rounds[t].riders.size(); ++k) {
      CHECK(replayed.rounds[t].riders[k].upload == trace.rounds[t].riders[k].upload);
      CHECK(replayed.rounds[t].riders[k].plain == trace.rounds[t].riders[k].plain);
    }
  }
  CHECK(replayed.final_theta == trace.final_theta);

  // Detection over the replayed trace reproduces every flag.
  const DetectionReport original = increment_stats(trace);
  const DetectionReport roundtrip = increment_stats(replayed);
  for (std::size_t c = 0; c < original.clients.size(); ++c) {
    CHECK(original.clients[c].flag_rate == roundtrip.clients[c].flag_rate);
    CHECK(original.clients[c].mean_rms == roundtrip.clients[c].mean_rms);
  }

  // Tampering with the header is rejected.
  std::string csv = trace_to_csv(trace, scenario);
  csv[0] = 'R';
  CHECK_THROWS_AS(trace_from_csv(csv, scenario), ValidationError);
}

TEST_CASE("moment reports round-trip through JSON text") {
  Scenario scenario;
  OUClientSpec fair;
  fair.samples = 100;
  fair.eta = 0.5;
  fair.theta_star = {1.0};
  fair.rho = 0.1;
  scenario.fair_clients = {fair, fair};
  FreeRiderSpec rider;
  rider.samples = 100;
  scenario.free_riders = {rider};
  scenario.rounds = 30;
  scenario.theta0 = {0.0};

  const MomentReport report = monte_carlo(scenario, 20, {10, 30});
  const MomentReport replayed = report_from_json(json::parse(report_to_json(report).dump()));

  CHECK(replayed.replicates == report.replicates);
  CHECK(replayed.epsilon == report.epsilon);
  CHECK(replayed.ratio == report.ratio);
  REQUIRE(replayed.checkpoints.size() == report.checkpoints.size());
  for (std::size_t c = 0; c < report.checkpoints.size(); ++c) {
    const CheckpointMoments& a = report.checkpoints[c];
    const CheckpointMoments& b = replayed.checkpoints[c];
    CHECK(b.round == a.round);
    CHECK(b.empirical_mean == a.empirical_mean);
    CHECK(b.empirical_mean_se == a.empirical_mean_se);
    CHECK(b.empirical_variance == a.empirical_variance);
    CHECK(b.empirical_variance_se == a.empirical_variance_se);
    CHECK(b.theory_expectation == a.theory_expectation);
    CHECK(b.theory_asymptotic_variance == a.theory_asymptotic_variance);
    CHECK(b.exact_gap_variance == a.exact_gap_variance);
  }
}

TEST_CASE("dataset generators") {
  json doc = json::parse(R"({
    "theta0": [0.0, 0.0],
    "fair_clients": [
      {"type": "sgd", "samples": 20, "lr": 0.05, "epochs": 1, "batch": 5,
       "loss": "quadratic", "r": 1.0,
       "data": {"kind": "quadratic_cloud", "center": [0.5, -0.25], "spread": 0.3,
                "data_seed": 7}}
    ]
  })");
  const Scenario quadratic = parse_scenario(doc);
  const auto& sgd = std::get<SGDClientSpec>(quadratic.fair_clients[0]);
  REQUIRE(sgd.features.size() == 20);
  // The cloud is recentred, so its mean hits the center exactly.
  for (std::size_t d = 0; d < 2; ++d) {
    double mean = 0.0;
    for (const auto& x : sgd.features) {
      mean += x[d];
    }
    mean /= 20.0;
    CHECK(std::abs(mean - std::get<QuadraticLoss>(sgd.loss).theta_star[d]) <= 1e-15);
  }
  // A different data seed produces a different cloud.
  doc["fair_clients"][0]["data"]["data_seed"] = 8;
  const Scenario reseeded = parse_scenario(doc);
  const auto& other = std::get<SGDClientSpec>(reseeded.fair_clients[0]);
  CHECK(other.features != sgd.features);

  json blob_doc = json::parse(R"({
    "theta0": [0.0, 0.0, 0.0],
    "fair_clients": [
      {"type": "sgd", "samples": 10, "lr": 0.05, "epochs": 1, "batch": 5,
       "loss": "logistic",
       "data": {"kind": "logistic_blobs", "dim": 3, "separation": 1.0, "data_seed": 3}}
    ]
  })");
  const Scenario logistic = parse_scenario(blob_doc);
  const auto& blobs = std::get<SGDClientSpec>(logistic.fair_clients[0]);
  REQUIRE(blobs.features.size() == 10);
  REQUIRE(blobs.targets.size() == 10);
  int positives = 0;
  for (const double y : blobs.targets) {
    CHECK((y == 0.0 || y == 1.0));
    positives += y == 1.0 ? 1 : 0;
  }
  CHECK(positives == 5);
  CHECK(blobs.features[0].size() == 3);

  // Inline features and a generator are mutually exclusive.
  doc["fair_clients"][0]["features"] = json::array({json::array({0.1, 0.2})});
  CHECK(error_message([&] { parse_scenario(doc); }).find("not both") != std::string::npos);
}

TEST_CASE("scheme parsing") {
  json doc = json::parse(R"({
    "scheme": {"type": "fedprox", "mu": 1.5},
    "fair_clients": [
      {"type": "ou_physical", "samples": 100, "lr": 0.1, "r": 1.0, "sigma": 1.0,
       "epochs": 1, "batch": 10, "theta_star": [1.0]}
    ]
  })");
  const Scenario prox = parse_scenario(doc);
  CHECK(prox.scheme.kind == Scheme::Kind::kFedProx);
  CHECK(prox.scheme.mu == 1.5);
  CHECK(prox.mu() == 1.5);

  // The proximal scheme refuses clients specified directly by (eta, rho).
  json direct = minimal_document();
  direct["scheme"] = {{"type", "fedprox"}, {"mu", 1.0}};
  CHECK_THROWS_AS(parse_scenario(direct), ValidationError);

  json unknown = minimal_document();
  unknown["scheme"] = {{"type", "median"}};
  CHECK(error_message([&] { parse_scenario(unknown); }).find("scheme.type") !=
        std::string::npos);

  // fedavg takes no proximal weight; the stray key is rejected.
  json avg_mu = minimal_document();
  avg_mu["scheme"] = {{"type", "fedavg"}, {"mu", 0.5}};
  CHECK_THROWS_AS(parse_scenario(avg_mu), ValidationError);
}

TEST_CASE("scenario output declarations") {
  json doc = minimal_document();
  ScenarioOutputs none = scenario_outputs(doc);
  CHECK(none.trace_path.empty());
  CHECK(none.report_path.empty());

  doc["output_trace"] = "trace.csv";
  doc["output_report"] = "report.json";
  ScenarioOutputs declared = scenario_outputs(doc);
  CHECK(declared.trace_path == "trace.csv");
  CHECK(declared.report_path == "report.json");
  CHECK_NOTHROW(parse_scenario(doc));
}

TEST_CASE("file exports") {
  Scenario scenario;
  OUClientSpec fair;
  fair.samples = 100;
  fair.eta = 0.5;
  fair.theta_star = {1.0};
  fair.rho = 0.1;
  scenario.fair_clients.push_back(fair);
  scenario.rounds = 3;
  scenario.theta0 = {0.0};
  const RunTrace trace = run_training(scenario);

  TempFile csv_file("frsim_io_test_trace.csv");
  export_trace(trace, scenario, csv_file.path.string(), "csv");
  CHECK(read_text_file(csv_file.path.string()) == trace_to_csv(trace, scenario));

  TempFile json_file("frsim_io_test_trace.json");
  export_trace(trace, scenario, json_file.path.string(), "json");
  const json parsed = json::parse(read_text_file(json_file.path.string()));
  CHECK(parsed["rounds"].size() == 3);

  CHECK_THROWS_AS(export_trace(trace, scenario, csv_file.path.string(), "xml"),
                  ValidationError);
  CHECK_THROWS_AS(read_text_file("/nonexistent/frsim/file.json"), ValidationError);
}
