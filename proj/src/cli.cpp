#include "frsim/cli.hpp"

#include <cmath>
#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "frsim/detection.hpp"
#include "frsim/errors.hpp"
#include "frsim/federation.hpp"
#include "frsim/monte_carlo.hpp"
#include "frsim/scenario_io.hpp"
#include "frsim/theory.hpp"

namespace frsim {
namespace {

std::string fixed6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

struct LoadedScenario {
  Scenario scenario;
  ScenarioOutputs outputs;
};

LoadedScenario load(const std::string& path, const std::uint64_t* seed_override) {
  const std::string text = read_text_file(path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError("scenario parse error in " + path + ": " + e.what());
  }
  LoadedScenario loaded{parse_scenario(j), scenario_outputs(j)};
  if (seed_override != nullptr) {
    loaded.scenario.seed = *seed_override;
  }
  std::cerr << "scenario: " << loaded.scenario.fair_clients.size() << " fair clients, "
            << loaded.scenario.free_riders.size() << " free-riders, N = "
            << loaded.scenario.total_samples() << " samples (M_K = "
            << loaded.scenario.rider_samples() << "), " << loaded.scenario.rounds
            << " rounds\n";
  return loaded;
}

// Resolves the output target: an explicit --out wins over the scenario
// file's declared path; empty means stdout.
std::string output_target(const std::string& cli_out, const std::string& scenario_out) {
  return cli_out.empty() ? scenario_out : cli_out;
}

void emit(const std::string& path, const std::string& text) {
  if (path.empty()) {
    std::cout << text;
  } else {
    write_text_file(path, text);
    std::cerr << "wrote " << path << "\n";
  }
}

int run_simulate(const std::string& scenario_path, const std::uint64_t* seed,
                 const std::string& out, const std::string& format, bool fair_band,
                 int fair_seeds, int threads) {
  LoadedScenario loaded = load(scenario_path, seed);
  if (fair_band) {
    const BandResult band = fair_band_experiment(loaded.scenario, fair_seeds, threads);
    std::cerr << "fair band over " << fair_seeds << " seeds: ["
              << fixed6(band.band_min) << ", " << fixed6(band.band_max)
              << "], attacked final loss " << fixed6(band.attacked_final_loss) << " -> "
              << (band.inside ? "inside" : "outside") << "\n";
    emit(output_target(out, loaded.outputs.report_path), band_to_json(band).dump(2) + "\n");
    return 0;
  }
  const RunTrace trace = run_training(loaded.scenario);
  const std::string target = output_target(out, loaded.outputs.trace_path);
  if (format == "json") {
    emit(target, trace_to_json(trace, loaded.scenario).dump(2) + "\n");
  } else if (format == "csv") {
    emit(target, trace_to_csv(trace, loaded.scenario));
  } else {
    throw ValidationError("--format: must be \"csv\" or \"json\"");
  }
  return 0;
}

int run_montecarlo(const std::string& scenario_path, const std::uint64_t* seed,
                   std::int64_t replicates, const std::vector<std::int64_t>& checkpoints,
                   const std::string& out, const std::string& format, int threads) {
  LoadedScenario loaded = load(scenario_path, seed);
  const std::int64_t R = replicates > 0 ? replicates : loaded.scenario.replicate_count;
  const MomentReport report = monte_carlo(loaded.scenario, R, checkpoints, threads);
  std::cout << "replicates " << report.replicates << ", epsilon " << fixed6(report.epsilon)
            << ", ratio " << fixed6(report.ratio) << "\n";
  for (const CheckpointMoments& cp : report.checkpoints) {
    for (std::size_t d = 0; d < cp.empirical_mean.size(); ++d) {
      std::cout << "round " << cp.round << " coord " << d << ": mean "
                << fixed6(cp.empirical_mean[d]) << " (se " << fixed6(cp.empirical_mean_se[d])
                << "), variance " << fixed6(cp.empirical_variance[d]) << " (se "
                << fixed6(cp.empirical_variance_se[d]) << "), closed form "
                << fixed6(cp.theory_asymptotic_variance) << ", exact gap variance "
                << fixed6(cp.exact_gap_variance) << "\n";
    }
  }
  const std::string target = output_target(out, loaded.outputs.report_path);
  if (!target.empty()) {
    export_report(report, target, format.empty() ? "json" : format);
    std::cerr << "wrote " << target << "\n";
  }
  return 0;
}

int run_theory(const std::string& scenario_path) {
  LoadedScenario loaded = load(scenario_path, nullptr);
  const TheoryInputs inputs = TheoryInputs::from_scenario(loaded.scenario);
  inputs.validate();
  std::cout << "epsilon " << fixed6(inputs.epsilon()) << "\n";
  std::cout << "ratio " << fixed6(inputs.ratio()) << "\n";
  std::cout << "expectation " << fixed6(0.0) << "\n";
  std::cout << "asymptotic_variance " << fixed6(disguised_asymptotic_variance(inputs)) << "\n";
  std::cout << "exact_gap_variance " << fixed6(exact_gap_variance(inputs)) << "\n";
  return 0;
}

int run_detect(const std::string& scenario_path, const std::string& trace_path,
               double tolerance, const std::string& out) {
  LoadedScenario loaded = load(scenario_path, nullptr);
  const std::string text = read_text_file(trace_path);
  const RunTrace trace = trace_from_csv(text, loaded.scenario);
  const DetectionReport report = increment_stats(trace, tolerance);
  for (const ClientDetection& client : report.clients) {
    std::cout << "client " << client.client_id << " (" << client.role << "): flag_rate "
              << fixed6(client.flag_rate) << ", mean_rms " << fixed6(client.mean_rms)
              << ", loglog_slope "
              << (std::isnan(client.loglog_slope) ? std::string("n/a")
                                                  : fixed6(client.loglog_slope))
              << "\n";
  }
  if (!out.empty()) {
    write_text_file(out, detection_to_json(report).dump(2) + "\n");
    std::cerr << "wrote " << out << "\n";
  }
  return 0;
}

}  // namespace

int cli_main(int argc, const char* const* argv) {
  CLI::App app{"Federated averaging simulator and free-rider analytics"};
  app.require_subcommand(1);

  std::string scenario_path;
  std::uint64_t seed = 0;
  std::string out;
  std::string format = "csv";
  int threads = 1;

  CLI::App* simulate = app.add_subcommand("simulate", "Run one training and export its trace");
  simulate->add_option("--scenario", scenario_path, "Scenario JSON path")->required();
  CLI::Option* sim_seed = simulate->add_option("--seed", seed, "Override the scenario seed");
  simulate->add_option("--out", out, "Output path (default: scenario's output_trace or stdout)");
  simulate->add_option("--format", format, "Trace format: csv|json");
  bool fair_band = false;
  int fair_seeds = 30;
  simulate->add_flag("--fair-band", fair_band,
                     "Run the attacked scenario against a fair-only final-loss band");
  simulate->add_option("--fair-seeds", fair_seeds, "Fair-only replicas for the band");
  simulate->add_option("--threads", threads, "Worker threads for the band replicas");

  std::int64_t replicates = 0;
  std::vector<std::int64_t> checkpoints;
  CLI::App* montecarlo_cmd =
      app.add_subcommand("montecarlo", "Estimate gap moments over replicated runs");
  montecarlo_cmd->add_option("--scenario", scenario_path, "Scenario JSON path")->required();
  CLI::Option* mc_seed = montecarlo_cmd->add_option("--seed", seed, "Override the scenario seed");
  montecarlo_cmd->add_option("--replicates", replicates,
                             "Replicates (default: scenario's replicate_count)");
  montecarlo_cmd->add_option("--checkpoints", checkpoints, "Checkpoint rounds, e.g. 50,100,200")
      ->delimiter(',');
  montecarlo_cmd->add_option("--out", out,
                             "Report path (default: scenario's output_report or none)");
  std::string report_format = "json";
  montecarlo_cmd->add_option("--format", report_format, "Report format: csv|json");
  montecarlo_cmd->add_option("--threads", threads, "Worker threads across replicates");

  CLI::App* theory_cmd =
      app.add_subcommand("theory", "Print the closed-form stationary gap values");
  theory_cmd->add_option("--scenario", scenario_path, "Scenario JSON path")->required();

  std::string trace_path;
  double tolerance = 0.0;
  CLI::App* detect_cmd =
      app.add_subcommand("detect", "Flag plain free-riders and report increment statistics");
  detect_cmd->add_option("--scenario", scenario_path, "Scenario JSON path")->required();
  detect_cmd->add_option("--trace", trace_path, "CSV trace exported by simulate")->required();
  detect_cmd->add_option("--tolerance", tolerance,
                         "Equality tolerance (0.0 demands bit equality)");
  detect_cmd->add_option("--out", out, "Detection report JSON path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    if (app.got_subcommand(simulate)) {
      return run_simulate(scenario_path, sim_seed->count() > 0 ? &seed : nullptr, out, format,
                          fair_band, fair_seeds, threads);
    }
    if (app.got_subcommand(montecarlo_cmd)) {
      return run_montecarlo(scenario_path, mc_seed->count() > 0 ? &seed : nullptr, replicates,
                            checkpoints, out, report_format, threads);
    }
    if (app.got_subcommand(theory_cmd)) {
      return run_theory(scenario_path);
    }
    if (app.got_subcommand(detect_cmd)) {
      return run_detect(scenario_path, trace_path, tolerance, out);
    }
    std::cerr << "error: no subcommand selected\n";
    return 1;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const RuntimeFailure& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace frsim
