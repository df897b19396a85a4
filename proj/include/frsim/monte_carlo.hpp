#pragma once

#include <cstdint>
#include <vector>

#include "frsim/federation.hpp"
#include "frsim/theory.hpp"

namespace frsim {

struct CheckpointMoments {
  std::int64_t round = 0;
  std::vector<double> empirical_mean;      // per coordinate, over replicates
  std::vector<double> empirical_mean_se;   // sqrt(variance / R)
  std::vector<double> empirical_variance;  // unbiased, per coordinate
  std::vector<double> empirical_variance_se;  // sqrt(2/(R-1)) * variance
  double theory_expectation = 0.0;            // stationary gap mean, exactly 0
  double theory_asymptotic_variance = 0.0;    // closed-form target
  double exact_gap_variance = 0.0;            // independent-runs exact value
};

struct MomentReport {
  std::int64_t replicates = 0;
  std::vector<CheckpointMoments> checkpoints;
  double epsilon = 0.0;
  double ratio = 0.0;
};

// Runs R independent coupled simulations with sub-seeds derived from
// (scenario.seed, replicate index) and estimates the moments of the gap
// theta~^t - theta^t at the checkpoint rounds. Replicates may execute on
// several threads; moments reduce in replicate order, so the report is
// bit-identical at any thread count. Requires analytic fair clients, at
// least one of them, and R >= 2. An empty checkpoint list selects
// {50, 100, 200} clipped to the horizon (or {T} when all lie beyond it).
MomentReport monte_carlo(const Scenario& scenario, std::int64_t replicates,
                         std::vector<std::int64_t> checkpoints, int threads = 1);

// Fair-band experiment for descent scenarios: runs the attacked scenario
// once and fair_seeds fair-only replicas with jittered initializations,
// then places the attacked final training loss against the fair-only
// min-max band. Losses are the sample-weighted mean training loss of the
// fair clients' datasets at the global model.
struct BandResult {
  double attacked_final_loss = 0.0;
  double band_min = 0.0;
  double band_max = 0.0;
  bool inside = false;
  std::vector<double> fair_final_losses;   // one per fair-only seed
  std::vector<double> attacked_loss_curve; // global-model loss per round, 0..T
};

BandResult fair_band_experiment(const Scenario& scenario, int fair_seeds, int threads = 1);

// Global-model training loss curve of one run: the weighted mean dataset
// loss of the fair clients at theta~^t for t = 0..T.
std::vector<double> global_loss_curve(const Scenario& scenario, const RunTrace& trace);

}  // namespace frsim
