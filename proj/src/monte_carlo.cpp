#include "frsim/monte_carlo.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>

#include "frsim/errors.hpp"
#include "frsim/theory.hpp"

namespace frsim {
namespace {

// Runs body(rep) for rep in [0, count) on `threads` striped workers. The
// caller owns any per-replicate storage, so results are position-addressed
// and independent of scheduling; the first exception wins and rethrows.
void for_each_replicate(std::int64_t count, int threads,
                        const std::function<void(std::int64_t)>& body) {
  if (threads < 1) {
    throw ValidationError("threads: must be >= 1");
  }
  const int workers = static_cast<int>(std::min<std::int64_t>(threads, count));
  if (workers <= 1) {
    for (std::int64_t rep = 0; rep < count; ++rep) {
      body(rep);
    }
    return;
  }
  std::mutex error_mutex;
  std::exception_ptr first_error;
  auto worker = [&](int id) {
    for (std::int64_t rep = id; rep < count; rep += workers) {
      {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (first_error) {
          return;
        }
      }
      try {
        body(rep);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) {
          first_error = std::current_exception();
        }
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers));
  for (int id = 0; id < workers; ++id) {
    pool.emplace_back(worker, id);
  }
  for (auto& t : pool) {
    t.join();
  }
  if (first_error) {
    std::rethrow_exception(first_error);
  }
}

std::vector<std::int64_t> resolve_checkpoints(std::vector<std::int64_t> checkpoints,
                                              std::int64_t horizon) {
  if (checkpoints.empty()) {
    for (std::int64_t t : {std::int64_t{50}, std::int64_t{100}, std::int64_t{200}}) {
      if (t <= horizon) {
        checkpoints.push_back(t);
      }
    }
    if (checkpoints.empty()) {
      checkpoints.push_back(horizon);
    }
    return checkpoints;
  }
  std::sort(checkpoints.begin(), checkpoints.end());
  checkpoints.erase(std::unique(checkpoints.begin(), checkpoints.end()), checkpoints.end());
  for (std::int64_t t : checkpoints) {
    if (t < 0 || t > horizon) {
      throw ValidationError("checkpoints: round " + std::to_string(t) +
                            " outside the scenario horizon [0, " + std::to_string(horizon) + "]");
    }
  }
  return checkpoints;
}

double fair_client_loss(const FairClientSpec& client, const ParameterVector& theta) {
  if (const auto* sgd = std::get_if<SGDClientSpec>(&client)) {
    return dataset_loss(*sgd, theta);
  }
  if (const auto* phys = std::get_if<OUPhysicalSpec>(&client)) {
    double sq = 0.0;
    for (std::size_t d = 0; d < theta.size(); ++d) {
      const double diff = theta[d] - phys->theta_star[d];
      sq += diff * diff;
    }
    return 0.5 * phys->r * sq;
  }
  throw ValidationError(
      "training loss needs descent (sgd) or hyperparameter-specified (ou_physical) fair "
      "clients; abstract analytic clients declare no loss");
}

double weighted_fair_loss(const Scenario& scenario, const ParameterVector& theta) {
  const double fair_total = static_cast<double>(scenario.fair_samples());
  double loss = 0.0;
  for (const auto& client : scenario.fair_clients) {
    const double weight =
        static_cast<double>(std::visit([](const auto& s) { return s.samples; }, client)) /
        fair_total;
    loss += weight * fair_client_loss(client, theta);
  }
  return loss;
}

}  // namespace

MomentReport monte_carlo(const Scenario& scenario, std::int64_t replicates,
                         std::vector<std::int64_t> checkpoints, int threads) {
  scenario.validate();
  if (scenario.has_sgd_clients()) {
    throw ValidationError(
        "moment estimation compares against closed forms defined for analytic clients; "
        "descent (sgd) clients are unsupported here");
  }
  if (replicates < 2) {
    throw ValidationError("replicates: need >= 2 for variance estimates");
  }
  const TheoryInputs inputs = TheoryInputs::from_scenario(scenario);
  inputs.validate();
  checkpoints = resolve_checkpoints(std::move(checkpoints), scenario.rounds);

  const std::size_t dim = scenario.dim();
  const std::size_t cp_count = checkpoints.size();
  // gaps[rep * cp_count + c] holds the gap vector of replicate rep at
  // checkpoint c; position addressing keeps the reduction replicate-ordered
  // and therefore bit-identical at any thread count.
  std::vector<ParameterVector> gaps(static_cast<std::size_t>(replicates) * cp_count);

  for_each_replicate(replicates, threads, [&](std::int64_t rep) {
    const CoupledTrace coupled =
        run_coupled(scenario, replicate_seed(scenario.seed, static_cast<std::uint64_t>(rep)));
    for (std::size_t c = 0; c < cp_count; ++c) {
      gaps[static_cast<std::size_t>(rep) * cp_count + c] = coupled.gap_at(checkpoints[c]);
    }
  });

  MomentReport report;
  report.replicates = replicates;
  report.epsilon = inputs.epsilon();
  report.ratio = inputs.ratio();
  const double theory_variance = disguised_asymptotic_variance(inputs);
  const double exact_variance = exact_gap_variance(inputs);
  const double R = static_cast<double>(replicates);

  for (std::size_t c = 0; c < cp_count; ++c) {
    CheckpointMoments cp;
    cp.round = checkpoints[c];
    cp.empirical_mean.assign(dim, 0.0);
    cp.empirical_variance.assign(dim, 0.0);
    for (std::int64_t rep = 0; rep < replicates; ++rep) {
      const ParameterVector& gap = gaps[static_cast<std::size_t>(rep) * cp_count + c];
      for (std::size_t d = 0; d < dim; ++d) {
        cp.empirical_mean[d] += gap[d] / R;
      }
    }
    for (std::int64_t rep = 0; rep < replicates; ++rep) {
      const ParameterVector& gap = gaps[static_cast<std::size_t>(rep) * cp_count + c];
      for (std::size_t d = 0; d < dim; ++d) {
        const double centered = gap[d] - cp.empirical_mean[d];
        cp.empirical_variance[d] += centered * centered / (R - 1.0);
      }
    }
    cp.empirical_mean_se.resize(dim);
    cp.empirical_variance_se.resize(dim);
    for (std::size_t d = 0; d < dim; ++d) {
      cp.empirical_mean_se[d] = std::sqrt(cp.empirical_variance[d] / R);
      cp.empirical_variance_se[d] = std::sqrt(2.0 / (R - 1.0)) * cp.empirical_variance[d];
    }
    cp.theory_expectation = 0.0;
    cp.theory_asymptotic_variance = theory_variance;
    cp.exact_gap_variance = exact_variance;
    report.checkpoints.push_back(std::move(cp));
  }
  return report;
}

BandResult fair_band_experiment(const Scenario& scenario, int fair_seeds, int threads) {
  scenario.validate();
  if (scenario.fair_clients.empty()) {
    throw ValidationError("fair band: at least one fair client required");
  }
  if (fair_seeds < 1) {
    throw ValidationError("fair band: need >= 1 fair-only seed");
  }

  BandResult result;
  const RunTrace attacked = run_training(scenario);
  result.attacked_loss_curve = global_loss_curve(scenario, attacked);
  result.attacked_final_loss = result.attacked_loss_curve.back();

  Scenario fair_scenario = scenario;
  fair_scenario.free_riders.clear();

  result.fair_final_losses.assign(static_cast<std::size_t>(fair_seeds), 0.0);
  for_each_replicate(fair_seeds, threads, [&](std::int64_t rep) {
    const std::uint64_t sub_seed =
        replicate_seed(scenario.seed, static_cast<std::uint64_t>(rep));
    Scenario run = fair_scenario;
    // Jittered initialization: each fair-only replica starts from its own
    // draw around theta0, client slot 2^32-1 is reserved for this stream.
    RoundRng init_rng(sub_seed, RunId::kFair, 0, 0xFFFFFFFFull);
    for (std::size_t d = 0; d < run.theta0.size(); ++d) {
      run.theta0[d] += 0.1 * init_rng.normal(Stream::kInit, d);
    }
    const RunTrace trace = run_training(run, sub_seed, RunId::kFair);
    result.fair_final_losses[static_cast<std::size_t>(rep)] =
        weighted_fair_loss(run, trace.final_theta);
  });

  result.band_min = *std::min_element(result.fair_final_losses.begin(),
                                      result.fair_final_losses.end());
  result.band_max = *std::max_element(result.fair_final_losses.begin(),
                                      result.fair_final_losses.end());
  result.inside = result.attacked_final_loss >= result.band_min &&
                  result.attacked_final_loss <= result.band_max;
  return result;
}

std::vector<double> global_loss_curve(const Scenario& scenario, const RunTrace& trace) {
  if (scenario.fair_clients.empty()) {
    throw ValidationError("loss curve: at least one fair client required");
  }
  std::vector<double> curve;
  curve.reserve(trace.rounds.size() + 1);
  for (std::int64_t t = 0; t <= static_cast<std::int64_t>(trace.rounds.size()); ++t) {
    curve.push_back(weighted_fair_loss(scenario, trace.state_at(t)));
  }
  return curve;
}

}  // namespace frsim
