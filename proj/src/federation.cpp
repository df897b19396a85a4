#include "frsim/federation.hpp"

#include <cmath>
#include <string>

namespace frsim {

namespace {

SampleWeights participant_weights(const Scenario& scenario) {
  std::vector<std::int64_t> counts;
  counts.reserve(scenario.fair_clients.size() + scenario.free_riders.size());
  for (const auto& spec : scenario.fair_clients) {
    counts.push_back(std::visit([](const auto& c) { return c.samples; }, spec));
  }
  for (const auto& rider : scenario.free_riders) {
    counts.push_back(rider.samples);
  }
  return SampleWeights::from_counts(std::move(counts));
}

ClientRecord fair_upload(const FairClientSpec& resolved, const ParameterVector& theta,
                         std::int64_t round, const RoundRng& rng, double mu) {
  ClientRecord record;
  if (const auto* ou = std::get_if<OUClientSpec>(&resolved)) {
    // Noise-schedule index is 1-based so decaying scales are never
    // evaluated at 0.
    const std::int64_t t = round + 1;
    record.noise.resize(theta.size());
    for (std::size_t d = 0; d < theta.size(); ++d) {
      record.noise[d] = rng.normal(Stream::kLocalNoise, d);
    }
    record.noise_scale = ou->rho_at(t);
    record.upload = ou_local_update(theta, *ou, t, record.noise);
    return record;
  }
  if (const auto* sgd = std::get_if<SGDClientSpec>(&resolved)) {
    LocalSgdResult result = sgd_local_update(theta, *sgd, ProxConfig{mu}, rng);
    record.upload = std::move(result.theta);
    record.loss = result.training_loss;
    return record;
  }
  throw ValidationError("fair_upload: hyperparameter client not resolved");
}

ClientRecord rider_upload(const FreeRiderSpec& spec, const std::optional<NoiseSchedule>& schedule,
                          bool pending, const ParameterVector& theta, std::int64_t round,
                          const RoundRng& rng) {
  ClientRecord record;
  if (spec.plain() || pending) {
    record.upload = plain_update(theta);
    record.plain = true;
    return record;
  }
  // Calibrated riders spent round 0 plain, so their schedule clock lags the
  // round index by one; either way the clock starts at 1.
  const std::int64_t t = spec.calibrate_sigma ? round : round + 1;
  record.noise.resize(theta.size());
  for (std::size_t d = 0; d < theta.size(); ++d) {
    record.noise[d] = rng.normal(Stream::kRiderNoise, d);
  }
  record.noise_scale = phi_at(*schedule, t);
  record.upload = disguised_update(theta, *schedule, t, record.noise);
  return record;
}

std::pair<ParameterVector, RoundTrace> run_round_impl(
    const ParameterVector& theta_global, const Scenario& scenario,
    const std::vector<FairClientSpec>& resolved, std::int64_t t, std::uint64_t seed, RunId run,
    RiderState& riders) {
  RoundTrace trace;
  trace.round = t;
  trace.theta_global = theta_global;
  trace.fair.reserve(resolved.size());
  trace.riders.reserve(scenario.free_riders.size());

  std::vector<ParameterVector> uploads;
  uploads.reserve(resolved.size() + scenario.free_riders.size());
  const double mu = scenario.mu();

  for (std::size_t j = 0; j < resolved.size(); ++j) {
    const RoundRng rng(seed, run, static_cast<std::uint64_t>(t), j);
    try {
      trace.fair.push_back(fair_upload(resolved[j], theta_global, t, rng, mu));
    } catch (const RuntimeFailure& e) {
      throw RuntimeFailure("round " + std::to_string(t) + ", fair client " + std::to_string(j) +
                           ": " + e.what());
    } catch (const ValidationError& e) {
      throw ValidationError("round " + std::to_string(t) + ", fair client " + std::to_string(j) +
                            ": " + e.what());
    }
    uploads.push_back(trace.fair.back().upload);
  }
  for (std::size_t k = 0; k < scenario.free_riders.size(); ++k) {
    const RoundRng rng(seed, run, static_cast<std::uint64_t>(t), resolved.size() + k);
    try {
      trace.riders.push_back(rider_upload(scenario.free_riders[k], riders.schedules[k],
                                          riders.pending[k], theta_global, t, rng));
    } catch (const ValidationError& e) {
      throw ValidationError("round " + std::to_string(t) + ", rider " + std::to_string(k) + ": " +
                            e.what());
    }
    uploads.push_back(trace.riders.back().upload);
  }

  trace.aggregated = weighted_average(uploads, participant_weights(scenario));
  return {trace.aggregated, std::move(trace)};
}

}  // namespace

void Scenario::validate() const {
  if (theta0.empty()) {
    throw ValidationError("theta0: required, dim >= 1");
  }
  check_finite(theta0, "theta0");
  if (rounds < 0) {
    throw ValidationError("rounds: must be >= 0");
  }
  if (replicate_count < 1) {
    throw ValidationError("replicate_count: must be >= 1");
  }
  if (scheme.kind == Scheme::Kind::kFedProx) {
    if (scheme.mu < 0.0 || !std::isfinite(scheme.mu)) {
      throw ValidationError("scheme.mu: must be >= 0 and finite");
    }
  }
  const std::size_t d = theta0.size();
  for (std::size_t j = 0; j < fair_clients.size(); ++j) {
    const std::string label = "fair_clients[" + std::to_string(j) + "]";
    std::visit([&](const auto& spec) { spec.validate(label); }, fair_clients[j]);
    if (const auto* ou = std::get_if<OUClientSpec>(&fair_clients[j])) {
      if (ou->theta_star.size() != d) {
        throw ValidationError(label + ".theta_star: dimension mismatch with theta0");
      }
      if (scheme.kind == Scheme::Kind::kFedProx) {
        throw ValidationError(label +
                              ": the proximal scheme needs hyperparameter-specified analytic "
                              "clients (ou_physical) or descent clients (sgd)");
      }
    } else if (const auto* phys = std::get_if<OUPhysicalSpec>(&fair_clients[j])) {
      if (phys->theta_star.size() != d) {
        throw ValidationError(label + ".theta_star: dimension mismatch with theta0");
      }
    } else if (const auto* sgd = std::get_if<SGDClientSpec>(&fair_clients[j])) {
      if (!sgd->features.empty() && sgd->features[0].size() != d) {
        throw ValidationError(label + ".features: dimension mismatch with theta0");
      }
    }
  }
  for (std::size_t k = 0; k < free_riders.size(); ++k) {
    free_riders[k].validate("free_riders[" + std::to_string(k) + "]");
  }
  if (fair_clients.empty() && free_riders.empty()) {
    throw ValidationError("fair_clients: at least one participant required");
  }
}

std::int64_t Scenario::fair_samples() const {
  std::int64_t total = 0;
  for (const auto& spec : fair_clients) {
    total += std::visit([](const auto& c) { return c.samples; }, spec);
  }
  return total;
}

std::int64_t Scenario::rider_samples() const {
  std::int64_t total = 0;
  for (const auto& rider : free_riders) {
    total += rider.samples;
  }
  return total;
}

bool Scenario::has_sgd_clients() const {
  for (const auto& spec : fair_clients) {
    if (std::holds_alternative<SGDClientSpec>(spec)) {
      return true;
    }
  }
  return false;
}

std::vector<FairClientSpec> resolve_fair_clients(const Scenario& scenario) {
  std::vector<FairClientSpec> resolved;
  resolved.reserve(scenario.fair_clients.size());
  const double mu = scenario.mu();
  for (const auto& spec : scenario.fair_clients) {
    if (const auto* phys = std::get_if<OUPhysicalSpec>(&spec)) {
      resolved.emplace_back(phys->resolve(mu));
    } else {
      resolved.push_back(spec);
    }
  }
  return resolved;
}

const ParameterVector& RunTrace::state_at(std::int64_t t) const {
  const auto count = static_cast<std::int64_t>(rounds.size());
  if (t < 0 || t > count) {
    throw ValidationError("state_at: round " + std::to_string(t) + " outside [0, " +
                          std::to_string(count) + "]");
  }
  if (t == count) {
    return count == 0 ? theta0 : final_theta;
  }
  return rounds[static_cast<std::size_t>(t)].theta_global;
}

RiderState RiderState::init(const Scenario& scenario) {
  RiderState state;
  const std::size_t K = scenario.free_riders.size();
  state.schedules.reserve(K);
  state.calibrated_sigma.assign(K, std::numeric_limits<double>::quiet_NaN());
  state.pending.assign(K, false);
  for (std::size_t k = 0; k < K; ++k) {
    state.schedules.push_back(scenario.free_riders[k].schedule);
    state.pending[k] = scenario.free_riders[k].calibrate_sigma &&
                       scenario.free_riders[k].schedule.has_value();
  }
  return state;
}

void RiderState::observe_increment(const Scenario& scenario, const ParameterVector& increment) {
  for (std::size_t k = 0; k < pending.size(); ++k) {
    if (!pending[k]) {
      continue;
    }
    const double sigma_hat =
        scenario.free_riders[k].calibration_scale * estimate_sigma(increment);
    schedules[k] = calibrated_schedule(*scenario.free_riders[k].schedule, sigma_hat);
    calibrated_sigma[k] = sigma_hat;
    pending[k] = false;
  }
}

std::pair<ParameterVector, RoundTrace> run_round(const ParameterVector& theta_global,
                                                 const Scenario& scenario, std::int64_t t,
                                                 std::uint64_t seed, RunId run,
                                                 RiderState& riders) {
  if (t < 0 || t >= scenario.rounds) {
    throw ValidationError("run_round: round " + std::to_string(t) + " outside [0, " +
                          std::to_string(scenario.rounds) + ")");
  }
  return run_round_impl(theta_global, scenario, resolve_fair_clients(scenario), t, seed, run,
                        riders);
}

RunTrace run_training(const Scenario& scenario) {
  return run_training(scenario, scenario.seed, RunId::kAttacked);
}

RunTrace run_training(const Scenario& scenario, std::uint64_t seed, RunId run) {
  scenario.validate();
  const std::vector<FairClientSpec> resolved = resolve_fair_clients(scenario);
  RiderState riders = RiderState::init(scenario);

  RunTrace trace;
  trace.theta0 = scenario.theta0;
  trace.rounds.reserve(static_cast<std::size_t>(scenario.rounds));
  ParameterVector theta = scenario.theta0;
  for (std::int64_t t = 0; t < scenario.rounds; ++t) {
    auto [next, round_trace] = run_round_impl(theta, scenario, resolved, t, seed, run, riders);
    if (t == 0) {
      ParameterVector increment(next.size());
      for (std::size_t d = 0; d < next.size(); ++d) {
        increment[d] = next[d] - theta[d];
      }
      riders.observe_increment(scenario, increment);
    }
    trace.rounds.push_back(std::move(round_trace));
    theta = std::move(next);
  }
  trace.final_theta = std::move(theta);
  trace.calibrated_sigma = std::move(riders.calibrated_sigma);
  return trace;
}

ParameterVector CoupledTrace::gap_at(std::int64_t t) const {
  const ParameterVector& attacked = attacked_run.state_at(t);
  const ParameterVector& fair = fair_run.state_at(t);
  ParameterVector gap(attacked.size());
  for (std::size_t d = 0; d < gap.size(); ++d) {
    gap[d] = attacked[d] - fair[d];
  }
  return gap;
}

CoupledTrace run_coupled(const Scenario& scenario) { return run_coupled(scenario, scenario.seed); }

CoupledTrace run_coupled(const Scenario& scenario, std::uint64_t seed) {
  scenario.validate();
  if (scenario.has_sgd_clients()) {
    throw ValidationError(
        "run_coupled: descent clients unsupported; exact noise bookkeeping needs analytic "
        "clients");
  }
  if (scenario.fair_clients.empty()) {
    throw ValidationError("run_coupled: at least one fair client required");
  }

  CoupledTrace coupled;
  coupled.attacked_run = run_training(scenario, seed, RunId::kAttacked);
  Scenario fair_scenario = scenario;
  fair_scenario.free_riders.clear();
  coupled.fair_run = run_training(fair_scenario, seed, RunId::kFair);

  const std::vector<FairClientSpec> resolved = resolve_fair_clients(scenario);
  const double N = static_cast<double>(scenario.total_samples());
  const double NF = static_cast<double>(scenario.fair_samples());
  const double MK = static_cast<double>(scenario.rider_samples());
  const std::size_t dim = scenario.dim();

  double epsilon = 0.0;
  for (const auto& spec : resolved) {
    const auto& ou = std::get<OUClientSpec>(spec);
    epsilon += static_cast<double>(ou.samples) / N * ou.eta;
  }
  coupled.epsilon = epsilon;
  coupled.ratio = epsilon + MK / N;

  const auto T = static_cast<std::size_t>(scenario.rounds);
  coupled.f_term.assign(T, ParameterVector(dim, 0.0));
  coupled.nu_fair.assign(T, ParameterVector(dim, 0.0));
  coupled.nu_attacked.assign(T, ParameterVector(dim, 0.0));
  coupled.rider_term.assign(T, ParameterVector(dim, 0.0));

  for (std::size_t i = 0; i < T; ++i) {
    const ParameterVector& theta_fair = coupled.fair_run.rounds[i].theta_global;
    // Drift created by the riders' withheld training, evaluated along the
    // fair-only path: (M_K/N) * (theta - fair-weighted one-round map).
    for (std::size_t d = 0; d < dim; ++d) {
      double mapped = 0.0;
      for (const auto& spec : resolved) {
        const auto& ou = std::get<OUClientSpec>(spec);
        const double w = static_cast<double>(ou.samples) / NF;
        mapped += w * (ou.eta * (theta_fair[d] - ou.theta_star[d]) + ou.theta_star[d]);
      }
      coupled.f_term[i][d] = MK / N * (theta_fair[d] - mapped);
    }
    for (std::size_t j = 0; j < resolved.size(); ++j) {
      const auto& ou = std::get<OUClientSpec>(resolved[j]);
      const ClientRecord& fair_rec = coupled.fair_run.rounds[i].fair[j];
      const ClientRecord& att_rec = coupled.attacked_run.rounds[i].fair[j];
      const double w_fair = static_cast<double>(ou.samples) / NF;
      const double w_att = static_cast<double>(ou.samples) / N;
      for (std::size_t d = 0; d < dim; ++d) {
        coupled.nu_fair[i][d] += w_fair * fair_rec.noise_scale * fair_rec.noise[d];
        coupled.nu_attacked[i][d] += w_att * att_rec.noise_scale * att_rec.noise[d];
      }
    }
    for (std::size_t k = 0; k < scenario.free_riders.size(); ++k) {
      const ClientRecord& rec = coupled.attacked_run.rounds[i].riders[k];
      if (rec.noise.empty()) {
        continue;  // plain round injects nothing
      }
      const double w = static_cast<double>(scenario.free_riders[k].samples) / N;
      for (std::size_t d = 0; d < dim; ++d) {
        coupled.rider_term[i][d] += w * rec.noise_scale * rec.noise[d];
      }
    }
  }
  return coupled;
}

ParameterVector recurrence_difference(const CoupledTrace& coupled, std::int64_t t) {
  const auto T = static_cast<std::int64_t>(coupled.f_term.size());
  if (t < 0 || t > T) {
    throw ValidationError("recurrence_difference: round " + std::to_string(t) + " outside [0, " +
                          std::to_string(T) + "]");
  }
  const std::size_t dim =
      coupled.f_term.empty() ? coupled.fair_run.theta0.size() : coupled.f_term[0].size();
  ParameterVector acc(dim, 0.0);
  for (std::int64_t i = 0; i < t; ++i) {
    const auto idx = static_cast<std::size_t>(i);
    for (std::size_t d = 0; d < dim; ++d) {
      acc[d] = coupled.ratio * acc[d] + coupled.f_term[idx][d] + coupled.nu_attacked[idx][d] -
               coupled.nu_fair[idx][d] + coupled.rider_term[idx][d];
    }
  }
  return acc;
}

}  // namespace frsim
