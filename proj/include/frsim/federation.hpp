#pragma once

#include <cstdint>
#include <limits>
#include <utility>
#include <variant>
#include <vector>

#include "frsim/attacks.hpp"
#include "frsim/local_models.hpp"
#include "frsim/rng.hpp"
#include "frsim/vector_ops.hpp"

namespace frsim {

struct Scheme {
  enum class Kind { kFedAvg, kFedProx };
  Kind kind = Kind::kFedAvg;
  double mu = 0.0;  // proximal weight, FedProx only
};

using FairClientSpec = std::variant<OUClientSpec, OUPhysicalSpec, SGDClientSpec>;

struct Scenario {
  std::vector<FairClientSpec> fair_clients;
  std::vector<FreeRiderSpec> free_riders;
  Scheme scheme;
  std::int64_t rounds = 100;
  std::uint64_t seed = 0;
  ParameterVector theta0;
  std::int64_t replicate_count = 1;

  // Throws ValidationError naming the offending field. The degenerate case
  // with no fair clients is accepted here (the averaging loop handles it)
  // and rejected by the moment and theory evaluators, whose contraction
  // ratio would reach 1.
  void validate() const;

  std::size_t dim() const { return theta0.size(); }
  std::int64_t fair_samples() const;
  std::int64_t rider_samples() const;
  std::int64_t total_samples() const { return fair_samples() + rider_samples(); }
  bool has_sgd_clients() const;
  double mu() const { return scheme.kind == Scheme::Kind::kFedProx ? scheme.mu : 0.0; }
};

// Fair clients with scheme-dependent coefficients resolved: every
// hyperparameter-specified client becomes a plain analytic client under the
// scenario's proximal weight. Descent clients pass through unchanged.
std::vector<FairClientSpec> resolve_fair_clients(const Scenario& scenario);

// One client's contribution to a round.
struct ClientRecord {
  ParameterVector upload;
  ParameterVector noise;     // standard normal draws used (empty when none)
  double noise_scale = 0.0;  // rho(t) or phi(t) actually applied
  double loss = std::numeric_limits<double>::quiet_NaN();  // descent clients only
  bool plain = false;        // upload equals the broadcast bit-for-bit
};

struct RoundTrace {
  std::int64_t round = 0;
  ParameterVector theta_global;  // broadcast at the start of the round
  std::vector<ClientRecord> fair;
  std::vector<ClientRecord> riders;
  ParameterVector aggregated;  // weighted average of all uploads
};

struct RunTrace {
  ParameterVector theta0;
  std::vector<RoundTrace> rounds;
  ParameterVector final_theta;
  // Per rider: the sigma substituted after the first global increment, or
  // NaN when the rider does not calibrate.
  std::vector<double> calibrated_sigma;

  // Broadcast state before round t, i.e. after t aggregations; t in [0, T].
  const ParameterVector& state_at(std::int64_t t) const;
};

// Mutable per-run free-rider state: schedules with any pending sigma
// calibration applied once the first global increment has been observed.
struct RiderState {
  std::vector<std::optional<NoiseSchedule>> schedules;
  std::vector<double> calibrated_sigma;  // NaN until calibrated
  std::vector<bool> pending;

  static RiderState init(const Scenario& scenario);
  void observe_increment(const Scenario& scenario, const ParameterVector& increment);
};

// Executes round t: every fair client updates from theta_global, every
// free-rider forwards or disguises it, and the next global model is the
// sample-weighted average of all uploads. Client errors propagate with the
// client index and round attached.
std::pair<ParameterVector, RoundTrace> run_round(const ParameterVector& theta_global,
                                                 const Scenario& scenario, std::int64_t t,
                                                 std::uint64_t seed, RunId run,
                                                 RiderState& riders);

// Runs all rounds of the scenario with its own seed; deterministic.
RunTrace run_training(const Scenario& scenario);
RunTrace run_training(const Scenario& scenario, std::uint64_t seed, RunId run);

// Paired simulation: the fair-only process (weights over N - M_K) and the
// attacked process (weights over N) from the same theta0 with independent
// noise streams, plus the recorded per-round pieces of the gap recurrence.
struct CoupledTrace {
  RunTrace fair_run;
  RunTrace attacked_run;
  std::vector<ParameterVector> f_term;       // drift from withheld training, at fair states
  std::vector<ParameterVector> nu_fair;      // aggregate fair-run noise
  std::vector<ParameterVector> nu_attacked;  // aggregate fair-client noise, attacked run
  std::vector<ParameterVector> rider_term;   // aggregate disguise noise injected
  double epsilon = 0.0;  // sum_j (M_j/N) eta_j
  double ratio = 0.0;    // epsilon + M_K/N, the per-round gap contraction

  // Directly simulated gap theta~^t - theta^t.
  ParameterVector gap_at(std::int64_t t) const;
};

// Requires analytic fair clients (descent clients cannot provide the exact
// noise bookkeeping) and at least one fair client.
CoupledTrace run_coupled(const Scenario& scenario, std::uint64_t seed);
CoupledTrace run_coupled(const Scenario& scenario);

// Evaluates the recorded recurrence
//   sum_{i<t} ratio^(t-1-i) * (f(theta^i) + nu~_i - nu_i + rider_i)
// which reproduces the simulated gap exactly up to rounding.
ParameterVector recurrence_difference(const CoupledTrace& coupled, std::int64_t t);

}  // namespace frsim
