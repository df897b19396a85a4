#pragma once

#include <cstdint>
#include <vector>

#include "frsim/federation.hpp"

namespace frsim {

struct TheoryFairClient {
  std::int64_t samples = 0;
  double eta = 0.0;
  double rho = 0.0;
};

struct TheoryRider {
  std::int64_t samples = 0;
  double phi = 0.0;  // 0 for plain free-riders
};

// Scalar per-coordinate inputs of the closed-form evaluators. Time-varying
// scales enter through their limits; proximal scenarios enter through the
// derived primed coefficients.
struct TheoryInputs {
  std::vector<TheoryFairClient> fair;
  std::vector<TheoryRider> riders;

  std::int64_t fair_samples() const;
  std::int64_t rider_samples() const;
  std::int64_t total_samples() const { return fair_samples() + rider_samples(); }
  double epsilon() const;  // sum_j (M_j/N) eta_j
  double ratio() const;    // epsilon + M_K/N, must stay below 1
  void validate() const;

  static TheoryInputs from_scenario(const Scenario& scenario);
};

// Closed-form stationary gap variance under plain free-riding:
//   [1/N^2 + 1/(N-M_K)^2] * sum_j (M_j rho_j)^2 / (1 - ratio^2),
// with the stationary gap expectation exactly 0. Requires M_K < N; at
// M_K = N the contraction ratio reaches 1 and the variance diverges.
//
// Note: for two independently seeded runs the measured gap variance
// converges to exact_gap_variance below, which is smaller; the comparison
// harness reports both. See README, "Closed forms vs. measured variance".
double plain_asymptotic_variance(const TheoryInputs& inputs);

// Plain value plus sum_k (M_k/N)^2 phi_k^2 / (1 - ratio^2).
double disguised_asymptotic_variance(const TheoryInputs& inputs);

// Same closed forms evaluated at the schedules' limits; inputs built from
// decaying schedules carry those limits, so all-zero limits give exactly 0.
double decaying_noise_asymptotic_variance(const TheoryInputs& inputs);

// Resolves primed coefficients for the proximal scheme from the scenario's
// hyperparameter-specified clients, then applies the closed forms above.
double fedprox_asymptotic_variance(const Scenario& scenario);

// Exact stationary variance of theta~^t - theta^t for independently seeded
// coupled runs. The fair-only reference fluctuates around its fixed point
// with its own contraction a = sum_j (M_j/(N-M_K)) eta_j, so the gap
// variance is
//   s^2/(1-a^2) + (s~^2 + sum_k (M_k/N)^2 phi_k^2) / (1 - ratio^2)
// with s^2 = sum_j (M_j/(N-M_K))^2 rho_j^2 and s~^2 = sum_j (M_j/N)^2 rho_j^2.
// Supplementary diagnostic that validates the simulator itself.
double exact_gap_variance(const TheoryInputs& inputs);

// The plain closed form rewritten as a ratio of polynomials in the rider
// total x at fixed fair clients (F = sum_j M_j, A = sum_j M_j eta_j):
//   sum_j (M_j rho_j)^2 * (x^2/F^2 + 2x/F + 2) / (F^2 + 2x(F-A) - A^2).
// Used to cross-check monotonicity in the rider total at large x.
double plain_variance_rational_form(const TheoryInputs& inputs, std::int64_t rider_total);

struct MKGridPoint {
  std::int64_t rider_samples = 0;
  std::int64_t total_samples = 0;  // changes with the grid point
  double variance = 0.0;
};

struct MonotonicityReport {
  std::vector<MKGridPoint> points;
  bool strictly_increasing = false;
};

// Evaluates the plain closed form across rider totals at fixed fair clients
// (each grid point replaces the rider list by one plain rider). The report
// carries the per-point total N because it changes with the rider total.
MonotonicityReport variance_monotonic_in_MK(const TheoryInputs& inputs,
                                            const std::vector<std::int64_t>& mk_grid);

}  // namespace frsim
