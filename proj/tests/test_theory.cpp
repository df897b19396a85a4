#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "frsim/errors.hpp"
#include "frsim/theory.hpp"

using namespace frsim;

namespace {

// Two equal fair clients (eta = 0.5, rho = 0.1) facing one plain rider of
// the same size: epsilon = 1/3, ratio = 2/3, stationary variance 0.013.
TheoryInputs base_inputs() {
  TheoryInputs inputs;
  inputs.fair = {TheoryFairClient{100, 0.5, 0.1}, TheoryFairClient{100, 0.5, 0.1}};
  inputs.riders = {TheoryRider{100, 0.0}};
  return inputs;
}

Scenario physical_prox_scenario(double mu) {
  Scenario scenario;
  OUPhysicalSpec phys;
  phys.samples = 100;
  phys.lr = 0.1;
  phys.r = 1.0;
  phys.sigma = 1.0;
  phys.epochs = 1.0;
  phys.batch = 10.0;
  phys.theta_star = {1.0};
  scenario.fair_clients = {phys, phys};
  FreeRiderSpec rider;
  rider.samples = 100;
  scenario.free_riders = {rider};
  scenario.rounds = 100;
  scenario.theta0 = {0.0};
  if (mu > 0.0) {
    scenario.scheme.kind = Scheme::Kind::kFedProx;
    scenario.scheme.mu = mu;
  }
  return scenario;
}

}  // namespace

TEST_CASE("plain stationary variance, hand-checked") {
  const TheoryInputs inputs = base_inputs();
  CHECK(inputs.epsilon() == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  CHECK(inputs.ratio() == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  CHECK(plain_asymptotic_variance(inputs) == doctest::Approx(0.013).epsilon(1e-12));

  // No rider noise sources: variance 0.
  TheoryInputs quiet = inputs;
  quiet.fair[0].rho = 0.0;
  quiet.fair[1].rho = 0.0;
  CHECK(plain_asymptotic_variance(quiet) == 0.0);

  // No riders at all: the prefactor keeps both weighting terms.
  TheoryInputs no_riders = inputs;
  no_riders.riders.clear();
  CHECK(plain_asymptotic_variance(no_riders) == doctest::Approx(0.0133333333333333).epsilon(1e-12));
}

TEST_CASE("disguised variance adds the rider noise term") {
  TheoryInputs inputs = base_inputs();
  inputs.riders[0].phi = 0.2;
  CHECK(disguised_asymptotic_variance(inputs) == doctest::Approx(0.021).epsilon(1e-12));

  // Splitting the rider in two at half the samples halves the added term.
  TheoryInputs split = base_inputs();
  split.riders = {TheoryRider{50, 0.2}, TheoryRider{50, 0.2}};
  CHECK(disguised_asymptotic_variance(split) == doctest::Approx(0.017).epsilon(1e-12));

  // phi = 0 reduces to the plain form exactly.
  TheoryInputs plain = base_inputs();
  CHECK(disguised_asymptotic_variance(plain) == plain_asymptotic_variance(plain));
}

TEST_CASE("decaying schedules are evaluated at their limits") {
  // All limits zero: the stationary variance vanishes.
  TheoryInputs zeroed = base_inputs();
  zeroed.fair[0].rho = 0.0;
  zeroed.fair[1].rho = 0.0;
  CHECK(decaying_noise_asymptotic_variance(zeroed) == 0.0);

  // Nonzero limits evaluate exactly like the constant-scale form.
  TheoryInputs limits = base_inputs();
  limits.riders[0].phi = 0.2;
  CHECK(decaying_noise_asymptotic_variance(limits) == disguised_asymptotic_variance(limits));

  // Mixed case: fair noise decaying to 0, rider level 0.2. Only the rider
  // term survives: (1/9) * 0.04 / (1 - 4/9) = 0.008.
  TheoryInputs mixed = base_inputs();
  mixed.fair[0].rho = 0.0;
  mixed.fair[1].rho = 0.0;
  mixed.riders[0].phi = 0.2;
  CHECK(decaying_noise_asymptotic_variance(mixed) == doctest::Approx(0.008).epsilon(1e-12));
}

TEST_CASE("proximal variance decreases in the proximal weight") {
  const std::vector<double> mu_grid{0.0, 0.5, 1.0, 2.0};
  const std::vector<double> expected{0.00469366, 0.00400387, 0.0035926, 0.00317878};
  double prev = 1e300;
  for (std::size_t i = 0; i < mu_grid.size(); ++i) {
    const double v = fedprox_asymptotic_variance(physical_prox_scenario(mu_grid[i]));
    CHECK(v == doctest::Approx(expected[i]).epsilon(1e-5));
    CHECK(v < prev);
    prev = v;
  }
  CHECK(fedprox_asymptotic_variance(physical_prox_scenario(10.0)) <
        fedprox_asymptotic_variance(physical_prox_scenario(1.0)));

  // mu = 0 agrees with the unregularized closed form bit for bit.
  const Scenario base = physical_prox_scenario(0.0);
  CHECK(fedprox_asymptotic_variance(base) ==
        plain_asymptotic_variance(TheoryInputs::from_scenario(base)));
}

TEST_CASE("exact coupled-run gap variance") {
  // The fair-only reference fluctuates around its own fixed point, so the
  // independent-runs variance is smaller than the closed form above:
  // s^2/(1-a^2) + s~^2/(1-H^2) with a = 0.5, s^2 = 0.005, s~^2 = 0.0022222.
  const TheoryInputs inputs = base_inputs();
  CHECK(exact_gap_variance(inputs) == doctest::Approx(0.0106666666666667).epsilon(1e-12));
  CHECK(exact_gap_variance(inputs) < plain_asymptotic_variance(inputs));

  // Proximal configuration at mu = 1.
  const Scenario prox = physical_prox_scenario(1.0);
  CHECK(exact_gap_variance(TheoryInputs::from_scenario(prox)) ==
        doctest::Approx(0.00291598).epsilon(1e-5));
}

TEST_CASE("rational form in the rider total matches the direct evaluation") {
  const TheoryInputs inputs = base_inputs();
  for (std::int64_t x : {std::int64_t{0}, std::int64_t{50}, std::int64_t{100}, std::int64_t{200},
                         std::int64_t{400}, std::int64_t{100000}}) {
    TheoryInputs at_x = inputs;
    at_x.riders.clear();
    if (x > 0) {
      at_x.riders = {TheoryRider{x, 0.0}};
    }
    const double direct = plain_asymptotic_variance(at_x);
    const double rational = plain_variance_rational_form(inputs, x);
    // The two evaluation orders round differently; agreement to 1e-13
    // relative certifies the algebraic identity.
    CHECK(std::abs(direct - rational) <= 1e-13 * std::max(1.0, std::abs(direct)));
  }

  // For large rider totals the form grows like x^2 / (2x(F-A)) -> infinity.
  CHECK(plain_variance_rational_form(inputs, 100000) >
        plain_variance_rational_form(inputs, 10000));
}

TEST_CASE("variance grows with the rider total on the positive grid") {
  const std::vector<std::int64_t> grid{0, 50, 100, 200, 400};
  const MonotonicityReport report = variance_monotonic_in_MK(base_inputs(), grid);
  REQUIRE(report.points.size() == 5);
  const std::vector<double> expected{0.0133333333333333, 0.0128125, 0.013, 0.0142857142857143,
                                     0.0181818181818182};
  for (std::size_t i = 0; i < grid.size(); ++i) {
    CHECK(report.points[i].rider_samples == grid[i]);
    CHECK(report.points[i].total_samples == 200 + grid[i]);
    CHECK(report.points[i].variance == doctest::Approx(expected[i]).epsilon(1e-12));
  }
  // The zero point sits above V(50): the increase claim starts at positive
  // rider totals, which the report's flag covers.
  CHECK(report.points[0].variance > report.points[1].variance);
  CHECK(report.strictly_increasing);

  const MonotonicityReport positive =
      variance_monotonic_in_MK(base_inputs(), {50, 100, 200, 400});
  CHECK(positive.strictly_increasing);

  const MonotonicityReport shuffled = variance_monotonic_in_MK(base_inputs(), {100, 50});
  CHECK_FALSE(shuffled.strictly_increasing);
}

TEST_CASE("plain variance never exceeds the disguised variance") {
  std::mt19937_64 gen(11);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<std::int64_t> samples_pick(10, 400);
  for (int trial = 0; trial < 50; ++trial) {
    TheoryInputs inputs;
    const int fair_count = 1 + trial % 3;
    for (int j = 0; j < fair_count; ++j) {
      inputs.fair.push_back(
          TheoryFairClient{samples_pick(gen), 0.1 + 0.8 * unit(gen), 0.5 * unit(gen)});
    }
    const int rider_count = 1 + trial % 2;
    for (int k = 0; k < rider_count; ++k) {
      inputs.riders.push_back(TheoryRider{samples_pick(gen), 0.3 * unit(gen)});
    }
    const double disguised = disguised_asymptotic_variance(inputs);
    TheoryInputs plain = inputs;
    for (auto& rider : plain.riders) {
      rider.phi = 0.0;
    }
    CHECK(plain_asymptotic_variance(plain) <= disguised + 1e-18);
    CHECK(exact_gap_variance(inputs) <= disguised + 1e-18);
  }
}

TEST_CASE("the closed forms reject a contraction ratio at 1") {
  TheoryInputs inputs;
  inputs.riders = {TheoryRider{100, 0.0}};
  CHECK_THROWS_AS(inputs.validate(), ValidationError);
  CHECK_THROWS_AS(plain_asymptotic_variance(inputs), ValidationError);

  // From a scenario: theory inputs require at least one fair client.
  Scenario scenario;
  FreeRiderSpec rider;
  rider.samples = 100;
  scenario.free_riders = {rider};
  scenario.rounds = 10;
  scenario.theta0 = {0.0};
  scenario.validate();
  CHECK_THROWS_AS(TheoryInputs::from_scenario(scenario), ValidationError);
}
