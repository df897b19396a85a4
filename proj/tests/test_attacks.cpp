#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "frsim/attacks.hpp"
#include "frsim/errors.hpp"
#include "frsim/rng.hpp"

using namespace frsim;

TEST_CASE("plain update is the identity, bit for bit") {
  const ParameterVector a{1.5, -2.0};
  CHECK(plain_update(a) == a);
  const ParameterVector zero{0.0, 0.0, 0.0};
  CHECK(plain_update(zero) == zero);
  const ParameterVector b{3.25e-17, -1e300};
  const ParameterVector out = plain_update(b);
  for (std::size_t d = 0; d < b.size(); ++d) {
    CHECK(std::abs(out[d] - b[d]) == 0.0);
  }
}

TEST_CASE("schedule values") {
  const NoiseSchedule decay = PowerDecaySchedule{1.0, 1.0};
  CHECK(phi_at(decay, 1) == 1.0);
  CHECK(phi_at(decay, 2) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK_THROWS_AS(phi_at(decay, 0), ValidationError);

  const NoiseSchedule fixed = FixedSchedule{0.2};
  CHECK(phi_at(fixed, 1) == 0.2);
  CHECK(phi_at(fixed, 1000000) == 0.2);

  const NoiseSchedule mimic = SgdMimicSchedule{0.1, 10.0, 1.0, 1.0, 1.0, 100.0};
  CHECK(phi_at(mimic, 1) == doctest::Approx(0.065752).epsilon(1e-4));
  CHECK(phi_at(mimic, 5) == phi_at(mimic, 1));
}

TEST_CASE("power-decay schedule satisfies the vanishing premise on a wide grid") {
  const PowerDecaySchedule s{0.3, 0.5};
  const NoiseSchedule schedule = s;
  double prev = phi_at(schedule, 1);
  for (std::int64_t t : {std::int64_t{10}, std::int64_t{100}, std::int64_t{1000},
                         std::int64_t{10000}, std::int64_t{100000}, std::int64_t{1000000}}) {
    const double value = phi_at(schedule, t);
    CHECK(value <= s.sigma * std::pow(static_cast<double>(t), -s.gamma) + 1e-18);
    CHECK(value < prev);
    prev = value;
  }
  CHECK(phi_at(schedule, 1000000) < 1e-2);
  CHECK(schedule_limit(schedule) == 0.0);
  CHECK(schedule_limit(NoiseSchedule{FixedSchedule{0.2}}) == 0.2);
}

TEST_CASE("disguised update with zero level equals the plain update") {
  const ParameterVector theta{0.5, -1.25, 3.0};
  const std::vector<double> noise{1.7, -0.3, 0.9};
  const ParameterVector out = disguised_update(theta, FixedSchedule{0.0}, 3, noise);
  CHECK(out == plain_update(theta));
}

TEST_CASE("disguised update adds noise at the scheduled scale") {
  const ParameterVector theta{0.25};
  const int draws = 100000;

  RoundRng rng(5, RunId::kAttacked, 0, 0);
  double sum = 0.0, sum_sq = 0.0;
  for (int i = 0; i < draws; ++i) {
    const std::vector<double> noise{rng.normal(Stream::kRiderNoise, static_cast<std::uint64_t>(i))};
    const double diff = disguised_update(theta, FixedSchedule{0.2}, 1, noise)[0] - theta[0];
    sum += diff;
    sum_sq += diff * diff;
  }
  const double mean = sum / draws;
  const double variance = (sum_sq - sum * sum / draws) / (draws - 1);
  CHECK(std::abs(mean - 0.0) <= 3.0 * 0.2 / std::sqrt(static_cast<double>(draws)));
  CHECK(std::abs(variance - 0.04) <= 3.0 * 0.04 * std::sqrt(2.0 / (draws - 1)));

  // Quadratic decay at t=10 scales the variance by 1e-4.
  const NoiseSchedule fast_decay = PowerDecaySchedule{0.5, 2.0};
  CHECK(phi_at(fast_decay, 10) == doctest::Approx(0.005).epsilon(1e-12));
  double sq = 0.0;
  for (int i = 0; i < draws; ++i) {
    const std::vector<double> noise{rng.normal(Stream::kRiderNoise, static_cast<std::uint64_t>(draws + i))};
    const double diff = disguised_update(theta, fast_decay, 10, noise)[0] - theta[0];
    sq += diff * diff;
  }
  const double decayed_variance = sq / draws;
  const double expected = 1e-4 * 0.25;
  CHECK(std::abs(decayed_variance - expected) <= 3.0 * expected * std::sqrt(2.0 / draws));
}

TEST_CASE("increment scale estimate is the coordinate RMS") {
  CHECK(estimate_sigma({1.0, -1.0, 1.0, -1.0}) == 1.0);
  CHECK(estimate_sigma({0.0, 0.0}) == 0.0);
  CHECK(estimate_sigma({3.0, 4.0}) == doctest::Approx(std::sqrt(12.5)).epsilon(1e-12));

  // Invariant under permutation and sign flips.
  CHECK(estimate_sigma({4.0, -3.0}) == estimate_sigma({3.0, 4.0}));
  CHECK(estimate_sigma({-1.0, 2.0, -3.0}) == estimate_sigma({3.0, 2.0, 1.0}));

  CHECK_THROWS_AS(estimate_sigma({}), ValidationError);
}

TEST_CASE("schedule recalibration replaces the scale and keeps the shape") {
  const NoiseSchedule fixed = calibrated_schedule(FixedSchedule{0.9}, 0.123);
  CHECK(std::get<FixedSchedule>(fixed).phi == 0.123);

  const NoiseSchedule decay = calibrated_schedule(PowerDecaySchedule{0.9, 2.0}, 0.123);
  CHECK(std::get<PowerDecaySchedule>(decay).sigma == 0.123);
  CHECK(std::get<PowerDecaySchedule>(decay).gamma == 2.0);

  CHECK_THROWS_AS(calibrated_schedule(SgdMimicSchedule{0.1, 10.0, 1.0, 1.0, 1.0, 100.0}, 0.123),
                  ValidationError);
}

TEST_CASE("free-rider spec validation") {
  FreeRiderSpec plain;
  plain.samples = 100;
  CHECK_NOTHROW(plain.validate("rider"));
  CHECK(plain.plain());

  FreeRiderSpec disguised;
  disguised.samples = 100;
  disguised.schedule = PowerDecaySchedule{0.2, 1.0};
  CHECK_NOTHROW(disguised.validate("rider"));
  CHECK_FALSE(disguised.plain());

  FreeRiderSpec bad = disguised;
  bad.samples = 0;
  CHECK_THROWS_AS(bad.validate("rider"), ValidationError);

  // Calibration needs a schedule whose scale can be replaced.
  bad = plain;
  bad.calibrate_sigma = true;
  CHECK_THROWS_AS(bad.validate("rider"), ValidationError);

  bad = disguised;
  bad.calibrate_sigma = true;
  CHECK_NOTHROW(bad.validate("rider"));
  bad.schedule = SgdMimicSchedule{0.1, 10.0, 1.0, 1.0, 1.0, 100.0};
  CHECK_THROWS_AS(bad.validate("rider"), ValidationError);

  bad = disguised;
  bad.calibrate_sigma = true;
  bad.calibration_scale = 0.0;
  CHECK_THROWS_AS(bad.validate("rider"), ValidationError);

  // Negative schedule constants are rejected.
  bad = disguised;
  bad.schedule = FixedSchedule{-0.1};
  CHECK_THROWS_AS(bad.validate("rider"), ValidationError);
  bad.schedule = PowerDecaySchedule{0.2, 0.0};
  CHECK_THROWS_AS(bad.validate("rider"), ValidationError);
}
