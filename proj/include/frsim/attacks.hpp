#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <variant>

#include "frsim/local_models.hpp"
#include "frsim/vector_ops.hpp"

namespace frsim {

// Constant disguise level: phi(t) = phi.
struct FixedSchedule {
  double phi = 0.0;  // >= 0
};

// phi(t) = sigma * t^(-gamma) for round index t >= 1; decreasing, limit 0.
struct PowerDecaySchedule {
  double sigma = 0.0;  // >= 0
  double gamma = 1.0;  // > 0
};

// Constant level chosen to mimic a fair client's per-round noise; same
// closed form as sgd_noise_std evaluated over the stored constants.
struct SgdMimicSchedule {
  double lr = 0.0;
  double S = 0.0;
  double sigma = 0.0;
  double r = 0.0;
  double epochs = 0.0;
  double M = 0.0;
};

using NoiseSchedule = std::variant<FixedSchedule, PowerDecaySchedule, SgdMimicSchedule>;

// Schedule value at round index t. Fixed and SgdMimic ignore t; PowerDecay
// requires t >= 1 (t = 0 is a singularity and a validation error).
double phi_at(const NoiseSchedule& schedule, std::int64_t t);

// Limit of phi(t) for large t: 0 for PowerDecay, the constant otherwise.
double schedule_limit(const NoiseSchedule& schedule);

// A client that declares samples but never trains. Without a schedule it
// returns the broadcast unchanged (plain free-riding); with one it adds
// phi(t)-scaled Gaussian noise. With calibrate_sigma set, the schedule's
// scale is replaced at run time by calibration_scale times the RMS of the
// first global increment, and the rider sends one plain update while that
// estimate is pending; the substitution is recorded in the trace.
struct FreeRiderSpec {
  std::int64_t samples = 0;
  std::optional<NoiseSchedule> schedule;  // nullopt: plain free-riding
  bool calibrate_sigma = false;
  double calibration_scale = 1.0;

  void validate(const std::string& label) const;
  bool plain() const { return !schedule.has_value(); }
};

// Plain free-riding: the broadcast itself, bit-identical.
ParameterVector plain_update(const ParameterVector& theta_global);

// Disguised free-riding: theta_global + phi(t) * eps with eps ~ N(0, I);
// noise holds one standard normal draw per coordinate.
ParameterVector disguised_update(const ParameterVector& theta_global,
                                 const NoiseSchedule& schedule, std::int64_t t,
                                 std::span<const double> noise);

// Zero-mean Gaussian MLE of the scale of one increment: the RMS of its
// coordinates, sqrt((1/dim) * sum_d increment[d]^2).
double estimate_sigma(const ParameterVector& increment);

// Copy of the schedule with its scale replaced by a calibrated estimate.
NoiseSchedule calibrated_schedule(const NoiseSchedule& schedule, double sigma_hat);

}  // namespace frsim
