#include "frsim/attacks.hpp"

#include <cmath>

namespace frsim {

namespace {

void validate_schedule(const NoiseSchedule& schedule, const std::string& label) {
  if (const auto* fixed = std::get_if<FixedSchedule>(&schedule)) {
    if (fixed->phi < 0.0 || !std::isfinite(fixed->phi)) {
      throw ValidationError(label + ".phi: must be >= 0 and finite");
    }
  } else if (const auto* decay = std::get_if<PowerDecaySchedule>(&schedule)) {
    if (decay->sigma < 0.0 || !std::isfinite(decay->sigma)) {
      throw ValidationError(label + ".sigma: must be >= 0 and finite");
    }
    if (!(decay->gamma > 0.0) || !std::isfinite(decay->gamma)) {
      throw ValidationError(label + ".gamma: must be > 0 and finite");
    }
  } else {
    const auto& mimic = std::get<SgdMimicSchedule>(schedule);
    // Reuses the noise-std validation: the mimic level is that closed form.
    sgd_noise_std(mimic.lr, mimic.S, mimic.sigma, mimic.r, mimic.epochs, mimic.M);
  }
}

}  // namespace

double phi_at(const NoiseSchedule& schedule, std::int64_t t) {
  if (const auto* fixed = std::get_if<FixedSchedule>(&schedule)) {
    return fixed->phi;
  }
  if (const auto* decay = std::get_if<PowerDecaySchedule>(&schedule)) {
    if (t < 1) {
      throw ValidationError("phi_at: round index must be >= 1 for a decaying schedule");
    }
    return decay->sigma * std::pow(static_cast<double>(t), -decay->gamma);
  }
  const auto& mimic = std::get<SgdMimicSchedule>(schedule);
  return sgd_noise_std(mimic.lr, mimic.S, mimic.sigma, mimic.r, mimic.epochs, mimic.M);
}

double schedule_limit(const NoiseSchedule& schedule) {
  if (std::holds_alternative<PowerDecaySchedule>(schedule)) {
    return 0.0;
  }
  return phi_at(schedule, 1);
}

void FreeRiderSpec::validate(const std::string& label) const {
  if (samples < 1) {
    throw ValidationError(label + ".samples: must be >= 1");
  }
  if (schedule) {
    validate_schedule(*schedule, label + ".schedule");
  }
  if (calibrate_sigma) {
    if (!schedule) {
      throw ValidationError(label + ".calibrate_sigma: requires a disguise schedule");
    }
    if (std::holds_alternative<SgdMimicSchedule>(*schedule)) {
      throw ValidationError(label +
                            ".calibrate_sigma: mimic schedules carry their own constants");
    }
    if (!(calibration_scale > 0.0) || !std::isfinite(calibration_scale)) {
      throw ValidationError(label + ".calibration_scale: must be > 0 and finite");
    }
  }
}

ParameterVector plain_update(const ParameterVector& theta_global) { return theta_global; }

ParameterVector disguised_update(const ParameterVector& theta_global,
                                 const NoiseSchedule& schedule, std::int64_t t,
                                 std::span<const double> noise) {
  if (noise.size() != theta_global.size()) {
    throw ValidationError("disguised_update: noise dimension mismatch");
  }
  const double phi = phi_at(schedule, t);
  ParameterVector out(theta_global.size());
  for (std::size_t d = 0; d < out.size(); ++d) {
    out[d] = theta_global[d] + phi * noise[d];
  }
  return out;
}

double estimate_sigma(const ParameterVector& increment) {
  if (increment.empty()) {
    throw ValidationError("estimate_sigma: increment must have dim >= 1");
  }
  double sq = 0.0;
  for (const double x : increment) {
    sq += x * x;
  }
  return std::sqrt(sq / static_cast<double>(increment.size()));
}

NoiseSchedule calibrated_schedule(const NoiseSchedule& schedule, double sigma_hat) {
  if (std::holds_alternative<FixedSchedule>(schedule)) {
    return FixedSchedule{sigma_hat};
  }
  if (const auto* decay = std::get_if<PowerDecaySchedule>(&schedule)) {
    return PowerDecaySchedule{sigma_hat, decay->gamma};
  }
  throw ValidationError("calibrated_schedule: mimic schedules are not calibrated");
}

}  // namespace frsim
