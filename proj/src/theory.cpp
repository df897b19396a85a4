#include "frsim/theory.hpp"

#include <cmath>

namespace frsim {

std::int64_t TheoryInputs::fair_samples() const {
  std::int64_t total = 0;
  for (const auto& c : fair) {
    total += c.samples;
  }
  return total;
}

std::int64_t TheoryInputs::rider_samples() const {
  std::int64_t total = 0;
  for (const auto& k : riders) {
    total += k.samples;
  }
  return total;
}

double TheoryInputs::epsilon() const {
  const double N = static_cast<double>(total_samples());
  double eps = 0.0;
  for (const auto& c : fair) {
    eps += static_cast<double>(c.samples) / N * c.eta;
  }
  return eps;
}

double TheoryInputs::ratio() const {
  return epsilon() + static_cast<double>(rider_samples()) / static_cast<double>(total_samples());
}

void TheoryInputs::validate() const {
  if (fair.empty()) {
    throw ValidationError(
        "theory: no fair clients; the contraction ratio epsilon + M_K/N reaches 1 and the gap "
        "variance diverges");
  }
  for (std::size_t j = 0; j < fair.size(); ++j) {
    const std::string label = "theory.fair[" + std::to_string(j) + "]";
    if (fair[j].samples < 1) {
      throw ValidationError(label + ".samples: must be >= 1");
    }
    if (!(fair[j].eta > 0.0) || !(fair[j].eta < 1.0)) {
      throw ValidationError(label + ".eta: must lie in (0,1)");
    }
    if (fair[j].rho < 0.0 || !std::isfinite(fair[j].rho)) {
      throw ValidationError(label + ".rho: must be >= 0 and finite");
    }
  }
  for (std::size_t k = 0; k < riders.size(); ++k) {
    const std::string label = "theory.riders[" + std::to_string(k) + "]";
    if (riders[k].samples < 1) {
      throw ValidationError(label + ".samples: must be >= 1");
    }
    if (riders[k].phi < 0.0 || !std::isfinite(riders[k].phi)) {
      throw ValidationError(label + ".phi: must be >= 0 and finite");
    }
  }
}

TheoryInputs TheoryInputs::from_scenario(const Scenario& scenario) {
  if (scenario.has_sgd_clients()) {
    throw ValidationError(
        "theory: descent clients carry no closed-form coefficients; use analytic clients");
  }
  TheoryInputs inputs;
  for (const auto& spec : resolve_fair_clients(scenario)) {
    const auto& ou = std::get<OUClientSpec>(spec);
    // Time-varying scales enter through their limits.
    inputs.fair.push_back({ou.samples, ou.eta, ou.rho_limit()});
  }
  for (const auto& rider : scenario.free_riders) {
    const double phi = rider.plain() ? 0.0 : schedule_limit(*rider.schedule);
    inputs.riders.push_back({rider.samples, phi});
  }
  inputs.validate();
  return inputs;
}

double plain_asymptotic_variance(const TheoryInputs& inputs) {
  inputs.validate();
  const double N = static_cast<double>(inputs.total_samples());
  const double NF = static_cast<double>(inputs.fair_samples());
  double weighted_sq = 0.0;
  for (const auto& c : inputs.fair) {
    const double m_rho = static_cast<double>(c.samples) * c.rho;
    weighted_sq += m_rho * m_rho;
  }
  const double ratio = inputs.ratio();
  const double front = 1.0 / (N * N) + 1.0 / (NF * NF);
  return front * weighted_sq / (1.0 - ratio * ratio);
}

double disguised_asymptotic_variance(const TheoryInputs& inputs) {
  const double plain = plain_asymptotic_variance(inputs);
  const double N = static_cast<double>(inputs.total_samples());
  const double ratio = inputs.ratio();
  double phi_sq = 0.0;
  for (const auto& k : inputs.riders) {
    const double w = static_cast<double>(k.samples) / N;
    phi_sq += w * w * k.phi * k.phi;
  }
  return plain + phi_sq / (1.0 - ratio * ratio);
}

double decaying_noise_asymptotic_variance(const TheoryInputs& inputs) {
  // from_scenario already replaced decaying scales by their limits, so the
  // constant-scale closed forms apply; all-zero limits give exactly 0.
  return disguised_asymptotic_variance(inputs);
}

double fedprox_asymptotic_variance(const Scenario& scenario) {
  // from_scenario resolves the primed coefficients under the scenario's
  // proximal weight; mu = 0 reproduces the unregularized value exactly.
  return disguised_asymptotic_variance(TheoryInputs::from_scenario(scenario));
}

double exact_gap_variance(const TheoryInputs& inputs) {
  inputs.validate();
  const double N = static_cast<double>(inputs.total_samples());
  const double NF = static_cast<double>(inputs.fair_samples());
  double a = 0.0;       // fair-only contraction
  double s2_fair = 0.0; // fair-run aggregate noise variance
  double s2_att = 0.0;  // attacked-run fair-client aggregate noise variance
  for (const auto& c : inputs.fair) {
    const double w_fair = static_cast<double>(c.samples) / NF;
    const double w_att = static_cast<double>(c.samples) / N;
    a += w_fair * c.eta;
    s2_fair += w_fair * w_fair * c.rho * c.rho;
    s2_att += w_att * w_att * c.rho * c.rho;
  }
  double phi_sq = 0.0;
  for (const auto& k : inputs.riders) {
    const double w = static_cast<double>(k.samples) / N;
    phi_sq += w * w * k.phi * k.phi;
  }
  const double ratio = inputs.ratio();
  return s2_fair / (1.0 - a * a) + (s2_att + phi_sq) / (1.0 - ratio * ratio);
}

double plain_variance_rational_form(const TheoryInputs& inputs, std::int64_t rider_total) {
  if (rider_total < 0) {
    throw ValidationError("plain_variance_rational_form: rider total must be >= 0");
  }
  const double F = static_cast<double>(inputs.fair_samples());
  const double x = static_cast<double>(rider_total);
  double A = 0.0;
  double weighted_sq = 0.0;
  for (const auto& c : inputs.fair) {
    A += static_cast<double>(c.samples) * c.eta;
    const double m_rho = static_cast<double>(c.samples) * c.rho;
    weighted_sq += m_rho * m_rho;
  }
  const double numerator = x * x / (F * F) + 2.0 * x / F + 2.0;
  const double denominator = F * F + 2.0 * x * (F - A) - A * A;
  return weighted_sq * numerator / denominator;
}

MonotonicityReport variance_monotonic_in_MK(const TheoryInputs& inputs,
                                            const std::vector<std::int64_t>& mk_grid) {
  MonotonicityReport report;
  report.points.reserve(mk_grid.size());
  for (const std::int64_t mk : mk_grid) {
    if (mk < 0) {
      throw ValidationError("variance_monotonic_in_MK: grid values must be >= 0");
    }
    TheoryInputs point;
    point.fair = inputs.fair;
    if (mk > 0) {
      point.riders.push_back({mk, 0.0});
    }
    report.points.push_back({mk, point.total_samples(), plain_asymptotic_variance(point)});
  }
  // The increase claim holds for positive rider totals only: a zero-rider
  // point drops the 1/(N-M_K)^2 split of the front factor, so the value can
  // sit above its M_K > 0 neighbor. Pairs touching such a point are listed
  // but not asserted.
  report.strictly_increasing = !report.points.empty();
  for (std::size_t i = 1; i < report.points.size(); ++i) {
    if (report.points[i - 1].rider_samples == 0) {
      continue;
    }
    if (!(report.points[i].variance > report.points[i - 1].variance)) {
      report.strictly_increasing = false;
      break;
    }
  }
  return report;
}

}  // namespace frsim
