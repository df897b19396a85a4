#include "frsim/local_models.hpp"

#include <cmath>

namespace frsim {

namespace {

void require_positive(double value, const char* name, const char* where) {
  if (!(value > 0.0) || !std::isfinite(value)) {
    throw ValidationError(std::string(where) + ": " + name + " must be positive and finite");
  }
}

void require_steps(double lr, double epochs, double M, double S, const char* where) {
  require_positive(lr, "lr", where);
  require_positive(epochs, "epochs", where);
  require_positive(M, "M", where);
  require_positive(S, "S", where);
  if (epochs * M / S < 1.0) {
    throw ValidationError(std::string(where) + ": E*M/S must be >= 1");
  }
}

// Shared by the plain and primed coefficient paths; k is the curvature, r
// for the plain scheme and r+mu for the proximal one, so the mu = 0 values
// agree bit-for-bit.
double contraction(double lr, double k, double epochs, double M, double S) {
  return std::exp(-lr * k * epochs * M / S);
}

double noise_std_for_curvature(double lr, double S, double sigma, double k, double epochs,
                               double M) {
  const double tail = std::exp(-2.0 * lr * k * epochs * M / S);
  return std::sqrt((lr / S) * sigma * sigma * (1.0 / (2.0 * k)) * (1.0 - tail));
}

double sigmoid(double z) {
  if (z >= 0.0) {
    return 1.0 / (1.0 + std::exp(-z));
  }
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// log(1 + exp(m)) without overflow.
double log1p_exp(double m) {
  if (m > 0.0) {
    return m + std::log1p(std::exp(-m));
  }
  return std::log1p(std::exp(m));
}

}  // namespace

double eta_coefficient(double lr, double r, double epochs, double M, double S) {
  require_steps(lr, epochs, M, S, "eta_coefficient");
  require_positive(r, "r", "eta_coefficient");
  return contraction(lr, r, epochs, M, S);
}

double sgd_noise_std(double lr, double S, double sigma, double r, double epochs, double M) {
  require_steps(lr, epochs, M, S, "sgd_noise_std");
  require_positive(r, "r", "sgd_noise_std");
  if (sigma < 0.0 || !std::isfinite(sigma)) {
    throw ValidationError("sgd_noise_std: sigma must be >= 0 and finite");
  }
  return noise_std_for_curvature(lr, S, sigma, r, epochs, M);
}

FedProxCoefficients fedprox_coefficients(double lr, double r, double sigma, double mu,
                                         double epochs, double M, double S) {
  require_steps(lr, epochs, M, S, "fedprox_coefficients");
  require_positive(r, "r", "fedprox_coefficients");
  if (mu < 0.0 || !std::isfinite(mu)) {
    throw ValidationError("fedprox_coefficients: mu must be >= 0 and finite");
  }
  if (sigma < 0.0 || !std::isfinite(sigma)) {
    throw ValidationError("fedprox_coefficients: sigma must be >= 0 and finite");
  }
  const double k = r + mu;
  FedProxCoefficients c;
  c.gamma = contraction(lr, k, epochs, M, S);
  c.eta_prime = c.gamma + mu * (1.0 - c.gamma) / k;
  c.rho_prime = noise_std_for_curvature(lr, S, sigma, k, epochs, M);
  return c;
}

void OUClientSpec::validate(const std::string& label) const {
  if (samples < 1) {
    throw ValidationError(label + ".samples: must be >= 1");
  }
  if (!(eta > 0.0) || !(eta < 1.0)) {
    throw ValidationError(label + ".eta: must lie in (0,1)");
  }
  check_finite(theta_star, label + ".theta_star");
  if (rho < 0.0 || !std::isfinite(rho)) {
    throw ValidationError(label + ".rho: must be >= 0 and finite");
  }
  if (rho_decay) {
    if (!(rho_decay->exponent > 0.0)) {
      throw ValidationError(label + ".rho_decay.exponent: must be > 0");
    }
    if (rho_decay->limit < 0.0 || !std::isfinite(rho_decay->limit)) {
      throw ValidationError(label + ".rho_decay.limit: must be >= 0 and finite");
    }
  }
}

double OUClientSpec::rho_at(std::int64_t t) const {
  if (!rho_decay) {
    return rho;
  }
  if (t < 1) {
    throw ValidationError("rho_at: round index must be >= 1 for a decaying scale");
  }
  return rho * std::pow(static_cast<double>(t), -rho_decay->exponent) + rho_decay->limit;
}

double OUClientSpec::rho_limit() const { return rho_decay ? rho_decay->limit : rho; }

void OUPhysicalSpec::validate(const std::string& label) const {
  if (samples < 1) {
    throw ValidationError(label + ".samples: must be >= 1");
  }
  check_finite(theta_star, label + ".theta_star");
  require_steps(lr, epochs, static_cast<double>(samples), batch, label.c_str());
  require_positive(r, "r", label.c_str());
  if (sigma < 0.0 || !std::isfinite(sigma)) {
    throw ValidationError(label + ".sigma: must be >= 0 and finite");
  }
}

OUClientSpec OUPhysicalSpec::resolve(double mu) const {
  const FedProxCoefficients c =
      fedprox_coefficients(lr, r, sigma, mu, epochs, static_cast<double>(samples), batch);
  OUClientSpec spec;
  spec.samples = samples;
  spec.eta = c.eta_prime;
  spec.theta_star = theta_star;
  spec.rho = c.rho_prime;
  return spec;
}

void SGDClientSpec::validate(const std::string& label) const {
  if (samples < 1) {
    throw ValidationError(label + ".samples: must be >= 1");
  }
  if (static_cast<std::int64_t>(features.size()) != samples) {
    throw ValidationError(label + ".features: size must equal samples");
  }
  if (!targets.empty() && static_cast<std::int64_t>(targets.size()) != samples) {
    throw ValidationError(label + ".targets: size must equal samples");
  }
  if (!(lr > 0.0) || !std::isfinite(lr)) {
    throw ValidationError(label + ".lr: must be positive and finite");
  }
  if (epochs < 1) {
    throw ValidationError(label + ".epochs: must be >= 1");
  }
  if (batch < 1) {
    throw ValidationError(label + ".batch: must be >= 1");
  }
  if (samples % batch != 0) {
    throw ValidationError(label + ".batch: must divide samples");
  }
  const std::size_t dim = features.empty() ? 0 : features[0].size();
  for (std::size_t n = 0; n < features.size(); ++n) {
    check_finite(features[n], label + ".features[" + std::to_string(n) + "]");
    if (features[n].size() != dim) {
      throw ValidationError(label + ".features[" + std::to_string(n) + "]: dimension mismatch");
    }
  }
  if (const auto* q = std::get_if<QuadraticLoss>(&loss)) {
    if (!(q->r > 0.0) || !std::isfinite(q->r)) {
      throw ValidationError(label + ".loss.r: must be positive and finite");
    }
    if (q->theta_star.size() != dim) {
      throw ValidationError(label + ".loss.theta_star: dimension mismatch with features");
    }
    // The dataset mean must sit at theta_star so the full-batch gradient is
    // exactly r*(theta - theta_star).
    for (std::size_t d = 0; d < dim; ++d) {
      double mean = 0.0;
      for (const auto& x : features) {
        mean += x[d];
      }
      mean /= static_cast<double>(features.size());
      if (std::abs(mean - q->theta_star[d]) > 1e-9) {
        throw ValidationError(label + ".loss.theta_star: dataset mean deviates at coordinate " +
                              std::to_string(d));
      }
    }
  } else {
    if (targets.empty()) {
      throw ValidationError(label + ".targets: required for logistic loss");
    }
    for (std::size_t n = 0; n < targets.size(); ++n) {
      if (targets[n] != 0.0 && targets[n] != 1.0) {
        throw ValidationError(label + ".targets[" + std::to_string(n) + "]: must be 0 or 1");
      }
    }
  }
}

ParameterVector ou_local_update(const ParameterVector& theta_global, const OUClientSpec& spec,
                                std::int64_t t, std::span<const double> noise) {
  const std::size_t dim = theta_global.size();
  if (spec.theta_star.size() != dim) {
    throw ValidationError("ou_local_update: theta_star dimension mismatch");
  }
  if (noise.size() != dim) {
    throw ValidationError("ou_local_update: noise dimension mismatch");
  }
  const double scale = spec.rho_at(t);
  ParameterVector out(dim);
  for (std::size_t d = 0; d < dim; ++d) {
    out[d] = spec.eta * (theta_global[d] - spec.theta_star[d]) + spec.theta_star[d] +
             scale * noise[d];
  }
  return out;
}

double sample_loss(const SGDClientSpec& spec, std::size_t n, const ParameterVector& theta) {
  const ParameterVector& x = spec.features[n];
  if (const auto* q = std::get_if<QuadraticLoss>(&spec.loss)) {
    double sq = 0.0;
    for (std::size_t d = 0; d < theta.size(); ++d) {
      const double diff = theta[d] - x[d];
      sq += diff * diff;
    }
    return 0.5 * q->r * sq;
  }
  double z = 0.0;
  for (std::size_t d = 0; d < theta.size(); ++d) {
    z += theta[d] * x[d];
  }
  const double s = spec.targets[n] > 0.5 ? 1.0 : -1.0;
  return log1p_exp(-s * z);
}

void add_sample_gradient(const SGDClientSpec& spec, std::size_t n, const ParameterVector& theta,
                         double scale, ParameterVector& grad) {
  const ParameterVector& x = spec.features[n];
  if (const auto* q = std::get_if<QuadraticLoss>(&spec.loss)) {
    for (std::size_t d = 0; d < theta.size(); ++d) {
      grad[d] += scale * q->r * (theta[d] - x[d]);
    }
    return;
  }
  double z = 0.0;
  for (std::size_t d = 0; d < theta.size(); ++d) {
    z += theta[d] * x[d];
  }
  const double s = spec.targets[n] > 0.5 ? 1.0 : -1.0;
  const double coeff = -s * sigmoid(-s * z);
  for (std::size_t d = 0; d < theta.size(); ++d) {
    grad[d] += scale * coeff * x[d];
  }
}

double dataset_loss(const SGDClientSpec& spec, const ParameterVector& theta) {
  double total = 0.0;
  for (std::size_t n = 0; n < spec.features.size(); ++n) {
    total += sample_loss(spec, n, theta);
  }
  return total / static_cast<double>(spec.features.size());
}

ParameterVector dataset_gradient(const SGDClientSpec& spec, const ParameterVector& theta) {
  ParameterVector grad(theta.size(), 0.0);
  const double scale = 1.0 / static_cast<double>(spec.features.size());
  for (std::size_t n = 0; n < spec.features.size(); ++n) {
    add_sample_gradient(spec, n, theta, scale, grad);
  }
  return grad;
}

LocalSgdResult sgd_local_update(const ParameterVector& theta_global, const SGDClientSpec& spec,
                                const ProxConfig& prox, const RoundRng& rng) {
  const std::size_t dim = theta_global.size();
  if (!spec.features.empty() && spec.features[0].size() != dim) {
    throw ValidationError("sgd_local_update: feature dimension mismatch");
  }
  const std::int64_t steps = spec.epochs * spec.samples / spec.batch;
  const double batch_scale = 1.0 / static_cast<double>(spec.batch);
  ParameterVector theta = theta_global;
  ParameterVector grad(dim);
  for (std::int64_t step = 0; step < steps; ++step) {
    std::fill(grad.begin(), grad.end(), 0.0);
    for (std::int64_t b = 0; b < spec.batch; ++b) {
      const std::uint64_t n = rng.uniform_index(static_cast<std::uint64_t>(spec.samples),
                                                Stream::kBatch,
                                                static_cast<std::uint64_t>(step * spec.batch + b));
      add_sample_gradient(spec, static_cast<std::size_t>(n), theta, batch_scale, grad);
    }
    if (prox.mu > 0.0) {
      for (std::size_t d = 0; d < dim; ++d) {
        grad[d] += prox.mu * (theta[d] - theta_global[d]);
      }
    }
    for (std::size_t d = 0; d < dim; ++d) {
      theta[d] -= spec.lr * grad[d];
      if (!std::isfinite(theta[d])) {
        throw NumericalError("sgd_local_update: non-finite parameter",
                             static_cast<std::size_t>(step));
      }
    }
  }
  LocalSgdResult result;
  result.training_loss = dataset_loss(spec, theta);
  if (!std::isfinite(result.training_loss)) {
    throw NumericalError("sgd_local_update: non-finite training loss",
                         static_cast<std::size_t>(steps));
  }
  result.theta = std::move(theta);
  return result;
}

}  // namespace frsim
