#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "frsim/rng.hpp"
#include "frsim/vector_ops.hpp"

namespace frsim {

// Proximal weight of the regularized scheme; mu = 0 disables the term and
// every formula must then agree with the unregularized scheme exactly.
struct ProxConfig {
  double mu = 0.0;
};

// Per-round contraction of one local training pass: exp(-lr*r*E*M/S).
// Requires lr, r > 0 and E*M/S >= 1.
double eta_coefficient(double lr, double r, double epochs, double M, double S);

// Standard deviation of the noise one local training pass injects per round:
// rho = sqrt((lr/S) * sigma^2 * (1/(2r)) * (1 - exp(-2*lr*r*E*M/S))).
// sigma = 0 is allowed and yields 0.
double sgd_noise_std(double lr, double S, double sigma, double r, double epochs, double M);

// Coefficients of the proximal variant. mu = 0 reproduces eta_coefficient
// and sgd_noise_std bit-for-bit (shared evaluation path with curvature r+mu).
struct FedProxCoefficients {
  double gamma;      // exp(-lr*(r+mu)*E*M/S)
  double eta_prime;  // gamma + mu*(1-gamma)/(r+mu)
  double rho_prime;  // noise std evaluated at curvature r+mu
};
FedProxCoefficients fedprox_coefficients(double lr, double r, double sigma, double mu,
                                         double epochs, double M, double S);

// Optional power-law decay of a client's per-round noise scale:
// rho(t) = rho * t^(-exponent) + limit for round index t >= 1.
struct RhoDecay {
  double exponent = 1.0;  // > 0
  double limit = 0.0;     // >= 0
};

// Analytic fair client: one round maps the broadcast theta to
// eta*(theta - theta_star) + theta_star + rho(t)*zeta, zeta ~ N(0, I).
struct OUClientSpec {
  std::int64_t samples = 0;
  double eta = 0.0;  // in (0,1)
  ParameterVector theta_star;
  double rho = 0.0;  // >= 0
  std::optional<RhoDecay> rho_decay;

  void validate(const std::string& label) const;
  double rho_at(std::int64_t t) const;  // t >= 1
  double rho_limit() const;
};

// Fair client given by training hyperparameters; the effective (eta, rho)
// under a scheme with proximal weight mu are derived, not stored.
struct OUPhysicalSpec {
  std::int64_t samples = 0;
  double lr = 0.0;
  double r = 0.0;      // quadratic curvature of the local loss
  double sigma = 0.0;  // per-sample gradient noise scale
  double epochs = 0.0;
  double batch = 0.0;  // S
  ParameterVector theta_star;

  void validate(const std::string& label) const;
  OUClientSpec resolve(double mu) const;
};

// Per-sample loss (r/2)*||theta - x_n||^2; the dataset mean must equal
// theta_star so the full-batch gradient is exactly r*(theta - theta_star).
struct QuadraticLoss {
  double r = 0.0;
  ParameterVector theta_star;
};

// Binary cross-entropy over (features, 0/1 targets).
struct LogisticLoss {};

using LossModel = std::variant<QuadraticLoss, LogisticLoss>;

// Minibatch-descent fair client over an explicit dataset.
struct SGDClientSpec {
  std::int64_t samples = 0;               // M_j, equals the dataset size
  std::vector<ParameterVector> features;  // x_n
  std::vector<double> targets;            // y_n (0/1 for logistic; unused otherwise)
  LossModel loss;
  double lr = 0.0;
  std::int64_t epochs = 0;
  std::int64_t batch = 0;  // S, divides M_j

  void validate(const std::string& label) const;
};

// One averaging-round update of the analytic client; noise holds one
// standard normal draw per coordinate and t >= 1 indexes the noise schedule.
ParameterVector ou_local_update(const ParameterVector& theta_global, const OUClientSpec& spec,
                                std::int64_t t, std::span<const double> noise);

// Mean loss and gradient over the client's full dataset.
double dataset_loss(const SGDClientSpec& spec, const ParameterVector& theta);
ParameterVector dataset_gradient(const SGDClientSpec& spec, const ParameterVector& theta);

// Per-sample pieces, exposed for the minibatch loop and for
// finite-difference checks in tests.
double sample_loss(const SGDClientSpec& spec, std::size_t n, const ParameterVector& theta);
void add_sample_gradient(const SGDClientSpec& spec, std::size_t n, const ParameterVector& theta,
                         double scale, ParameterVector& grad);

struct LocalSgdResult {
  ParameterVector theta;
  double training_loss = 0.0;  // full-dataset loss at the returned theta
};

// E*M/S minibatch steps from theta_global with batches of size S drawn
// uniformly with replacement from rng's batch stream. A positive prox.mu
// adds mu*(theta - theta_global) to every step's gradient. Throws
// NumericalError with the step index if parameters or loss turn non-finite.
LocalSgdResult sgd_local_update(const ParameterVector& theta_global, const SGDClientSpec& spec,
                                const ProxConfig& prox, const RoundRng& rng);

}  // namespace frsim
