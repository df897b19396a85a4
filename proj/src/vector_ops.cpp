#include "frsim/vector_ops.hpp"

#include <cmath>

namespace frsim {

void check_finite(const ParameterVector& v, const std::string& label) {
  if (v.empty()) {
    throw ValidationError(label + ": parameter vector must have dim >= 1");
  }
  for (std::size_t d = 0; d < v.size(); ++d) {
    if (!std::isfinite(v[d])) {
      throw ValidationError(label + ": non-finite entry at coordinate " + std::to_string(d));
    }
  }
}

SampleWeights SampleWeights::from_counts(std::vector<std::int64_t> counts) {
  if (counts.empty()) {
    throw ValidationError("weights: at least one sample count required");
  }
  SampleWeights w;
  w.total = 0;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    if (counts[i] < 1) {
      throw ValidationError("weights: count " + std::to_string(i) + " must be >= 1, got " +
                            std::to_string(counts[i]));
    }
    w.total += counts[i];
  }
  w.counts = std::move(counts);
  return w;
}

ParameterVector weighted_average(const std::vector<ParameterVector>& params,
                                 const SampleWeights& weights) {
  if (params.empty()) {
    throw ValidationError("weighted_average: empty client list");
  }
  if (params.size() != weights.counts.size()) {
    throw ValidationError("weighted_average: " + std::to_string(params.size()) +
                          " vectors vs " + std::to_string(weights.counts.size()) + " weights");
  }
  const std::size_t dim = params[0].size();
  ParameterVector out(dim, 0.0);
  const double total = static_cast<double>(weights.total);
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i].size() != dim) {
      throw ValidationError("weighted_average: dimension mismatch at client " +
                            std::to_string(i));
    }
    const double w = static_cast<double>(weights.counts[i]) / total;
    for (std::size_t d = 0; d < dim; ++d) {
      out[d] += w * params[i][d];
    }
  }
  return out;
}

}  // namespace frsim
