#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "frsim/errors.hpp"

namespace frsim {

// Model parameters, one double per coordinate. The dimension is fixed across
// all clients and rounds of a scenario; entries are always finite.
using ParameterVector = std::vector<double>;

// Throws ValidationError when v is empty or contains NaN/infinities.
void check_finite(const ParameterVector& v, const std::string& label);

// Declared per-client sample counts M_i and their exact integer total N.
// Ratios M_i/N are formed in double precision at use time, never stored.
struct SampleWeights {
  std::vector<std::int64_t> counts;
  std::int64_t total = 0;

  static SampleWeights from_counts(std::vector<std::int64_t> counts);
};

// Sample-weighted average: out[d] = sum_i (M_i/N) * params[i][d].
// Summation follows client index order so results replay exactly.
ParameterVector weighted_average(const std::vector<ParameterVector>& params,
                                 const SampleWeights& weights);

}  // namespace frsim
