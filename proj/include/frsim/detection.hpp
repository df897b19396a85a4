#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "frsim/federation.hpp"
#include "frsim/vector_ops.hpp"

namespace frsim {

// Per-client detection row for one round.
struct DetectionRound {
  std::int64_t round = 0;
  bool flagged_plain = false;
  double increment_rms = 0.0;
  std::int64_t consecutive_flag_count = 0;  // run length of flags ending here
};

struct ClientDetection {
  std::int64_t client_id = 0;  // scenario order: fair clients, then riders
  std::string role;            // "fair" | "rider"
  std::vector<DetectionRound> rounds;
  double flag_rate = 0.0;  // flagged rounds / total rounds
  double mean_rms = 0.0;
  // Least-squares slope of log RMS against log(round+1), zero-RMS rounds
  // skipped; NaN when fewer than two usable rounds remain.
  double loglog_slope = std::numeric_limits<double>::quiet_NaN();
};

struct DetectionReport {
  std::vector<ClientDetection> clients;
};

// True per client iff its upload equals the broadcast in every coordinate
// within tolerance. The default 0.0 demands bit equality; tolerances up to
// 1e-15 accommodate traces round-tripped through text serialization.
std::vector<bool> flag_plain(const ParameterVector& broadcast,
                             const std::vector<ParameterVector>& uploads,
                             double tolerance = 0.0);

// Per-round RMS of (upload - broadcast) per client plus summary statistics.
// Reports only; no classification decision is made.
DetectionReport increment_stats(const RunTrace& trace, double tolerance = 0.0);

}  // namespace frsim
