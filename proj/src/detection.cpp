#include "frsim/detection.hpp"

#include <cmath>

#include "frsim/attacks.hpp"
#include "frsim/errors.hpp"

namespace frsim {

namespace {

bool within_tolerance(const ParameterVector& broadcast, const ParameterVector& upload,
                      double tolerance) {
  for (std::size_t d = 0; d < broadcast.size(); ++d) {
    if (std::abs(upload[d] - broadcast[d]) > tolerance) {
      return false;
    }
  }
  return true;
}

// Least-squares slope of log(rms) against log(round+1); rounds with zero
// RMS carry no scale information and are skipped.
double fit_loglog_slope(const std::vector<DetectionRound>& rounds) {
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  std::size_t n = 0;
  for (const auto& row : rounds) {
    if (row.increment_rms <= 0.0) {
      continue;
    }
    const double x = std::log(static_cast<double>(row.round + 1));
    const double y = std::log(row.increment_rms);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    ++n;
  }
  if (n < 2) {
    return std::numeric_limits<double>::quiet_NaN();
  }
  const double denom = static_cast<double>(n) * sxx - sx * sx;
  if (denom == 0.0) {
    return std::numeric_limits<double>::quiet_NaN();
  }
  return (static_cast<double>(n) * sxy - sx * sy) / denom;
}

}  // namespace

std::vector<bool> flag_plain(const ParameterVector& broadcast,
                             const std::vector<ParameterVector>& uploads, double tolerance) {
  if (tolerance < 0.0) {
    throw ValidationError("flag_plain: tolerance must be >= 0");
  }
  std::vector<bool> flags(uploads.size(), false);
  for (std::size_t i = 0; i < uploads.size(); ++i) {
    if (uploads[i].size() != broadcast.size()) {
      throw ValidationError("flag_plain: dimension mismatch at client " + std::to_string(i));
    }
    flags[i] = within_tolerance(broadcast, uploads[i], tolerance);
  }
  return flags;
}

DetectionReport increment_stats(const RunTrace& trace, double tolerance) {
  if (trace.rounds.empty()) {
    throw ValidationError("increment_stats: empty history");
  }
  const std::size_t fair_count = trace.rounds[0].fair.size();
  const std::size_t rider_count = trace.rounds[0].riders.size();
  const std::size_t total = fair_count + rider_count;

  DetectionReport report;
  report.clients.resize(total);
  for (std::size_t i = 0; i < total; ++i) {
    report.clients[i].client_id = static_cast<std::int64_t>(i);
    report.clients[i].role = i < fair_count ? "fair" : "rider";
    report.clients[i].rounds.reserve(trace.rounds.size());
  }

  ParameterVector diff;
  for (const RoundTrace& round : trace.rounds) {
    for (std::size_t i = 0; i < total; ++i) {
      const ClientRecord& rec =
          i < fair_count ? round.fair[i] : round.riders[i - fair_count];
      if (rec.upload.size() != round.theta_global.size()) {
        throw ValidationError("increment_stats: dimension mismatch at client " +
                              std::to_string(i));
      }
      diff.resize(rec.upload.size());
      for (std::size_t d = 0; d < diff.size(); ++d) {
        diff[d] = rec.upload[d] - round.theta_global[d];
      }
      DetectionRound row;
      row.round = round.round;
      row.increment_rms = estimate_sigma(diff);
      row.flagged_plain = within_tolerance(round.theta_global, rec.upload, tolerance);
      auto& rows = report.clients[i].rounds;
      const std::int64_t streak = rows.empty() ? 0 : rows.back().consecutive_flag_count;
      row.consecutive_flag_count = row.flagged_plain ? streak + 1 : 0;
      rows.push_back(row);
    }
  }

  for (auto& client : report.clients) {
    double rms_sum = 0.0;
    std::int64_t flags = 0;
    for (const auto& row : client.rounds) {
      rms_sum += row.increment_rms;
      flags += row.flagged_plain ? 1 : 0;
    }
    const double rounds = static_cast<double>(client.rounds.size());
    client.flag_rate = static_cast<double>(flags) / rounds;
    client.mean_rms = rms_sum / rounds;
    client.loglog_slope = fit_loglog_slope(client.rounds);
  }
  return report;
}

}  // namespace frsim
