#pragma once

#include <cmath>
#include <cstdint>

namespace frsim {

// splitmix64 finalizer; full-avalanche 64-bit mixer.
constexpr std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Stream labels so draws made for different purposes never collide.
enum class Stream : std::uint64_t {
  kLocalNoise = 1,  // fair-client update noise
  kRiderNoise = 2,  // free-rider disguise noise
  kBatch = 3,       // minibatch sample indices
  kInit = 4,        // parameter initialization jitter
};

// Identifies one of the two linked simulations of a coupled run. Standalone
// training uses kAttacked, so the attacked half of a coupled run replays it.
enum class RunId : std::uint64_t { kFair = 0, kAttacked = 1 };

// Counter-based noise source: every draw is a pure function of
// (seed, run, round, client, stream, index). Replays and parallel schedules
// therefore see identical streams, and the two runs of a coupled simulation
// share no state.
class RoundRng {
 public:
  RoundRng(std::uint64_t seed, RunId run, std::uint64_t round, std::uint64_t client) {
    std::uint64_t h = mix64(seed ^ 0x8f1bbcdcbfa53e0bULL);
    h = mix64(h ^ static_cast<std::uint64_t>(run));
    h = mix64(h ^ round);
    base_ = mix64(h ^ client);
  }

  // One standard normal draw per (stream, index), via Box-Muller.
  double normal(Stream stream, std::uint64_t index) const {
    const double u1 = unit_open(word(stream, 2 * index));
    const double u2 = unit(word(stream, 2 * index + 1));
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(kTwoPi * u2);
  }

  // Uniform integer in [0, bound), bound >= 1, via multiply-shift.
  std::uint64_t uniform_index(std::uint64_t bound, Stream stream, std::uint64_t index) const {
    const auto wide = static_cast<unsigned __int128>(word(stream, index));
    return static_cast<std::uint64_t>((wide * bound) >> 64);
  }

 private:
  static constexpr double kTwoPi = 6.283185307179586476925286766559;

  std::uint64_t word(Stream stream, std::uint64_t index) const {
    return mix64(base_ ^ (static_cast<std::uint64_t>(stream) << 56) ^ index);
  }

  // (0,1]: never 0, so log(u1) stays finite.
  static double unit_open(std::uint64_t w) { return static_cast<double>((w >> 11) + 1) * 0x1.0p-53; }
  // [0,1)
  static double unit(std::uint64_t w) { return static_cast<double>(w >> 11) * 0x1.0p-53; }

  std::uint64_t base_;
};

// Sub-seed for replicate r of a Monte Carlo batch or a fair-band sweep.
inline std::uint64_t replicate_seed(std::uint64_t seed, std::uint64_t replicate) {
  return mix64(mix64(seed ^ 0xd6e8feb86659fd93ULL) ^ replicate);
}

}  // namespace frsim
