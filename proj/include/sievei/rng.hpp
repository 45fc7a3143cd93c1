#pragma once

#include <cstdint>
#include <random>

#include "sievei/prob.hpp"

namespace sievei {

// Deterministic per-task random stream. Streams are derived from a base seed
// and a stream id through a SplitMix64 scramble, so task (replication) i
// always sees the same draws no matter which worker runs it.
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::uint64_t stream_id) {
    engine_.seed(scramble(seed, stream_id));
  }

  // Uniform on (0,1), endpoints excluded.
  double uniform() {
    const std::uint64_t u = engine_();
    return (static_cast<double>(u >> 11) + 0.5) * (1.0 / 9007199254740992.0);
  }

  // Standard normal via the inverse cdf; avoids the implementation-defined
  // std::normal_distribution so that seeded output is stable.
  double normal() { return normal_quantile(uniform()); }

  // Exponential with mean 1.
  double exponential() { return -std::log(uniform()); }

  // Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) {
    return static_cast<std::uint64_t>(uniform() * static_cast<double>(n)) % n;
  }

  std::mt19937_64& engine() { return engine_; }

 private:
  static std::uint64_t scramble(std::uint64_t seed, std::uint64_t stream_id) {
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (stream_id + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  std::mt19937_64 engine_;
};

// Stream-id helpers: replication r owns ids [r<<24, (r+1)<<24); the slot 0 is
// the replication's own draws, slots 1.. are its bootstrap draws.
inline std::uint64_t rep_stream_id(std::uint64_t rep) { return rep << 24; }
inline std::uint64_t boot_stream_id(std::uint64_t rep, std::uint64_t b) {
  return (rep << 24) + 1 + b;
}

}  // namespace sievei
