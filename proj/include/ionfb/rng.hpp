#pragma once

#include <cstdint>

namespace ionfb {

std::uint64_t splitmix64(std::uint64_t x);

/// Stateless counter-based generator: every draw is a pure function of
/// (seed, trajectory, stream, counter), so ensembles do not depend on the
/// order or number of workers.
class CounterRng {
 public:
  CounterRng(std::uint64_t seed, std::uint64_t trajectory, std::uint64_t stream);

  std::uint64_t bits(std::uint64_t counter) const;
  /// Uniform on (0, 1), never exactly 0 or 1.
  double uniform(std::uint64_t counter) const;
  /// Standard normal from two uniforms (Box-Muller, cosine branch).
  double normal(std::uint64_t counter) const;
  /// Exp(1) variate.
  double exponential(std::uint64_t counter) const;

 private:
  std::uint64_t key_;
};

/// Stream identifiers used by the trajectory engines.
enum RngStream : std::uint64_t {
  kStreamMeasurement = 1,
  kStreamJumpThreshold = 2,
  kStreamJumpChannel = 3,
  kStreamInitialState = 4,
  kStreamJumpBernoulli = 5,
};

}  // namespace ionfb
