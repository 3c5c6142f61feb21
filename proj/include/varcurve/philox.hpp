#pragma once

#include <array>
#include <cstdint>

namespace varcurve {

using PhiloxCounter = std::array<std::uint32_t, 4>;
using PhiloxKey = std::array<std::uint32_t, 2>;

/// Philox4x32 with 10 rounds.
PhiloxCounter philox4x32_10(PhiloxCounter counter, PhiloxKey key);

enum class StreamPurpose : std::uint32_t { Arrivals = 1, Services = 2, Initial = 3 };

/// Counter-based substream keyed by the master seed. Word 2 of the counter
/// carries the replication index and word 3 the purpose, so any
/// (seed, replication, purpose) triple yields an independent sequence that
/// can be generated on any thread.
class RandomStream {
 public:
  RandomStream(std::uint64_t seed, std::uint32_t replication, StreamPurpose purpose);

  std::uint32_t next_u32();
  /// Uniform on the open interval (0, 1) with 53 random bits.
  double uniform();
  double exponential(double rate);
  /// Standard normal by Box-Muller.
  double normal();

 private:
  PhiloxKey key_;
  PhiloxCounter counter_;
  PhiloxCounter block_{};
  int used_ = 4;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace varcurve
