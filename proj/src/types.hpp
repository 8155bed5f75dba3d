// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <limits>

namespace fabricsim {

// Simulated time is integer nanoseconds; sub-ns quantities round up.
using SimTime = std::int64_t;

using DeviceId = std::uint32_t;
using LinkId = std::uint32_t;
using TaskId = std::uint32_t;
using RegionId = std::uint32_t;

inline constexpr DeviceId kNoDevice = std::numeric_limits<DeviceId>::max();

inline constexpr std::uint64_t ceil_div(std::uint64_t a, std::uint64_t b) {
  return (a + b - 1) / b;
}

// Bandwidths are kept as integer bytes-per-microsecond so serialization times
// stay exact integer arithmetic: GB/s (decimal) -> bytes/us is a factor 1000.
inline constexpr std::uint64_t gbps_to_bytes_per_us(double gbps) {
  return static_cast<std::uint64_t>(gbps * 1000.0 + 0.5);
}

inline constexpr SimTime serialization_ns(std::uint64_t wire_bytes,
                                          std::uint64_t bytes_per_us) {
  return static_cast<SimTime>(ceil_div(wire_bytes * 1000, bytes_per_us));
}

}  // namespace fabricsim
