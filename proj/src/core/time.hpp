#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace fleetcer {

// Seconds since the Unix epoch. The time model is linear with integer points.
using TimePoint = std::int64_t;
// A span of seconds.
using Duration = std::int64_t;

inline constexpr Duration kHour = 3600;
inline constexpr Duration kDay = 24 * kHour;

// Accepts integer epoch seconds, or ISO-8601 `YYYY-MM-DD[T ]HH:MM[:SS][Z]`
// (always interpreted as UTC). Returns nullopt on anything else.
std::optional<TimePoint> parseTimestamp(std::string_view text);

// `YYYY-MM-DDTHH:MM:SSZ`
std::string formatIso(TimePoint t);

}  // namespace fleetcer
