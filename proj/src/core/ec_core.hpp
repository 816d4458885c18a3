#pragma once

#include <compare>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "time.hpp"

namespace fleetcer {

// Instantaneous event. Input events carry their numeric arguments in `args`
// (speed in km/h for moving, liters for fuelLevel).
struct EventInstance {
  std::string eventType;
  std::string vehicle;
  std::vector<double> args;
  TimePoint occurrenceTime = 0;
  TimePoint arrivalTime = 0;

  friend bool operator==(const EventInstance&, const EventInstance&) = default;
};

// F=V for one vehicle. Only the value "true" is used by the fleet patterns.
struct FluentValue {
  std::string fluent;
  std::string vehicle;
  std::string value = "true";

  friend auto operator<=>(const FluentValue&, const FluentValue&) = default;
  friend bool operator==(const FluentValue&, const FluentValue&) = default;
};

// (openStart, end]; an absent end means the interval is still open.
struct Interval {
  TimePoint openStart = 0;
  std::optional<TimePoint> end;

  bool isOpen() const noexcept { return !end.has_value(); }
  bool contains(TimePoint t) const noexcept { return t > openStart && (!end || t <= *end); }

  friend bool operator==(const Interval&, const Interval&) = default;
};

// Sorted list of maximal intervals: disjoint, non-adjacent, at most one open
// interval and it comes last.
class IntervalList {
 public:
  IntervalList() = default;

  // Throws ContractViolation when the intervals break the list invariants.
  static IntervalList fromIntervals(std::vector<Interval> intervals);

  const std::vector<Interval>& intervals() const noexcept { return intervals_; }
  bool empty() const noexcept { return intervals_.empty(); }
  std::size_t size() const noexcept { return intervals_.size(); }
  auto begin() const noexcept { return intervals_.begin(); }
  auto end() const noexcept { return intervals_.end(); }
  const Interval& operator[](std::size_t i) const { return intervals_[i]; }

  friend bool operator==(const IntervalList&, const IntervalList&) = default;

 private:
  explicit IntervalList(std::vector<Interval> v) : intervals_(std::move(v)) {}
  friend IntervalList makeIntervals(std::span<const TimePoint>, std::span<const TimePoint>);
  friend IntervalList clipToWindow(const IntervalList&, TimePoint, TimePoint);
  friend IntervalList intervalDifference(const IntervalList&, const IntervalList&);

  std::vector<Interval> intervals_;
};

// Maximal intervals from initiation and termination points under weak
// initiation: an interval opens at the earliest uncovered initiation Ts and
// closes at the first termination strictly after Ts. An initiation coinciding
// with that closing point keeps the fluent holding, so the run continues.
// Both inputs must be sorted ascending (duplicates allowed).
IntervalList makeIntervals(std::span<const TimePoint> initiations,
                           std::span<const TimePoint> terminations);

bool holdsAt(const IntervalList& list, TimePoint t);

// Intersects each interval with (windowStart, windowEnd]. Intervals running
// past windowEnd, open ones included, are truncated to a closed end at windowEnd.
IntervalList clipToWindow(const IntervalList& list, TimePoint windowStart, TimePoint windowEnd);

// Point-set difference a \ b over integer time-points.
IntervalList intervalDifference(const IntervalList& a, const IntervalList& b);

// start(F=V) at every Ts and end(F=V) at every closed Tf, sorted by time.
// Event types are rendered as `start(<fluent>=<value>)` / `end(<fluent>=<value>)`.
std::vector<EventInstance> boundaryEvents(const FluentValue& fv, const IntervalList& list);

std::string startEventName(const FluentValue& fv);
std::string endEventName(const FluentValue& fv);

// `fluent,vehicle,value,start_exclusive,end_inclusive|open`
inline constexpr const char* kIntervalCsvHeader =
    "fluent,vehicle,value,start_exclusive,end_inclusive";
std::string intervalCsvRow(const FluentValue& fv, const Interval& iv);
std::string formatEnd(const Interval& iv);

}  // namespace fleetcer
