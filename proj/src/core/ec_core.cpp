#include "ec_core.hpp"

#include <algorithm>
#include <limits>

#include "csv.hpp"
#include "error.hpp"

namespace fleetcer {

namespace {

constexpr TimePoint kInfinity = std::numeric_limits<TimePoint>::max();

TimePoint endOrInfinity(const Interval& iv) { return iv.end.value_or(kInfinity); }

std::optional<TimePoint> finiteEnd(TimePoint e) {
  return e == kInfinity ? std::nullopt : std::optional<TimePoint>{e};
}

}  // namespace

IntervalList IntervalList::fromIntervals(std::vector<Interval> intervals) {
  for (std::size_t i = 0; i < intervals.size(); ++i) {
    const auto& iv = intervals[i];
    if (iv.openStart < 0) throw ContractViolation("interval start is negative");
    if (iv.end && *iv.end <= iv.openStart) throw ContractViolation("interval end must exceed start");
    if (iv.isOpen() && i + 1 != intervals.size())
      throw ContractViolation("only the last interval may be open");
    if (i > 0 && intervals[i - 1].end && *intervals[i - 1].end >= iv.openStart)
      throw ContractViolation("intervals must be sorted, disjoint and non-adjacent");
  }
  return IntervalList(std::move(intervals));
}

IntervalList makeIntervals(std::span<const TimePoint> initiations,
                           std::span<const TimePoint> terminations) {
  if (!std::is_sorted(initiations.begin(), initiations.end()))
    throw ContractViolation("makeIntervals: initiation points are not sorted");
  if (!std::is_sorted(terminations.begin(), terminations.end()))
    throw ContractViolation("makeIntervals: termination points are not sorted");

  std::vector<Interval> out;
  std::size_t i = 0, j = 0;
  const std::size_t ni = initiations.size(), nt = terminations.size();
  while (i < ni) {
    const TimePoint start = initiations[i];
    TimePoint from = start;
    for (;;) {
      while (j < nt && terminations[j] <= from) ++j;
      if (j == nt) {
        out.push_back({start, std::nullopt});
        return IntervalList(std::move(out));
      }
      const TimePoint close = terminations[j];
      while (i < ni && initiations[i] < close) ++i;
      if (i < ni && initiations[i] == close) {
        // Re-initiated exactly where it would end: the run continues.
        from = close;
        continue;
      }
      out.push_back({start, close});
      break;
    }
  }
  return IntervalList(std::move(out));
}

bool holdsAt(const IntervalList& list, TimePoint t) {
  const auto& v = list.intervals();
  // First interval whose end is >= t; it is the only candidate.
  auto it = std::lower_bound(v.begin(), v.end(), t, [](const Interval& iv, TimePoint x) {
    return endOrInfinity(iv) < x;
  });
  return it != v.end() && it->contains(t);
}

IntervalList clipToWindow(const IntervalList& list, TimePoint windowStart, TimePoint windowEnd) {
  if (windowStart >= windowEnd) throw ContractViolation("clipToWindow: empty window");
  std::vector<Interval> out;
  for (const auto& iv : list) {
    const TimePoint s = std::max(iv.openStart, windowStart);
    const TimePoint e = std::min(endOrInfinity(iv), windowEnd);
    if (e > s) out.push_back({s, e});
  }
  return IntervalList(std::move(out));
}

IntervalList intervalDifference(const IntervalList& a, const IntervalList& b) {
  std::vector<Interval> out;
  const auto& bs = b.intervals();
  std::size_t j = 0;
  for (const auto& iv : a) {
    TimePoint cur = iv.openStart;
    const TimePoint aEnd = endOrInfinity(iv);
    while (j < bs.size() && endOrInfinity(bs[j]) <= cur) ++j;
    for (std::size_t k = j; k < bs.size() && bs[k].openStart < aEnd; ++k) {
      if (bs[k].openStart > cur) out.push_back({cur, bs[k].openStart});
      cur = std::max(cur, endOrInfinity(bs[k]));
      if (cur >= aEnd) break;
    }
    if (cur < aEnd) out.push_back({cur, finiteEnd(aEnd)});
  }
  return IntervalList(std::move(out));
}

std::string startEventName(const FluentValue& fv) {
  return "start(" + fv.fluent + "=" + fv.value + ")";
}

std::string endEventName(const FluentValue& fv) {
  return "end(" + fv.fluent + "=" + fv.value + ")";
}

std::vector<EventInstance> boundaryEvents(const FluentValue& fv, const IntervalList& list) {
  std::vector<EventInstance> out;
  const auto startName = startEventName(fv);
  const auto endName = endEventName(fv);
  for (const auto& iv : list) {
    out.push_back({startName, fv.vehicle, {}, iv.openStart, iv.openStart});
    if (iv.end) out.push_back({endName, fv.vehicle, {}, *iv.end, *iv.end});
  }
  return out;
}

std::string formatEnd(const Interval& iv) {
  return iv.end ? std::to_string(*iv.end) : std::string("open");
}

std::string intervalCsvRow(const FluentValue& fv, const Interval& iv) {
  return csvEscape(fv.fluent) + "," + csvEscape(fv.vehicle) + "," + csvEscape(fv.value) + "," +
         std::to_string(iv.openStart) + "," + formatEnd(iv);
}

}  // namespace fleetcer
