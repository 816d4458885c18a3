#pragma once

#include <cstdint>
#include <functional>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "ec_core.hpp"
#include "records.hpp"
#include "weather.hpp"

namespace fleetcer {

// Input events of one enriched record, all at rec.t, in a fixed order:
// moving(S) or stopped, the accelerometer events, fuelLevel(L), iceOnRoad,
// closeToGas. `attributes` names the weather columns of the record.
std::vector<EventInstance> recordToEvents(const EnrichedRecord& rec, const std::vector<std::string>& attributes,
                                          const IcePredicate& ice);

// `event_type,vehicle,occurrence_ts,arrival_ts,arg1,arg2`
inline constexpr const char* kEventCsvHeader = "event_type,vehicle,occurrence_ts,arrival_ts,arg1,arg2";
std::string eventCsvRow(const EventInstance& e);
void writeEventCsv(std::ostream& out, std::span<const EventInstance> events);
// Throws ParseError (with line number) on malformed rows.
std::vector<EventInstance> readEventCsv(std::istream& in);

struct DelayConfig {
  double fraction = 0;
  double gammaShape = 2;  // integer shape: sampled as a sum of exponentials
  double gammaScale = 2;
  double unitScaleSecs = 7200;
  std::uint64_t seed = 1;

  // Throws ContractViolation on out-of-range values.
  void validate() const;
  double meanDelaySecs() const { return gammaShape * gammaScale * unitScaleSecs; }
  double delayVarianceSecs2() const { return gammaShape * gammaScale * gammaScale * unitScaleSecs * unitScaleSecs; }
};

// Events in arrival order, plus where they came from.
struct ReplayStream {
  std::vector<EventInstance> events;
  std::size_t sourceRecords = 0;
  std::size_t validationDropped = 0;
};

// Each event is selected with probability cfg.fraction; a selected event
// arrives occurrenceTime + round(Gamma(k, scale) * unitScale) seconds, the
// rest arrive on occurrence. The result is stably sorted by arrival time.
// `stream` must be sorted by occurrence time.
ReplayStream injectDelays(ReplayStream stream, const DelayConfig& cfg);

struct ReplayStats {
  std::size_t delivered = 0;
  // Deliveries whose occurrence time precedes the previous delivery's.
  std::size_t inversions = 0;
  double wallSeconds = 0;
};

// Hands events to `sink` in arrival order. pacing > 0 replays `pacing`
// stream-seconds per wall-clock second; 0 replays as fast as possible.
ReplayStats replay(const ReplayStream& stream, const std::function<void(const EventInstance&)>& sink,
                   double pacing = 0);

}  // namespace fleetcer
