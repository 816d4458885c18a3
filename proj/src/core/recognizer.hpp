#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ec_core.hpp"
#include "patterns.hpp"

namespace fleetcer {

// Working memory and query cadence. windowSize >= slideStep > 0.
struct WindowConfig {
  Duration windowSize = kHour;
  Duration slideStep = kHour;
  // Defaults to the first slide-aligned time after the first arrival.
  std::optional<TimePoint> firstQueryTime;

  void validate() const;
};

enum class EvaluationMode { Batch, Incremental };

struct RecognitionResult {
  TimePoint queryTime = 0;
  // Intervals lie within (queryTime - windowSize, queryTime]; an interval
  // still holding at queryTime is reported open.
  std::map<FluentValue, IntervalList> intervals;
  double recognitionTimeMs = 0;
  std::size_t eventsConsumed = 0;
  std::size_t dropped = 0;
  // Rule instantiations newly derived at this query (incremental bookkeeping).
  std::size_t newDerivations = 0;
};

// `fluent,vehicle,start_exclusive,end_inclusive|open,query_time`
inline constexpr const char* kResultCsvHeader = "fluent,vehicle,start_exclusive,end_inclusive,query_time";
std::string resultCsvRows(const RecognitionResult& r);

// `query_time,recognition_ms,events_in_window,dropped`
inline constexpr const char* kMetricsCsvHeader = "query_time,recognition_ms,events_in_window,dropped";
std::string metricsCsvRow(const RecognitionResult& r);

// One single-threaded recognition engine. Engines share only the immutable
// pattern set; run one per vehicle partition for parallelism.
class Engine {
 public:
  Engine(std::shared_ptr<const PatternSet> patterns, WindowConfig config);
  ~Engine();
  Engine(Engine&&) noexcept;
  Engine& operator=(Engine&&) noexcept;

  // Buffers `e` under its occurrence time. Events with occurrenceTime at or
  // before lastQueryTime - windowSize are discarded and counted. Returns
  // whether the event was retained. Throws ContractViolation for unknown
  // event types, wrong arity, or arrival before occurrence.
  bool ingest(const EventInstance& e);

  // Recomputes every fluent from the events in (q - windowSize, q].
  RecognitionResult evaluateQuery(TimePoint q);
  // Same result as evaluateQuery, derived from the previous query's state plus
  // the events that arrived since then.
  RecognitionResult evaluateQueryIncremental(TimePoint q);
  RecognitionResult evaluate(TimePoint q, EvaluationMode mode) {
    return mode == EvaluationMode::Batch ? evaluateQuery(q) : evaluateQueryIncremental(q);
  }

  std::optional<TimePoint> lastQueryTime() const;
  std::size_t droppedEvents() const;
  std::size_t bufferedEvents() const;
  const WindowConfig& config() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// Query times for a replay: from the configured first query (or the first
// slide-aligned time after the first arrival) up to the first query at or
// after `lastArrival`.
std::vector<TimePoint> queryTimesFor(const WindowConfig& config, TimePoint firstArrival, TimePoint lastArrival);

// Feeds `stream` (sorted by arrival time) through one engine with a
// data-driven query clock: query q is evaluated once an event arriving after
// q shows up, and the remaining queries up to `lastQuery` run at the end.
std::vector<RecognitionResult> recognizeStream(std::shared_ptr<const PatternSet> patterns,
                                               const WindowConfig& config, EvaluationMode mode,
                                               std::span<const EventInstance> stream,
                                               std::optional<TimePoint> lastQuery = std::nullopt);

}  // namespace fleetcer
