#pragma once

#include <cstdint>
#include <filesystem>
#include <istream>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "ec_core.hpp"
#include "patterns.hpp"
#include "poi.hpp"
#include "recognizer.hpp"
#include "records.hpp"
#include "stream_io.hpp"
#include "weather.hpp"

namespace fleetcer {

struct PipelineConfig {
  std::filesystem::path vehicles;
  std::filesystem::path pois;        // optional
  std::filesystem::path weatherDir;  // optional
  std::filesystem::path patterns;    // empty: built-in fleet patterns
  std::filesystem::path thresholds;  // empty: placeholder defaults
  std::vector<std::string> weatherAttributes{"surfaceTemperature", "iceCover"};
  std::string icePredicate = IcePredicate::kDefault;
  double thetaMeters = 300;
  std::optional<double> cellSizeDegrees;
  WindowConfig window;
  EvaluationMode mode = EvaluationMode::Batch;
  unsigned workers = 1;
  std::optional<DelayConfig> delays;
  std::filesystem::path outputDir;  // empty: nothing written
  std::size_t queueCapacity = 64;   // batches per stage queue

  // Throws ContractViolation on inconsistent settings.
  void validate() const;
};

// Builds a PipelineConfig from `key=value` settings (the --config file format).
// Unknown keys and malformed values throw ContractViolation.
PipelineConfig pipelineConfigFromSettings(const std::map<std::string, std::string>& settings);
// Parses `key=value` lines; `#` starts a comment.
std::map<std::string, std::string> parseSettings(std::string_view text);
// Placeholder thresholds used when no threshold file is configured.
ThresholdRegistry placeholderThresholds();

// Patterns from cfg.patterns (or the built-in set) with thresholds attached.
std::shared_ptr<const PatternSet> loadPatterns(const PipelineConfig& cfg);

// Stable FNV-1a hash of the vehicle id, modulo `workers`.
std::size_t partitionOf(std::string_view vehicle, std::size_t workers);
// Splits `events` by vehicle, keeping the relative order inside each part.
std::vector<std::vector<EventInstance>> partitionByVehicle(std::span<const EventInstance> events, std::size_t workers);

struct StageStats {
  std::size_t items = 0;
  double busySeconds = 0;

  double throughput() const { return busySeconds > 0 ? static_cast<double>(items) / busySeconds : 0.0; }
};

struct JoinStats {
  GridIndexStats index;
  std::size_t records = 0;
  std::size_t candidatesExamined = 0;
  std::size_t matches = 0;

  double avgCandidates() const {
    return records ? static_cast<double>(candidatesExamined) / static_cast<double>(records) : 0.0;
  }
};

// Per-record enrichment steps, shared by the staged pipeline and the
// single-stage CLI commands.
EnrichedRecord enrichWeather(const VehicleRecord& rec, WeatherStore* store, const std::vector<std::string>& attributes);
void enrichPoi(EnrichedRecord& rec, const GridIndex& index, JoinStats* stats = nullptr);

struct PreparedStream {
  ReplayStream stream;  // sorted by occurrence time, arrival = occurrence
  std::vector<EnrichedRecord> enriched;  // only filled when requested
  std::vector<std::string> attributes;
  StageStats weatherStage, poiStage, deriveStage;
  CacheStats cache;
  JoinStats join;
  bool hasPoi = false;
};

// validate + weather -> poi -> event derivation, each stage on its own thread
// joined by bounded queues. Throws IoError, ParseError or NoRecordsError.
PreparedStream prepareEvents(const PipelineConfig& cfg, bool keepEnriched = false);

struct RecognitionRun {
  std::vector<RecognitionResult> results;  // one per query, merged over workers
  double wallSeconds = 0;
  std::size_t eventsConsumed = 0;
  std::size_t dropped = 0;
};

// W engines over vehicle partitions of `arrivalOrdered`, all evaluated at the
// same query times. Per-query recognition time is the slowest worker's.
RecognitionRun recognizePartitioned(std::shared_ptr<const PatternSet> patterns, const WindowConfig& window,
                                    EvaluationMode mode, unsigned workers,
                                    std::span<const EventInstance> arrivalOrdered);

struct BenchReport {
  std::vector<TimePoint> queryTimes;
  std::vector<double> perQueryMs;
  double avgRecognitionMs = 0;
  std::size_t sourceRecords = 0;
  std::size_t validationDropped = 0;
  std::size_t events = 0;
  std::size_t delayedEvents = 0;
  std::size_t lateDropped = 0;
  double wallSeconds = 0;
  double throughput = 0;  // events / wallSeconds
  StageStats weather, poi, derive, cer;
  CacheStats cache;
  JoinStats join;
  unsigned workers = 1;
  EvaluationMode mode = EvaluationMode::Batch;
  WindowConfig window;

  std::string toJson() const;
};

struct PipelineOutput {
  BenchReport report;
  std::vector<RecognitionResult> results;
};

// Full run. When cfg.outputDir is set writes enriched.csv, events.csv,
// intervals.csv, metrics.csv and report.json there.
PipelineOutput runPipeline(const PipelineConfig& cfg);

std::string intervalsCsv(std::span<const RecognitionResult> results);
std::string metricsCsv(std::span<const RecognitionResult> results);

struct SweepRow {
  Duration window = 0;
  Duration slide = 0;
  unsigned workers = 1;
  EvaluationMode mode = EvaluationMode::Batch;
  double delayFraction = 0;
  double avgRecognitionMs = 0;
  double throughput = 0;
  std::string error;
};

inline constexpr const char* kSweepCsvHeader =
    "window_secs,slide_secs,workers,mode,delay_pct,avg_recognition_ms,throughput,error";
std::string sweepCsvRow(const SweepRow& row);

// Enriches once, then recognizes for every combination. With no delay
// fractions: batch mode, slide = window. Otherwise for each fraction both
// modes with a 1 h slide. A failing combination is reported in its row.
std::vector<SweepRow> sweepBench(const PipelineConfig& cfg, std::span<const Duration> windows,
                                 std::span<const unsigned> workers, std::span<const double> delayFractions);

// Single-stage file commands.
struct StageCounts {
  std::size_t read = 0;
  std::size_t written = 0;
  std::size_t rejected = 0;
};
StageCounts enrichWeatherCsv(std::istream& vehicles, std::ostream& out, const std::filesystem::path& weatherDir,
                             const std::vector<std::string>& attributes, CacheStats* cache = nullptr);
StageCounts enrichPoiCsv(std::istream& enriched, std::ostream& out, const GridIndex& index,
                         JoinStats* stats = nullptr);
StageCounts deriveEventsCsv(std::istream& enriched, std::ostream& out, const IcePredicate& ice);
StageCounts injectDelaysCsv(std::istream& events, std::ostream& out, const DelayConfig& cfg);

GridIndex loadPoiIndex(const std::filesystem::path& poiCsv, double thetaMeters,
                       std::optional<double> cellSizeDegrees = std::nullopt);

}  // namespace fleetcer
