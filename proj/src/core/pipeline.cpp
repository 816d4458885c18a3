#include "pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "bounded_queue.hpp"
#include "csv.hpp"
#include "error.hpp"

namespace fleetcer {

namespace {

using Clock = std::chrono::steady_clock;

double secondsSince(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string readFile(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::ifstream openInput(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  return in;
}

void writeFile(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out || !(out << text)) throw IoError("cannot write " + path.string());
}

bool isVehicleHeader(std::string_view line) { return trim(line).starts_with("id,"); }

void sortByOccurrence(std::vector<EventInstance>& events) {
  std::stable_sort(events.begin(), events.end(),
                   [](const auto& a, const auto& b) { return a.occurrenceTime < b.occurrenceTime; });
}

double toDouble(const std::string& key, const std::string& v) {
  auto d = parseDouble(v);
  if (!d) throw ContractViolation("setting " + key + ": '" + v + "' is not a number");
  return *d;
}

long long toInt(const std::string& key, const std::string& v) {
  auto i = parseInt(v);
  if (!i) throw ContractViolation("setting " + key + ": '" + v + "' is not an integer");
  return *i;
}

std::vector<std::string> splitList(std::string_view s) {
  std::vector<std::string> out;
  for (auto& f : splitCsvLine(s))
    if (auto t = trim(f); !t.empty()) out.emplace_back(t);
  return out;
}

const char* modeName(EvaluationMode m) { return m == EvaluationMode::Batch ? "batch" : "incremental"; }

}  // namespace

void PipelineConfig::validate() const {
  window.validate();
  if (workers < 1) throw ContractViolation("workers must be >= 1");
  if (!(thetaMeters >= 0)) throw ContractViolation("theta must be non-negative");
  if (cellSizeDegrees && !(*cellSizeDegrees > 0)) throw ContractViolation("cell size must be positive");
  if (delays) delays->validate();
}

std::map<std::string, std::string> parseSettings(std::string_view text) {
  std::map<std::string, std::string> out;
  std::istringstream in{std::string(text)};
  std::string line;
  int lineNo = 0;
  while (readLine(in, line)) {
    ++lineNo;
    auto body = trim(std::string_view(line).substr(0, line.find('#')));
    if (body.empty()) continue;
    auto eq = body.find('=');
    if (eq == std::string_view::npos) throw ParseError("expected key=value", lineNo);
    out[std::string(trim(body.substr(0, eq)))] = std::string(trim(body.substr(eq + 1)));
  }
  return out;
}

PipelineConfig pipelineConfigFromSettings(const std::map<std::string, std::string>& settings) {
  PipelineConfig c;
  DelayConfig delay;
  bool delayed = false;
  for (const auto& [k, v] : settings) {
    if (k == "vehicles") c.vehicles = v;
    else if (k == "pois") c.pois = v;
    else if (k == "weather_dir") c.weatherDir = v;
    else if (k == "patterns") c.patterns = v;
    else if (k == "thresholds") c.thresholds = v;
    else if (k == "weather_attributes") c.weatherAttributes = splitList(v);
    else if (k == "ice_predicate") c.icePredicate = v;
    else if (k == "theta_meters") c.thetaMeters = toDouble(k, v);
    else if (k == "cell_size_deg") c.cellSizeDegrees = toDouble(k, v);
    else if (k == "window_secs") c.window.windowSize = toInt(k, v);
    else if (k == "slide_secs") c.window.slideStep = toInt(k, v);
    else if (k == "first_query") {
      auto t = parseTimestamp(v);
      if (!t) throw ContractViolation("setting first_query: invalid timestamp '" + v + "'");
      c.window.firstQueryTime = *t;
    } else if (k == "mode") {
      if (v == "batch") c.mode = EvaluationMode::Batch;
      else if (v == "incremental") c.mode = EvaluationMode::Incremental;
      else throw ContractViolation("setting mode: expected batch or incremental");
    } else if (k == "workers") {
      auto w = toInt(k, v);
      if (w < 1) throw ContractViolation("workers must be >= 1");
      c.workers = static_cast<unsigned>(w);
    } else if (k == "delay_fraction") {
      delay.fraction = toDouble(k, v);
      delayed = true;
    } else if (k == "seed") delay.seed = static_cast<std::uint64_t>(toInt(k, v));
    else if (k == "unit_scale_secs") delay.unitScaleSecs = toDouble(k, v);
    else if (k == "gamma_shape") delay.gammaShape = toDouble(k, v);
    else if (k == "gamma_scale") delay.gammaScale = toDouble(k, v);
    else if (k == "output_dir") c.outputDir = v;
    else if (k == "queue_capacity") c.queueCapacity = static_cast<std::size_t>(std::max(1LL, toInt(k, v)));
    else throw ContractViolation("unknown setting '" + k + "'");
  }
  if (delayed) c.delays = delay;
  c.validate();
  return c;
}

ThresholdRegistry placeholderThresholds() {
  ThresholdRegistry reg;
  reg.set(ThresholdRegistry::kAnyVehicle, "speed", 90);
  reg.set(ThresholdRegistry::kAnyVehicle, "fuel", 60);
  return reg;
}

std::shared_ptr<const PatternSet> loadPatterns(const PipelineConfig& cfg) {
  auto set = cfg.patterns.empty() ? builtinFleetPatterns() : parsePatternFile(readFile(cfg.patterns));
  set.thresholds = cfg.thresholds.empty() ? placeholderThresholds() : parseThresholds(readFile(cfg.thresholds));
  return std::make_shared<const PatternSet>(std::move(set));
}

std::size_t partitionOf(std::string_view vehicle, std::size_t workers) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : vehicle) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return static_cast<std::size_t>(h % std::max<std::size_t>(1, workers));
}

std::vector<std::vector<EventInstance>> partitionByVehicle(std::span<const EventInstance> events, std::size_t workers) {
  std::vector<std::vector<EventInstance>> parts(std::max<std::size_t>(1, workers));
  for (const auto& e : events) parts[partitionOf(e.vehicle, parts.size())].push_back(e);
  return parts;
}

EnrichedRecord enrichWeather(const VehicleRecord& rec, WeatherStore* store, const std::vector<std::string>& attributes) {
  EnrichedRecord r;
  r.record = rec;
  r.weather.assign(attributes.size(), std::nullopt);
  if (!store || store->empty()) return r;
  auto w = store->lookupWeather(rec.loc, rec.t, attributes);
  if (!w) return r;
  r.weatherOk = true;
  for (std::size_t i = 0; i < attributes.size(); ++i)
    if (auto it = w->find(attributes[i]); it != w->end()) r.weather[i] = it->second;
  return r;
}

void enrichPoi(EnrichedRecord& rec, const GridIndex& index, JoinStats* stats) {
  auto matches = index.distanceJoin(rec.record.loc);
  rec.poiCount = matches.size();
  rec.nearestGasDistanceM.reset();
  for (const auto& m : matches) {
    if (index.pois()[m.poi].type == kGasStationType) {
      rec.nearestGasDistanceM = m.distanceM;
      break;
    }
  }
  if (stats) {
    ++stats->records;
    stats->candidatesExamined += index.candidates(rec.record.loc).size();
    stats->matches += matches.size();
  }
}

GridIndex loadPoiIndex(const std::filesystem::path& poiCsv, double thetaMeters, std::optional<double> cellSizeDegrees) {
  auto in = openInput(poiCsv);
  auto parsed = readPoiCsv(in);
  const double cell = cellSizeDegrees.value_or(defaultCellSize(parsed.pois, thetaMeters));
  return GridIndex(std::move(parsed.pois), thetaMeters, cell);
}

PreparedStream prepareEvents(const PipelineConfig& cfg, bool keepEnriched) {
  cfg.validate();
  auto in = openInput(cfg.vehicles);
  std::optional<WeatherStore> store;
  if (!cfg.weatherDir.empty()) store.emplace(WeatherStore::openDirectory(cfg.weatherDir));
  std::optional<GridIndex> index;
  if (!cfg.pois.empty()) index.emplace(loadPoiIndex(cfg.pois, cfg.thetaMeters, cfg.cellSizeDegrees));
  const auto ice = IcePredicate::parse(cfg.icePredicate);

  PreparedStream out;
  out.attributes = cfg.weatherAttributes;
  out.hasPoi = index.has_value();
  if (index) out.join.index = index->stats();

  using Batch = std::vector<EnrichedRecord>;
  constexpr std::size_t kBatch = 256;
  BoundedQueue<Batch> toPoi(cfg.queueCapacity), toDerive(cfg.queueCapacity);
  std::exception_ptr error;
  std::mutex errorMu;
  auto fail = [&](std::exception_ptr e) {
    {
      std::lock_guard lock(errorMu);
      if (!error) error = e;
    }
    toPoi.close();
    toDerive.close();
  };

  std::thread weatherStage([&] {
    try {
      std::string line;
      Batch batch;
      bool first = true;
      auto busy = Clock::duration::zero();
      while (readLine(in, line)) {
        if (trim(line).empty()) continue;
        if (std::exchange(first, false) && isVehicleHeader(line)) continue;
        const auto t0 = Clock::now();
        ++out.stream.sourceRecords;
        auto v = validateRecord(line);
        if (v.record) batch.push_back(enrichWeather(*v.record, store ? &*store : nullptr, cfg.weatherAttributes));
        else ++out.stream.validationDropped;
        busy += Clock::now() - t0;
        if (batch.size() >= kBatch && !toPoi.push(std::exchange(batch, {}))) break;
      }
      if (!batch.empty()) toPoi.push(std::move(batch));
      out.weatherStage.busySeconds = std::chrono::duration<double>(busy).count();
    } catch (...) {
      fail(std::current_exception());
    }
    toPoi.close();
  });

  std::thread poiStage([&] {
    try {
      auto busy = Clock::duration::zero();
      while (auto batch = toPoi.pop()) {
        const auto t0 = Clock::now();
        if (index)
          for (auto& r : *batch) enrichPoi(r, *index, &out.join);
        out.poiStage.items += batch->size();
        busy += Clock::now() - t0;
        if (!toDerive.push(std::move(*batch))) break;
      }
      out.poiStage.busySeconds = std::chrono::duration<double>(busy).count();
    } catch (...) {
      fail(std::current_exception());
    }
    toDerive.close();
  });

  try {
    auto busy = Clock::duration::zero();
    while (auto batch = toDerive.pop()) {
      const auto t0 = Clock::now();
      for (auto& r : *batch) {
        auto events = recordToEvents(r, cfg.weatherAttributes, ice);
        std::move(events.begin(), events.end(), std::back_inserter(out.stream.events));
      }
      out.deriveStage.items += batch->size();
      if (keepEnriched) std::move(batch->begin(), batch->end(), std::back_inserter(out.enriched));
      busy += Clock::now() - t0;
    }
    out.deriveStage.busySeconds = std::chrono::duration<double>(busy).count();
  } catch (...) {
    fail(std::current_exception());
  }
  weatherStage.join();
  poiStage.join();
  if (error) std::rethrow_exception(error);

  out.weatherStage.items = out.stream.sourceRecords;
  if (store) out.cache = store->cacheStats();
  if (out.deriveStage.items == 0)
    throw NoRecordsError("no valid vehicle records in " + cfg.vehicles.string() + " (" +
                         std::to_string(out.stream.validationDropped) + " rejected)");
  sortByOccurrence(out.stream.events);
  return out;
}

RecognitionRun recognizePartitioned(std::shared_ptr<const PatternSet> patterns, const WindowConfig& window,
                                    EvaluationMode mode, unsigned workers,
                                    std::span<const EventInstance> arrivalOrdered) {
  window.validate();
  RecognitionRun run;
  if (arrivalOrdered.empty()) return run;
  const auto queries =
      queryTimesFor(window, arrivalOrdered.front().arrivalTime, arrivalOrdered.back().arrivalTime);
  WindowConfig shared = window;
  shared.firstQueryTime = queries.front();

  auto parts = partitionByVehicle(arrivalOrdered, std::max(1u, workers));
  std::vector<std::vector<RecognitionResult>> perWorker(parts.size());
  std::vector<std::exception_ptr> errors(parts.size());
  const auto t0 = Clock::now();
  {
    std::vector<std::jthread> threads;
    for (std::size_t w = 0; w < parts.size(); ++w) {
      threads.emplace_back([&, w] {
        try {
          perWorker[w] = recognizeStream(patterns, shared, mode, parts[w], queries.back());
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
  }
  run.wallSeconds = secondsSince(t0);
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);

  run.results.resize(queries.size());
  for (std::size_t i = 0; i < queries.size(); ++i) {
    auto& merged = run.results[i];
    merged.queryTime = queries[i];
    for (auto& results : perWorker) {
      if (results.size() != queries.size()) throw Error("worker produced a different number of queries");
      auto& r = results[i];
      merged.intervals.merge(r.intervals);
      merged.recognitionTimeMs = std::max(merged.recognitionTimeMs, r.recognitionTimeMs);
      merged.eventsConsumed += r.eventsConsumed;
      merged.dropped += r.dropped;
      merged.newDerivations += r.newDerivations;
    }
  }
  run.eventsConsumed = arrivalOrdered.size();
  run.dropped = run.results.back().dropped;
  return run;
}

std::string intervalsCsv(std::span<const RecognitionResult> results) {
  std::string out = std::string(kResultCsvHeader) + "\n";
  for (const auto& r : results) out += resultCsvRows(r);
  return out;
}

std::string metricsCsv(std::span<const RecognitionResult> results) {
  std::string out = std::string(kMetricsCsvHeader) + "\n";
  for (const auto& r : results) out += metricsCsvRow(r) + "\n";
  return out;
}

std::string BenchReport::toJson() const {
  using nlohmann::json;
  auto stage = [](const StageStats& s) {
    return json{{"items", s.items}, {"busy_seconds", s.busySeconds}, {"throughput_per_s", s.throughput()}};
  };
  json j;
  j["mode"] = modeName(mode);
  j["workers"] = workers;
  j["window_secs"] = window.windowSize;
  j["slide_secs"] = window.slideStep;
  j["queries"] = queryTimes.size();
  j["avg_recognition_ms"] = avgRecognitionMs;
  j["source_records"] = sourceRecords;
  j["validation_dropped"] = validationDropped;
  j["events"] = events;
  j["delayed_events"] = delayedEvents;
  j["late_dropped"] = lateDropped;
  j["wall_seconds"] = wallSeconds;
  j["throughput_events_per_s"] = throughput;
  j["stages"] = {{"weather", stage(weather)}, {"poi", stage(poi)}, {"derive", stage(derive)}, {"cer", stage(cer)}};
  j["weather_cache"] = {{"hits", cache.hits}, {"misses", cache.misses}, {"evictions", cache.evictions},
                        {"hit_ratio", cache.hitRatio()}};
  j["poi_join"] = {{"pois", join.index.pois},
                   {"cells", join.index.cells},
                   {"avg_pois_per_cell", join.index.avgPoisPerCell},
                   {"replication_factor", join.index.replicationFactor},
                   {"records", join.records},
                   {"avg_candidates", join.avgCandidates()},
                   {"matches", join.matches}};
  json perQuery = json::array();
  for (std::size_t i = 0; i < queryTimes.size(); ++i)
    perQuery.push_back({{"query_time", queryTimes[i]}, {"recognition_ms", perQueryMs[i]}});
  j["per_query"] = std::move(perQuery);
  return j.dump(2) + "\n";
}

PipelineOutput runPipeline(const PipelineConfig& cfg) {
  const auto t0 = Clock::now();
  auto patterns = loadPatterns(cfg);
  const bool writeOutputs = !cfg.outputDir.empty();
  auto prepared = prepareEvents(cfg, writeOutputs);
  ReplayStream stream = std::move(prepared.stream);
  std::size_t delayed = 0;
  if (cfg.delays) {
    stream = injectDelays(std::move(stream), *cfg.delays);
    for (const auto& e : stream.events) delayed += e.arrivalTime != e.occurrenceTime;
  }
  auto run = recognizePartitioned(patterns, cfg.window, cfg.mode, cfg.workers, stream.events);

  PipelineOutput out;
  auto& rep = out.report;
  rep.workers = cfg.workers;
  rep.mode = cfg.mode;
  rep.window = cfg.window;
  for (const auto& r : run.results) {
    rep.queryTimes.push_back(r.queryTime);
    rep.perQueryMs.push_back(r.recognitionTimeMs);
    rep.avgRecognitionMs += r.recognitionTimeMs;
  }
  if (!run.results.empty()) rep.avgRecognitionMs /= static_cast<double>(run.results.size());
  rep.sourceRecords = stream.sourceRecords;
  rep.validationDropped = stream.validationDropped;
  rep.events = stream.events.size();
  rep.delayedEvents = delayed;
  rep.lateDropped = run.dropped;
  rep.weather = prepared.weatherStage;
  rep.poi = prepared.poiStage;
  rep.derive = prepared.deriveStage;
  rep.cer = {stream.events.size(), run.wallSeconds};
  rep.cache = prepared.cache;
  rep.join = prepared.join;

  if (writeOutputs) {
    std::filesystem::create_directories(cfg.outputDir);
    std::string enriched = enrichedCsvHeader(prepared.attributes, prepared.hasPoi) + "\n";
    for (const auto& r : prepared.enriched) enriched += enrichedCsvRow(r, prepared.hasPoi) + "\n";
    writeFile(cfg.outputDir / "enriched.csv", enriched);
    std::ostringstream events;
    writeEventCsv(events, stream.events);
    writeFile(cfg.outputDir / "events.csv", events.str());
    writeFile(cfg.outputDir / "intervals.csv", intervalsCsv(run.results));
    writeFile(cfg.outputDir / "metrics.csv", metricsCsv(run.results));
  }
  rep.wallSeconds = secondsSince(t0);
  rep.throughput = rep.wallSeconds > 0 ? static_cast<double>(rep.events) / rep.wallSeconds : 0.0;
  if (writeOutputs) writeFile(cfg.outputDir / "report.json", rep.toJson());
  out.results = std::move(run.results);
  return out;
}

std::string sweepCsvRow(const SweepRow& row) {
  char buf[64];
  std::string out = std::to_string(row.window) + ',' + std::to_string(row.slide) + ',' + std::to_string(row.workers) +
                    ',' + modeName(row.mode) + ',' + formatNumber(row.delayFraction * 100) + ',';
  std::snprintf(buf, sizeof buf, "%.3f,%.1f", row.avgRecognitionMs, row.throughput);
  return out + buf + ',' + csvEscape(row.error);
}

std::vector<SweepRow> sweepBench(const PipelineConfig& cfg, std::span<const Duration> windows,
                                 std::span<const unsigned> workers, std::span<const double> delayFractions) {
  if (windows.empty() || workers.empty()) throw ContractViolation("sweep needs at least one window and one worker count");
  auto patterns = loadPatterns(cfg);
  auto prepared = prepareEvents(cfg);

  struct Variant {
    double fraction;
    std::vector<EventInstance> events;
  };
  std::vector<Variant> variants;
  if (delayFractions.empty()) {
    variants.push_back({0, prepared.stream.events});
  } else {
    for (double f : delayFractions) {
      DelayConfig dc = cfg.delays.value_or(DelayConfig{});
      dc.fraction = f;
      variants.push_back({f, injectDelays(prepared.stream, dc).events});
    }
  }

  std::vector<SweepRow> rows;
  for (Duration w : windows) {
    for (unsigned W : workers) {
      for (const auto& v : variants) {
        std::vector<EvaluationMode> modes{EvaluationMode::Batch};
        if (!delayFractions.empty()) modes.push_back(EvaluationMode::Incremental);
        for (auto mode : modes) {
          SweepRow row;
          row.window = w;
          row.slide = delayFractions.empty() ? w : kHour;
          row.workers = W;
          row.mode = mode;
          row.delayFraction = v.fraction;
          try {
            WindowConfig wc{w, row.slide, cfg.window.firstQueryTime};
            auto run = recognizePartitioned(patterns, wc, mode, W, v.events);
            for (const auto& r : run.results) row.avgRecognitionMs += r.recognitionTimeMs;
            if (!run.results.empty()) row.avgRecognitionMs /= static_cast<double>(run.results.size());
            row.throughput = run.wallSeconds > 0 ? static_cast<double>(run.eventsConsumed) / run.wallSeconds : 0.0;
          } catch (const std::exception& e) {
            row.error = e.what();
          }
          rows.push_back(std::move(row));
        }
      }
    }
  }
  return rows;
}

StageCounts enrichWeatherCsv(std::istream& vehicles, std::ostream& out, const std::filesystem::path& weatherDir,
                             const std::vector<std::string>& attributes, CacheStats* cache) {
  std::optional<WeatherStore> store;
  if (!weatherDir.empty()) store.emplace(WeatherStore::openDirectory(weatherDir));
  StageCounts counts;
  out << enrichedCsvHeader(attributes, false) << '\n';
  std::string line;
  bool first = true;
  while (readLine(vehicles, line)) {
    if (trim(line).empty()) continue;
    if (std::exchange(first, false) && isVehicleHeader(line)) continue;
    ++counts.read;
    auto v = validateRecord(line);
    if (!v.record) {
      ++counts.rejected;
      continue;
    }
    out << enrichedCsvRow(enrichWeather(*v.record, store ? &*store : nullptr, attributes), false) << '\n';
    ++counts.written;
  }
  if (cache && store) *cache = store->cacheStats();
  if (counts.written == 0) throw NoRecordsError("no valid vehicle records");
  return counts;
}

namespace {

// Reads the header of an enriched CSV, then every row.
template <typename Fn>
EnrichedCsvReader readEnriched(std::istream& in, Fn&& onRecord) {
  std::string line;
  int lineNo = 0;
  std::optional<EnrichedCsvReader> reader;
  while (readLine(in, line)) {
    ++lineNo;
    if (trim(line).empty()) continue;
    if (!reader) {
      reader.emplace(line);
      continue;
    }
    onRecord(reader->parse(line, lineNo));
  }
  if (!reader) throw NoRecordsError("enriched input is empty");
  return *reader;
}

}  // namespace

StageCounts enrichPoiCsv(std::istream& enriched, std::ostream& out, const GridIndex& index, JoinStats* stats) {
  StageCounts counts;
  std::vector<EnrichedRecord> records;
  auto reader = readEnriched(enriched, [&](EnrichedRecord r) {
    ++counts.read;
    enrichPoi(r, index, stats);
    records.push_back(std::move(r));
  });
  if (stats) stats->index = index.stats();
  out << enrichedCsvHeader(reader.attributes(), true) << '\n';
  for (const auto& r : records) out << enrichedCsvRow(r, true) << '\n';
  counts.written = records.size();
  if (counts.written == 0) throw NoRecordsError("no enriched records");
  return counts;
}

StageCounts deriveEventsCsv(std::istream& enriched, std::ostream& out, const IcePredicate& ice) {
  StageCounts counts;
  std::vector<EnrichedRecord> records;
  auto reader = readEnriched(enriched, [&](EnrichedRecord r) { records.push_back(std::move(r)); });
  std::vector<EventInstance> events;
  for (const auto& r : records) {
    ++counts.read;
    auto e = recordToEvents(r, reader.attributes(), ice);
    std::move(e.begin(), e.end(), std::back_inserter(events));
  }
  if (counts.read == 0) throw NoRecordsError("no enriched records");
  sortByOccurrence(events);
  writeEventCsv(out, events);
  counts.written = events.size();
  return counts;
}

StageCounts injectDelaysCsv(std::istream& events, std::ostream& out, const DelayConfig& cfg) {
  ReplayStream stream;
  stream.events = readEventCsv(events);
  if (stream.events.empty()) throw NoRecordsError("no events to delay");
  sortByOccurrence(stream.events);
  StageCounts counts;
  counts.read = stream.events.size();
  stream = injectDelays(std::move(stream), cfg);
  writeEventCsv(out, stream.events);
  counts.written = stream.events.size();
  return counts;
}

}  // namespace fleetcer
