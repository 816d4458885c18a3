#include "fleetcer/fleetcer.h"

#include <chrono>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>
#include <string>

#include "csv.hpp"
#include "error.hpp"
#include "pipeline.hpp"
#include "synth.hpp"

using namespace fleetcer;

struct fc_config {
  std::map<std::string, std::string> settings;
};

struct fc_report {
  BenchReport report;
  std::vector<RecognitionResult> results;
};

struct fc_patterns {
  PatternSet set;
};

struct fc_engine {
  Engine engine;
};

namespace {

thread_local std::string lastError;

fc_status fail(fc_status status, const std::string& message) {
  lastError = message;
  return status;
}

// Runs fn, translating exceptions into status codes.
template <typename Fn>
fc_status guarded(Fn&& fn) noexcept {
  try {
    lastError.clear();
    fn();
    return FC_OK;
  } catch (const ParseError& e) {
    return fail(FC_ERR_PARSE, e.what());
  } catch (const IoError& e) {
    return fail(FC_ERR_IO, e.what());
  } catch (const NoRecordsError& e) {
    return fail(FC_ERR_NO_RECORDS, e.what());
  } catch (const ContractViolation& e) {
    return fail(FC_ERR_CONTRACT, e.what());
  } catch (const std::filesystem::filesystem_error& e) {
    return fail(FC_ERR_IO, e.what());
  } catch (const std::exception& e) {
    return fail(FC_ERR_INTERNAL, e.what());
  } catch (...) {
    return fail(FC_ERR_INTERNAL, "unknown error");
  }
}

char* dup(const std::string& s) {
  auto* p = static_cast<char*>(std::malloc(s.size() + 1));
  if (!p) throw std::bad_alloc();
  std::memcpy(p, s.c_str(), s.size() + 1);
  return p;
}

void setCounts(fc_stage_counts* out, const StageCounts& c) {
  if (out) *out = {c.read, c.written, c.rejected};
}

std::ifstream openIn(const char* path) {
  std::ifstream in(path);
  if (!in) throw IoError(std::string("cannot open ") + path);
  return in;
}

std::ofstream openOut(const char* path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(std::string("cannot write ") + path);
  return out;
}

void finish(std::ofstream& out, const char* path) {
  out.flush();
  if (!out) throw IoError(std::string("cannot write ") + path);
}

#define FC_REQUIRE(cond, what) \
  if (!(cond)) return fail(FC_ERR_INVALID_ARGUMENT, what)

}  // namespace

extern "C" {

const char* fc_last_error(void) { return lastError.c_str(); }

const char* fc_status_name(fc_status status) {
  switch (status) {
    case FC_OK: return "ok";
    case FC_ERR_INTERNAL: return "internal error";
    case FC_ERR_INVALID_ARGUMENT: return "invalid argument";
    case FC_ERR_IO: return "i/o error";
    case FC_ERR_PARSE: return "parse error";
    case FC_ERR_CONTRACT: return "contract violation";
    case FC_ERR_NO_RECORDS: return "no records";
  }
  return "unknown status";
}

void fc_string_free(char* s) { std::free(s); }

fc_status fc_config_new(fc_config** out) {
  FC_REQUIRE(out, "out is null");
  return guarded([&] { *out = new fc_config; });
}

void fc_config_free(fc_config* cfg) { delete cfg; }

fc_status fc_config_set(fc_config* cfg, const char* key, const char* value) {
  FC_REQUIRE(cfg && key && value, "null argument");
  return guarded([&] { cfg->settings[key] = value; });
}

fc_status fc_config_load(fc_config* cfg, const char* path) {
  FC_REQUIRE(cfg && path, "null argument");
  return guarded([&] {
    auto in = openIn(path);
    std::stringstream ss;
    ss << in.rdbuf();
    for (auto& [k, v] : parseSettings(ss.str())) cfg->settings[k] = v;
  });
}

fc_status fc_config_get(const fc_config* cfg, const char* key, char** out) {
  FC_REQUIRE(cfg && key && out, "null argument");
  auto it = cfg->settings.find(key);
  if (it == cfg->settings.end()) return fail(FC_ERR_INVALID_ARGUMENT, std::string("setting not found: ") + key);
  return guarded([&] { *out = dup(it->second); });
}

fc_status fc_config_validate(const fc_config* cfg) {
  FC_REQUIRE(cfg, "config is null");
  return guarded([&] { pipelineConfigFromSettings(cfg->settings); });
}

fc_status fc_run_pipeline(const fc_config* cfg, fc_report** out) {
  FC_REQUIRE(cfg && out, "null argument");
  return guarded([&] {
    auto pc = pipelineConfigFromSettings(cfg->settings);
    if (pc.vehicles.empty()) throw ContractViolation("setting 'vehicles' is required");
    auto result = runPipeline(pc);
    *out = new fc_report{std::move(result.report), std::move(result.results)};
  });
}

fc_status fc_recognize(const fc_config* cfg, const char* events_csv, fc_report** out) {
  FC_REQUIRE(cfg && events_csv && out, "null argument");
  return guarded([&] {
    const auto t0 = std::chrono::steady_clock::now();
    auto pc = pipelineConfigFromSettings(cfg->settings);
    auto in = openIn(events_csv);
    auto events = readEventCsv(in);
    if (events.empty()) throw NoRecordsError(std::string("no events in ") + events_csv);
    std::stable_sort(events.begin(), events.end(),
                     [](const auto& a, const auto& b) { return a.arrivalTime < b.arrivalTime; });
    auto run = recognizePartitioned(loadPatterns(pc), pc.window, pc.mode, pc.workers, events);

    auto* r = new fc_report;
    auto& rep = r->report;
    rep.workers = pc.workers;
    rep.mode = pc.mode;
    rep.window = pc.window;
    for (const auto& q : run.results) {
      rep.queryTimes.push_back(q.queryTime);
      rep.perQueryMs.push_back(q.recognitionTimeMs);
      rep.avgRecognitionMs += q.recognitionTimeMs;
    }
    if (!run.results.empty()) rep.avgRecognitionMs /= static_cast<double>(run.results.size());
    rep.events = events.size();
    for (const auto& e : events) rep.delayedEvents += e.arrivalTime != e.occurrenceTime;
    rep.lateDropped = run.dropped;
    rep.cer = {events.size(), run.wallSeconds};
    rep.wallSeconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    rep.throughput = rep.wallSeconds > 0 ? static_cast<double>(rep.events) / rep.wallSeconds : 0.0;
    r->results = std::move(run.results);
    *out = r;
  });
}

void fc_report_free(fc_report* report) { delete report; }

fc_status fc_report_json(const fc_report* report, char** out) {
  FC_REQUIRE(report && out, "null argument");
  return guarded([&] { *out = dup(report->report.toJson()); });
}

fc_status fc_report_intervals_csv(const fc_report* report, char** out) {
  FC_REQUIRE(report && out, "null argument");
  return guarded([&] { *out = dup(intervalsCsv(report->results)); });
}

fc_status fc_report_metrics_csv(const fc_report* report, char** out) {
  FC_REQUIRE(report && out, "null argument");
  return guarded([&] { *out = dup(metricsCsv(report->results)); });
}

size_t fc_report_query_count(const fc_report* report) { return report ? report->results.size() : 0; }

double fc_report_avg_recognition_ms(const fc_report* report) { return report ? report->report.avgRecognitionMs : 0.0; }

fc_status fc_sweep(const fc_config* cfg, const int64_t* windows_secs, size_t n_windows, const unsigned* workers,
                   size_t n_workers, const double* delay_fractions, size_t n_fractions, char** csv_out) {
  FC_REQUIRE(cfg && csv_out, "null argument");
  FC_REQUIRE(windows_secs && n_windows && workers && n_workers, "sweep needs windows and worker counts");
  FC_REQUIRE(delay_fractions || n_fractions == 0, "null delay fractions");
  return guarded([&] {
    auto pc = pipelineConfigFromSettings(cfg->settings);
    if (pc.vehicles.empty()) throw ContractViolation("setting 'vehicles' is required");
    std::vector<Duration> ws(windows_secs, windows_secs + n_windows);
    std::vector<unsigned> wk(workers, workers + n_workers);
    std::vector<double> df(delay_fractions, delay_fractions + n_fractions);
    std::string csv = std::string(kSweepCsvHeader) + "\n";
    for (const auto& row : sweepBench(pc, ws, wk, df)) csv += sweepCsvRow(row) + "\n";
    *csv_out = dup(csv);
  });
}

fc_status fc_enrich_weather(const char* vehicles_csv, const char* weather_dir, const char* attributes,
                            const char* out_csv, fc_stage_counts* counts) {
  FC_REQUIRE(vehicles_csv && out_csv, "null argument");
  return guarded([&] {
    std::vector<std::string> attrs = PipelineConfig{}.weatherAttributes;
    if (attributes) {
      attrs.clear();
      for (auto& f : splitCsvLine(attributes))
        if (auto t = trim(f); !t.empty()) attrs.emplace_back(t);
    }
    auto in = openIn(vehicles_csv);
    auto out = openOut(out_csv);
    setCounts(counts, enrichWeatherCsv(in, out, weather_dir ? weather_dir : "", attrs));
    finish(out, out_csv);
  });
}

fc_status fc_enrich_poi(const char* enriched_csv, const char* poi_csv, double theta_meters, const char* out_csv,
                        fc_stage_counts* counts) {
  FC_REQUIRE(enriched_csv && poi_csv && out_csv, "null argument");
  return guarded([&] {
    auto index = loadPoiIndex(poi_csv, theta_meters);
    auto in = openIn(enriched_csv);
    auto out = openOut(out_csv);
    setCounts(counts, enrichPoiCsv(in, out, index));
    finish(out, out_csv);
  });
}

fc_status fc_derive_events(const char* enriched_csv, const char* ice_predicate, const char* out_csv,
                           fc_stage_counts* counts) {
  FC_REQUIRE(enriched_csv && out_csv, "null argument");
  return guarded([&] {
    auto ice = IcePredicate::parse(ice_predicate ? ice_predicate : IcePredicate::kDefault);
    auto in = openIn(enriched_csv);
    auto out = openOut(out_csv);
    setCounts(counts, deriveEventsCsv(in, out, ice));
    finish(out, out_csv);
  });
}

fc_status fc_inject_delays(const char* events_csv, const char* out_csv, double fraction, uint64_t seed,
                           double unit_scale_secs, fc_stage_counts* counts) {
  FC_REQUIRE(events_csv && out_csv, "null argument");
  return guarded([&] {
    DelayConfig dc;
    dc.fraction = fraction;
    dc.seed = seed;
    dc.unitScaleSecs = unit_scale_secs;
    dc.validate();
    auto in = openIn(events_csv);
    auto out = openOut(out_csv);
    setCounts(counts, injectDelaysCsv(in, out, dc));
    finish(out, out_csv);
  });
}

fc_status fc_generate_sample(const char* dir, size_t vehicles, int64_t duration_secs, uint64_t seed) {
  FC_REQUIRE(dir, "null argument");
  FC_REQUIRE(vehicles > 0 && duration_secs > 0, "vehicles and duration must be positive");
  return guarded([&] {
    SynthConfig sc;
    sc.vehicles = vehicles;
    sc.duration = duration_secs;
    sc.seed = seed;
    writeFleet(generateFleet(sc), dir);
  });
}

fc_status fc_patterns_builtin(fc_patterns** out) {
  FC_REQUIRE(out, "out is null");
  return guarded([&] { *out = new fc_patterns{builtinFleetPatterns()}; });
}

fc_status fc_patterns_parse(const char* text, fc_patterns** out) {
  FC_REQUIRE(text && out, "null argument");
  return guarded([&] { *out = new fc_patterns{parsePatternFile(text)}; });
}

fc_status fc_patterns_set_thresholds(fc_patterns* patterns, const char* text) {
  FC_REQUIRE(patterns && text, "null argument");
  return guarded([&] { patterns->set.thresholds = parseThresholds(text); });
}

fc_status fc_patterns_serialize(const fc_patterns* patterns, char** out) {
  FC_REQUIRE(patterns && out, "null argument");
  return guarded([&] { *out = dup(serializePatterns(patterns->set)); });
}

void fc_patterns_free(fc_patterns* patterns) { delete patterns; }

fc_status fc_engine_new(const fc_patterns* patterns, int64_t window_secs, int64_t slide_secs, int64_t first_query,
                        fc_engine** out) {
  FC_REQUIRE(patterns && out, "null argument");
  return guarded([&] {
    WindowConfig wc{window_secs, slide_secs, std::nullopt};
    if (first_query >= 0) wc.firstQueryTime = first_query;
    *out = new fc_engine{Engine(std::make_shared<const PatternSet>(patterns->set), wc)};
  });
}

fc_status fc_engine_ingest(fc_engine* engine, const char* event_type, const char* vehicle, const double* args,
                           size_t n_args, int64_t occurrence, int64_t arrival, int* retained) {
  FC_REQUIRE(engine && event_type && vehicle && (args || n_args == 0), "null argument");
  return guarded([&] {
    EventInstance e{event_type, vehicle, std::vector<double>(args, args + n_args), occurrence, arrival};
    const bool kept = engine->engine.ingest(e);
    if (retained) *retained = kept ? 1 : 0;
  });
}

fc_status fc_engine_evaluate(fc_engine* engine, int64_t query_time, int incremental, char** csv_out) {
  FC_REQUIRE(engine, "engine is null");
  return guarded([&] {
    auto r = engine->engine.evaluate(query_time, incremental ? EvaluationMode::Incremental : EvaluationMode::Batch);
    if (csv_out) *csv_out = dup(std::string(kResultCsvHeader) + "\n" + resultCsvRows(r));
  });
}

size_t fc_engine_dropped(const fc_engine* engine) { return engine ? engine->engine.droppedEvents() : 0; }

void fc_engine_free(fc_engine* engine) { delete engine; }

}  // extern "C"
