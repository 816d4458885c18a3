#include <doctest.h>

#include <fstream>
#include <set>
#include <sstream>

#include "error.hpp"
#include "pipeline.hpp"
#include "synth.hpp"
#include "temp_dir.hpp"

using namespace fleetcer;

namespace {

struct Sample {
  TempDir dir;
  PipelineConfig cfg;

  explicit Sample(std::size_t vehicles = 6, Duration duration = kDay) {
    SynthConfig sc;
    sc.vehicles = vehicles;
    sc.duration = duration;
    sc.pois = 120;
    writeFleet(generateFleet(sc), dir.path());
    cfg.vehicles = dir / "vehicles.csv";
    cfg.pois = dir / "pois.csv";
    cfg.weatherDir = dir / "weather";
  }
};

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::map<FluentValue, IntervalList>> intervalsOf(const std::vector<RecognitionResult>& rs) {
  std::vector<std::map<FluentValue, IntervalList>> out;
  for (const auto& r : rs) out.push_back(r.intervals);
  return out;
}

}  // namespace

TEST_CASE("partitioning by vehicle") {
  CHECK(partitionOf("anything", 1) == 0);
  CHECK(partitionOf("v1", 4) == partitionOf("v1", 4));
  // FNV-1a 64 of "a" is 0xaf63dc4c8601ec8c
  CHECK(partitionOf("a", 1000) == 0xaf63dc4c8601ec8cULL % 1000);

  auto events = syntheticEventStream(3000, 25, 0, kDay, 2);
  auto parts = partitionByVehicle(events, 4);
  REQUIRE(parts.size() == 4);
  std::size_t total = 0;
  std::map<std::string, std::size_t> owner;
  for (std::size_t w = 0; w < parts.size(); ++w) {
    total += parts[w].size();
    CHECK(std::is_sorted(parts[w].begin(), parts[w].end(),
                         [](auto& a, auto& b) { return a.occurrenceTime < b.occurrenceTime; }));
    for (const auto& e : parts[w]) {
      auto [it, fresh] = owner.emplace(e.vehicle, w);
      CHECK(it->second == w);
    }
  }
  CHECK(total == events.size());
}

TEST_CASE("settings") {
  auto s = parseSettings("# run\nwindow_secs = 7200\nslide_secs=3600\nmode=incremental\nworkers=2\n\ndelay_fraction=0.2\n");
  CHECK(s.at("window_secs") == "7200");
  auto cfg = pipelineConfigFromSettings(s);
  CHECK(cfg.window.windowSize == 7200);
  CHECK(cfg.window.slideStep == 3600);
  CHECK(cfg.mode == EvaluationMode::Incremental);
  CHECK(cfg.workers == 2);
  REQUIRE(cfg.delays);
  CHECK(cfg.delays->fraction == doctest::Approx(0.2));
  CHECK_THROWS_AS(pipelineConfigFromSettings({{"windw_secs", "10"}}), ContractViolation);
  CHECK_THROWS_AS(pipelineConfigFromSettings({{"workers", "many"}}), ContractViolation);
  CHECK_THROWS_AS(pipelineConfigFromSettings({{"mode", "fast"}}), ContractViolation);

  auto sample = parseSettings(slurp(std::string(FLEETCER_TEST_DATA) + "/../../config/sample.conf"));
  CHECK_NOTHROW(pipelineConfigFromSettings(sample));
}

TEST_CASE("end-to-end run on a synthetic day") {
  Sample s;
  TempDir out;
  s.cfg.outputDir = out.path();
  auto res = runPipeline(s.cfg);
  const auto& rep = res.report;
  CHECK(rep.queryTimes.size() >= 24);
  CHECK(res.results.size() == rep.queryTimes.size());
  CHECK(rep.sourceRecords == 6 * 1440);
  CHECK(rep.validationDropped == 0);
  CHECK(rep.events > rep.sourceRecords);
  CHECK(rep.cache.hitRatio() > 0.99);
  CHECK(rep.lateDropped == 0);
  CHECK(rep.avgRecognitionMs >= 0);
  CHECK(rep.throughput > 0);

  std::set<std::string> fluents;
  for (const auto& r : res.results) {
    for (const auto& [fv, list] : r.intervals) {
      fluents.insert(fv.fluent);
      CHECK_FALSE(list.empty());
      for (const auto& iv : list) {
        CHECK(iv.openStart >= r.queryTime - s.cfg.window.windowSize);
        if (iv.end) CHECK(*iv.end <= r.queryTime);
      }
    }
  }
  CHECK(fluents.contains("highSpeed"));

  for (const char* f : {"enriched.csv", "events.csv", "intervals.csv", "metrics.csv", "report.json"})
    CHECK(std::filesystem::file_size(out / f) > 0);
  CHECK(slurp(out / "intervals.csv") == intervalsCsv(res.results));
  auto metrics = slurp(out / "metrics.csv");
  CHECK(std::count(metrics.begin(), metrics.end(), '\n') == static_cast<long>(rep.queryTimes.size()) + 1);
  CHECK(slurp(out / "report.json").find("\"avg_recognition_ms\"") != std::string::npos);
}

TEST_CASE("worker count does not change the output") {
  Sample s(9);
  auto one = runPipeline(s.cfg);
  s.cfg.workers = 4;
  auto four = runPipeline(s.cfg);
  CHECK(intervalsCsv(one.results) == intervalsCsv(four.results));
  CHECK(four.report.workers == 4);
}

TEST_CASE("delayed incremental equals delayed batch") {
  Sample s(5);
  s.cfg.window = {2 * kHour, kHour, std::nullopt};
  s.cfg.delays = DelayConfig{};
  s.cfg.delays->fraction = 0.3;
  s.cfg.delays->seed = 5;
  auto batch = runPipeline(s.cfg);
  s.cfg.mode = EvaluationMode::Incremental;
  auto inc = runPipeline(s.cfg);
  CHECK(intervalsOf(batch.results) == intervalsOf(inc.results));
  CHECK(batch.report.delayedEvents > 0);
  CHECK(batch.report.lateDropped > 0);
  CHECK(batch.report.lateDropped == inc.report.lateDropped);
}

TEST_CASE("distinct failure kinds") {
  Sample s(2, 2 * kHour);
  auto missing = s.cfg;
  missing.vehicles = s.dir / "nope.csv";
  CHECK_THROWS_AS(runPipeline(missing), IoError);

  auto badPatterns = s.cfg;
  badPatterns.patterns = s.dir.write("bad.patterns", "fluent x\n init whenever\n");
  CHECK_THROWS_AS(runPipeline(badPatterns), ParseError);

  auto noRecords = s.cfg;
  noRecords.vehicles = s.dir.write("junk.csv", std::string(kVehicleCsvHeader) + "\nv1,,1,1,0,0,0,0,\nv1,x,1,1,0,0,0,0,\n");
  CHECK_THROWS_AS(runPipeline(noRecords), NoRecordsError);

  auto badWindow = s.cfg;
  badWindow.window.slideStep = 0;
  CHECK_THROWS_AS(runPipeline(badWindow), ContractViolation);
}

TEST_CASE("sweep") {
  Sample s(4);
  const std::vector<Duration> windows{kHour, 2 * kHour, 4 * kHour, 8 * kHour};
  const std::vector<unsigned> workers{1, 2, 4, 8};
  auto rows = sweepBench(s.cfg, windows, workers, {});
  REQUIRE(rows.size() == 16);
  for (const auto& r : rows) {
    CHECK(r.mode == EvaluationMode::Batch);
    CHECK(r.slide == r.window);
    CHECK(r.error.empty());
    CHECK(r.throughput > 0);
  }
  CHECK(sweepCsvRow(rows[0]).rfind("3600,3600,1,batch,0,", 0) == 0);

  const std::vector<double> fractions{0.1};
  auto delayed = sweepBench(s.cfg, std::span(windows).first(2), std::span(workers).first(1), fractions);
  REQUIRE(delayed.size() == 4);
  for (const auto& r : delayed) CHECK(r.slide == kHour);
  CHECK(std::count_if(delayed.begin(), delayed.end(), [](auto& r) { return r.mode == EvaluationMode::Incremental; }) == 2);
}

TEST_CASE("single-stage commands compose to the full run") {
  Sample s(3, 6 * kHour);
  std::ifstream vehicles(s.cfg.vehicles);
  std::stringstream weather, poi, events;
  auto w = enrichWeatherCsv(vehicles, weather, s.cfg.weatherDir, s.cfg.weatherAttributes);
  CHECK(w.read == 3 * 360);
  CHECK(w.written == w.read);
  auto index = loadPoiIndex(s.cfg.pois, s.cfg.thetaMeters);
  CHECK(enrichPoiCsv(weather, poi, index).written == w.written);
  deriveEventsCsv(poi, events, IcePredicate::parse(s.cfg.icePredicate));
  auto staged = readEventCsv(events);

  auto prepared = prepareEvents(s.cfg);
  CHECK(staged == prepared.stream.events);
}
