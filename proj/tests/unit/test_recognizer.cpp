#include <doctest.h>

#include <algorithm>
#include <random>

#include "ec_oracle.hpp"
#include "error.hpp"
#include "recognizer.hpp"

using namespace fleetcer;

namespace {

std::shared_ptr<const PatternSet> fleetPatterns() {
  auto ps = builtinFleetPatterns();
  ps.thresholds.set("*", "speed", 90);
  ps.thresholds.set("*", "fuel", 60);
  ps.thresholds.set("v2", "speed", 60);
  return std::make_shared<const PatternSet>(std::move(ps));
}

// Exercises start/end triggers, deadlines and a three-level hierarchy.
std::shared_ptr<const PatternSet> layeredPatterns() {
  auto ps = parsePatternFile(R"(
fluent highSpeed
  init when moving(S) if S > threshold(speed)
  term when moving(S) if S <= threshold(speed)
  term when stopped()
fluent lowFuel
  init when fuelLevel(L) if L < threshold(fuel)/2
  term when fuelLevel(L) if L >= threshold(fuel)/2
fluent alert deadline 40
  init when start(highSpeed)
  init when abruptCornering() if holds highSpeed
  term when closeToGas() and fuelLevel(L) if L >= threshold(fuel)*3/4
fluent iceAlert deadline 25
  init when iceOnRoad() if holds lowFuel if holds alert
  term when end(alert)
)");
  ps.thresholds.set("*", "speed", 90);
  ps.thresholds.set("*", "fuel", 60);
  return std::make_shared<const PatternSet>(std::move(ps));
}

EventInstance ev(std::string type, std::string v, TimePoint occ, std::vector<double> args = {},
                 std::optional<TimePoint> arrival = {}) {
  return {std::move(type), std::move(v), std::move(args), occ, arrival.value_or(occ)};
}

// Random input over [1, horizon] for a few vehicles, sorted by arrival.
std::vector<EventInstance> randomStream(std::mt19937_64& rng, TimePoint horizon, double delayProb, TimePoint maxDelay) {
  std::uniform_real_distribution<double> u(0, 1);
  std::uniform_int_distribution<TimePoint> delay(1, maxDelay);
  const char* vehicles[] = {"v1", "v2", "v3"};
  std::vector<EventInstance> out;
  for (TimePoint t = 1; t <= horizon; ++t) {
    for (const char* v : vehicles) {
      if (u(rng) > 0.3) continue;
      auto add = [&](const char* type, std::vector<double> args = {}) {
        auto e = ev(type, v, t, std::move(args));
        if (u(rng) < delayProb) e.arrivalTime += delay(rng);
        out.push_back(std::move(e));
      };
      const double r = u(rng);
      if (r < 0.45) add("moving", {std::round(40 + u(rng) * 100)});
      else if (r < 0.55) add("stopped");
      if (u(rng) < 0.12) add("abruptAcceleration");
      if (u(rng) < 0.12) add("abruptCornering");
      if (u(rng) < 0.08) add("abruptDeceleration");
      if (u(rng) < 0.15) add("fuelLevel", {std::round(u(rng) * 60)});
      if (u(rng) < 0.1) add("iceOnRoad");
      if (u(rng) < 0.15) add("closeToGas");
    }
  }
  std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.arrivalTime < b.arrivalTime; });
  return out;
}

std::string describe(const std::map<FluentValue, IntervalList>& m) {
  std::string s;
  for (const auto& [fv, list] : m)
    for (const auto& iv : list) s += fv.fluent + "/" + fv.vehicle + " (" + std::to_string(iv.openStart) + "," + formatEnd(iv) + "] ";
  return s;
}

}  // namespace

TEST_CASE("highSpeed from a fast then slow reading") {
  auto ps = fleetPatterns();
  Engine e(ps, {600, 600, std::nullopt});
  e.ingest(ev("moving", "v1", 60, {100}));
  e.ingest(ev("moving", "v1", 300, {50}));
  auto r = e.evaluateQuery(600);
  REQUIRE(r.intervals.size() == 1);
  CHECK(r.intervals.at({"highSpeed", "v1"}) == IntervalList::fromIntervals({{60, 300}}));
}

TEST_CASE("dangerousDriving ends with highSpeed") {
  auto ps = fleetPatterns();
  Engine e(ps, {600, 600, std::nullopt});
  e.ingest(ev("moving", "v1", 60, {100}));
  e.ingest(ev("abruptCornering", "v1", 120));
  e.ingest(ev("moving", "v1", 300, {50}));
  auto r = e.evaluateQuery(600);
  CHECK(r.intervals.at({"dangerousDriving", "v1"}) == IntervalList::fromIntervals({{120, 300}}));
}

TEST_CASE("empty window yields no intervals") {
  Engine e(fleetPatterns(), {600, 600, std::nullopt});
  CHECK(e.evaluateQuery(600).intervals.empty());
  CHECK(e.evaluateQueryIncremental(1200).intervals.empty());
}

TEST_CASE("late events beyond the window are dropped, others kept") {
  const TimePoint h = kHour;
  Engine e(fleetPatterns(), {2 * h, h, std::nullopt});
  e.evaluateQuery(10 * h);
  CHECK_FALSE(e.ingest(ev("moving", "v1", 7 * h, {120}, 10 * h + 300)));
  CHECK(e.droppedEvents() == 1);

  CHECK(e.ingest(ev("moving", "v1", 9 * h + 1800, {120}, 10 * h + 300)));
  auto r = e.evaluateQuery(11 * h);
  CHECK(r.intervals.at({"highSpeed", "v1"}) == IntervalList::fromIntervals({{9 * h + 1800, std::nullopt}}));
  CHECK(r.dropped == 1);
}

TEST_CASE("reFuelOpportunity needs both events at the same time-point") {
  auto ps = fleetPatterns();
  Engine e(ps, {1000, 1000, std::nullopt});
  e.ingest(ev("moving", "v1", 10, {120}));
  e.ingest(ev("closeToGas", "v1", 20));
  e.ingest(ev("fuelLevel", "v1", 21, {10}));
  e.ingest(ev("closeToGas", "v1", 40));
  e.ingest(ev("fuelLevel", "v1", 40, {10}));
  e.ingest(ev("fuelLevel", "v1", 90, {45}));
  auto r = e.evaluateQuery(1000);
  CHECK(r.intervals.at({"reFuelOpportunity", "v1"}) == IntervalList::fromIntervals({{40, 90}}));
}

TEST_CASE("per-vehicle thresholds") {
  Engine e(fleetPatterns(), {100, 100, std::nullopt});
  e.ingest(ev("moving", "v1", 10, {70}));
  e.ingest(ev("moving", "v2", 10, {70}));
  auto r = e.evaluateQuery(100);
  CHECK_FALSE(r.intervals.contains({"highSpeed", "v1"}));
  CHECK(r.intervals.contains({"highSpeed", "v2"}));
}

TEST_CASE("missing threshold is an error") {
  auto ps = builtinFleetPatterns();
  Engine e(std::make_shared<const PatternSet>(ps), {100, 100, std::nullopt});
  e.ingest(ev("moving", "v1", 10, {70}));
  CHECK_THROWS_AS(e.evaluateQuery(100), Error);
}

TEST_CASE("contract violations") {
  Engine e(fleetPatterns(), {100, 50, std::nullopt});
  CHECK_THROWS_AS(e.ingest(ev("teleport", "v1", 10)), ContractViolation);
  CHECK_THROWS_AS(e.ingest(ev("moving", "v1", 10)), ContractViolation);
  CHECK_THROWS_AS(e.ingest(ev("stopped", "v1", 10, {}, 5)), ContractViolation);
  e.evaluateQuery(100);
  CHECK_THROWS_AS(e.evaluateQuery(120), ContractViolation);
  CHECK_THROWS_AS(e.evaluateQuery(100), ContractViolation);
  e.ingest(ev("stopped", "v1", 140, {}, 170));
  CHECK_THROWS_AS(e.evaluateQuery(150), ContractViolation);
  CHECK_THROWS_AS((WindowConfig{50, 100, std::nullopt}.validate()), ContractViolation);
  CHECK_THROWS_AS((WindowConfig{50, 0, std::nullopt}.validate()), ContractViolation);
}

TEST_CASE("incremental: no new arrivals gives the previous result clipped") {
  auto ps = fleetPatterns();
  Engine e(ps, {100, 20, std::nullopt});
  e.ingest(ev("moving", "v1", 30, {120}));
  e.ingest(ev("moving", "v1", 70, {50}));
  e.ingest(ev("moving", "v1", 75, {130}));
  auto r1 = e.evaluateQueryIncremental(100);
  CHECK(r1.intervals.at({"highSpeed", "v1"}) == IntervalList::fromIntervals({{30, 70}, {75, std::nullopt}}));
  auto r2 = e.evaluateQueryIncremental(120);
  CHECK(r2.intervals.at({"highSpeed", "v1"}) == IntervalList::fromIntervals({{30, 70}, {75, std::nullopt}}));
  CHECK(r2.newDerivations == 0);
  auto r3 = e.evaluateQueryIncremental(140);  // window (40, 140]: the first init has expired
  CHECK(r3.intervals.at({"highSpeed", "v1"}) == IntervalList::fromIntervals({{75, std::nullopt}}));
}

TEST_CASE("incremental: delayed abruptAcceleration inside highSpeed") {
  auto ps = fleetPatterns();
  Engine e(ps, {200, 100, std::nullopt});
  e.ingest(ev("moving", "v1", 20, {120}));
  auto r1 = e.evaluateQueryIncremental(100);
  CHECK_FALSE(r1.intervals.contains({"dangerousDriving", "v1"}));
  e.ingest(ev("abruptAcceleration", "v1", 60, {}, 130));
  e.ingest(ev("moving", "v1", 150, {50}));
  auto r2 = e.evaluateQueryIncremental(200);
  CHECK(r2.intervals.at({"dangerousDriving", "v1"}) == IntervalList::fromIntervals({{60, 150}}));
}

TEST_CASE("incremental: delayed moving extends highSpeed over an earlier cornering") {
  auto ps = fleetPatterns();
  Engine inc(ps, {200, 100, std::nullopt});
  Engine bat(ps, {200, 100, std::nullopt});
  std::vector<EventInstance> first{ev("moving", "v1", 10, {120}), ev("moving", "v1", 40, {50}),
                                   ev("abruptCornering", "v1", 70), ev("moving", "v1", 90, {40})};
  for (auto& x : first) {
    inc.ingest(x);
    bat.ingest(x);
  }
  auto a1 = inc.evaluateQueryIncremental(100);
  auto b1 = bat.evaluateQuery(100);
  CHECK(a1.intervals == b1.intervals);
  CHECK_FALSE(a1.intervals.contains({"dangerousDriving", "v1"}));

  auto late = ev("moving", "v1", 60, {125}, 150);
  inc.ingest(late);
  bat.ingest(late);
  auto a2 = inc.evaluateQueryIncremental(200);
  auto b2 = bat.evaluateQuery(200);
  CHECK(a2.intervals == b2.intervals);
  CHECK(a2.intervals.at({"dangerousDriving", "v1"}) == IntervalList::fromIntervals({{70, 90}}));
}

TEST_CASE("deadline terminates after the last initiation") {
  auto ps = parsePatternFile("fluent f deadline 10\n  init when abruptCornering()\n  term when stopped()\n");
  auto shared = std::make_shared<const PatternSet>(ps);
  Engine e(shared, {100, 100, std::nullopt});
  for (TimePoint t : {5, 12}) e.ingest(ev("abruptCornering", "v1", t));
  e.ingest(ev("abruptCornering", "v1", 40));
  e.ingest(ev("stopped", "v1", 45));
  e.ingest(ev("abruptCornering", "v1", 95));
  auto r = e.evaluateQuery(100);
  CHECK(r.intervals.at({"f", "v1"}) == IntervalList::fromIntervals({{5, 22}, {40, 45}, {95, std::nullopt}}));
}

TEST_CASE("ingestion order of equal-time events does not matter") {
  auto ps = fleetPatterns();
  std::vector<EventInstance> evs{ev("moving", "v1", 10, {100}), ev("closeToGas", "v1", 20), ev("fuelLevel", "v1", 20, {5}),
                                 ev("abruptCornering", "v1", 20), ev("stopped", "v1", 20), ev("moving", "v1", 20, {95})};
  std::sort(evs.begin(), evs.end(), [](const auto& a, const auto& b) { return a.eventType < b.eventType; });
  std::map<FluentValue, IntervalList> first;
  bool have = false;
  do {
    Engine e(ps, {100, 100, std::nullopt});
    for (auto& x : evs) e.ingest(x);
    auto r = e.evaluateQuery(100);
    if (!have) {
      first = r.intervals;
      have = true;
    }
    CHECK(r.intervals == first);
  } while (std::next_permutation(evs.begin(), evs.end(),
                                 [](const auto& a, const auto& b) { return a.eventType < b.eventType; }));
}

TEST_CASE("batch and incremental match the time-point oracle on random streams") {
  struct Shape {
    TimePoint omega, slide;
  };
  const Shape shapes[] = {{20, 10}, {50, 10}, {60, 60}, {100, 25}, {45, 15}};
  for (auto patterns : {fleetPatterns(), layeredPatterns()}) {
    for (std::uint64_t seed = 1; seed <= 12; ++seed) {
      std::mt19937_64 rng(seed);
      const double delayProb = (seed % 4) * 0.1;
      auto stream = randomStream(rng, 240, delayProb, 60);
      for (auto shape : shapes) {
        WindowConfig wc{shape.omega, shape.slide, std::nullopt};
        auto batch = recognizeStream(patterns, wc, EvaluationMode::Batch, stream);
        auto inc = recognizeStream(patterns, wc, EvaluationMode::Incremental, stream);
        REQUIRE(batch.size() == inc.size());
        for (std::size_t i = 0; i < batch.size(); ++i) {
          const auto q = batch[i].queryTime;
          auto expected = oracle::evaluate(*patterns, stream, q, shape.omega);
          INFO("seed " << seed << " omega " << shape.omega << " slide " << shape.slide << " q " << q);
          INFO("oracle: " << describe(expected));
          INFO("batch:  " << describe(batch[i].intervals));
          INFO("incr:   " << describe(inc[i].intervals));
          CHECK(batch[i].intervals == expected);
          CHECK(inc[i].intervals == expected);
          for (const auto& [fv, list] : batch[i].intervals)
            for (const auto& iv : list) {
              CHECK(iv.openStart >= q - shape.omega);
              CHECK((iv.isOpen() || *iv.end <= q));
            }
        }
      }
    }
  }
}

TEST_CASE("vehicles evaluated separately give the joint result") {
  auto ps = layeredPatterns();
  std::mt19937_64 rng(99);
  auto stream = randomStream(rng, 300, 0.2, 40);
  WindowConfig wc{60, 20, 20};
  auto joint = recognizeStream(ps, wc, EvaluationMode::Incremental, stream, 320);
  std::map<std::string, std::vector<EventInstance>> parts;
  for (const auto& e : stream) parts[e.vehicle].push_back(e);
  std::vector<std::map<FluentValue, IntervalList>> merged(joint.size());
  for (const auto& [v, part] : parts) {
    auto r = recognizeStream(ps, wc, EvaluationMode::Incremental, part, 320);
    REQUIRE(r.size() == joint.size());
    for (std::size_t i = 0; i < r.size(); ++i) merged[i].merge(r[i].intervals);
  }
  for (std::size_t i = 0; i < joint.size(); ++i) CHECK(joint[i].intervals == merged[i]);
}

TEST_CASE("query times and the data-driven clock") {
  WindowConfig wc{3600, 3600, std::nullopt};
  CHECK(queryTimesFor(wc, 1, 7200) == std::vector<TimePoint>{3600, 7200});
  CHECK(queryTimesFor(wc, 3600, 3601) == std::vector<TimePoint>{3600, 7200});
  wc.firstQueryTime = 1800;
  CHECK(queryTimesFor(wc, 1, 5000) == std::vector<TimePoint>{1800, 5400});

  std::vector<EventInstance> s{ev("moving", "v1", 100, {120}), ev("stopped", "v1", 4000)};
  auto r = recognizeStream(fleetPatterns(), {3600, 3600, std::nullopt}, EvaluationMode::Batch, s);
  REQUIRE(r.size() == 2);
  CHECK(r[0].queryTime == 3600);
  CHECK(r[0].intervals.at({"highSpeed", "v1"}) == IntervalList::fromIntervals({{100, std::nullopt}}));
  CHECK(r[1].queryTime == 7200);
}

TEST_CASE("result and metrics rows") {
  RecognitionResult r;
  r.queryTime = 600;
  r.intervals.emplace(FluentValue{"highSpeed", "v1"}, IntervalList::fromIntervals({{60, 300}, {400, std::nullopt}}));
  CHECK(resultCsvRows(r) == "highSpeed,v1,60,300,600\nhighSpeed,v1,400,open,600\n");
  r.eventsConsumed = 3;
  r.recognitionTimeMs = 1.5;
  CHECK(metricsCsvRow(r) == "600,1.500000,3,0");
}
