#include <doctest.h>

#include <cmath>
#include <sstream>

#include "error.hpp"
#include "stream_io.hpp"
#include "synth.hpp"

using namespace fleetcer;

namespace {

const std::vector<std::string> kAttrs{"surfaceTemperature", "iceCover"};

EnrichedRecord enriched(double speed) {
  EnrichedRecord r;
  r.record.id = "v1";
  r.record.t = 1000;
  r.record.speed = speed;
  r.weather = {std::nullopt, std::nullopt};
  return r;
}

std::vector<std::string> types(const std::vector<EventInstance>& ev) {
  std::vector<std::string> out;
  for (const auto& e : ev) out.push_back(e.eventType);
  return out;
}

auto withoutArrival(std::vector<EventInstance> ev) {
  for (auto& e : ev) e.arrivalTime = 0;
  std::sort(ev.begin(), ev.end(), [](const auto& a, const auto& b) {
    return std::tie(a.occurrenceTime, a.vehicle, a.eventType, a.args) <
           std::tie(b.occurrenceTime, b.vehicle, b.eventType, b.args);
  });
  return ev;
}

ReplayStream sampleStream(std::size_t n, std::uint64_t seed = 9) {
  ReplayStream s;
  s.events = syntheticEventStream(n, 10, 1'767'225'600, kDay, seed);
  return s;
}

}  // namespace

TEST_CASE("events derived from one record") {
  auto ice = IcePredicate::defaultPredicate();
  auto r = enriched(95);
  r.record.abruptAcceleration = true;
  r.record.abruptCornering = true;
  r.record.fuelLevel = 20;
  r.weather = {-1.5, 0.3};
  r.weatherOk = true;
  r.nearestGasDistanceM = 150;
  auto ev = recordToEvents(r, kAttrs, ice);
  CHECK(types(ev) == std::vector<std::string>{"moving", "abruptAcceleration", "abruptCornering", "fuelLevel",
                                              "iceOnRoad", "closeToGas"});
  CHECK(ev[0].args == std::vector<double>{95});
  CHECK(ev[3].args == std::vector<double>{20});
  for (const auto& e : ev) {
    CHECK(e.vehicle == "v1");
    CHECK(e.occurrenceTime == 1000);
    CHECK(e.arrivalTime == 1000);
  }

  auto still = enriched(0);
  CHECK(types(recordToEvents(still, kAttrs, ice)) == std::vector<std::string>{"stopped"});

  // weather values alone are not enough without the ok flag
  auto noFlag = enriched(10);
  noFlag.weather = {-1.5, 0.3};
  CHECK(types(recordToEvents(noFlag, kAttrs, ice)) == std::vector<std::string>{"moving"});
}

TEST_CASE("event csv round trip") {
  auto s = sampleStream(500);
  s.events[3].arrivalTime += 777;
  std::stringstream buf;
  writeEventCsv(buf, s.events);
  CHECK(buf.str().rfind(std::string(kEventCsvHeader) + "\n", 0) == 0);
  CHECK(readEventCsv(buf) == s.events);

  CHECK(eventCsvRow({"moving", "v2", {88}, 10, 20}) == "moving,v2,10,20,88,");
  CHECK(eventCsvRow({"stopped", "v2", {}, 10, 10}) == "stopped,v2,10,10,,");
}

TEST_CASE("event csv errors") {
  std::istringstream unknown(std::string(kEventCsvHeader) + "\nmoving,v1,10,10,50,\nteleport,v1,11,11,,\n");
  try {
    readEventCsv(unknown);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line() == 3);
  }
  std::istringstream arity(std::string(kEventCsvHeader) + "\nmoving,v1,10,10,,\n");
  CHECK_THROWS_AS(readEventCsv(arity), ParseError);
  std::istringstream early(std::string(kEventCsvHeader) + "\nstopped,v1,10,5,,\n");
  CHECK_THROWS_AS(readEventCsv(early), ParseError);
  std::istringstream empty("");
  CHECK(readEventCsv(empty).empty());
}

TEST_CASE("zero delay fraction is the identity") {
  auto s = sampleStream(2000);
  DelayConfig cfg;
  cfg.fraction = 0;
  CHECK(injectDelays(s, cfg).events == s.events);
}

TEST_CASE("delay injection is deterministic per seed") {
  auto s = sampleStream(2000);
  DelayConfig cfg;
  cfg.fraction = 0.4;
  cfg.seed = 17;
  auto a = injectDelays(s, cfg), b = injectDelays(s, cfg);
  CHECK(a.events == b.events);
  cfg.seed = 18;
  CHECK(injectDelays(s, cfg).events != a.events);
}

TEST_CASE("delay injection keeps the event multiset and orders by arrival") {
  auto s = sampleStream(3000);
  DelayConfig cfg;
  cfg.fraction = 0.25;
  auto d = injectDelays(s, cfg);
  CHECK(withoutArrival(d.events) == withoutArrival(s.events));
  CHECK(std::is_sorted(d.events.begin(), d.events.end(),
                       [](const auto& a, const auto& b) { return a.arrivalTime < b.arrivalTime; }));
  for (const auto& e : d.events) CHECK(e.arrivalTime >= e.occurrenceTime);
}

TEST_CASE("delay statistics") {
  const std::size_t n = 20000;
  auto s = sampleStream(n, 3);
  for (double p : {0.1, 0.3, 0.5}) {
    DelayConfig cfg;
    cfg.fraction = p;
    cfg.seed = 99;
    auto d = injectDelays(s, cfg);
    std::size_t delayed = 0;
    double sum = 0;
    for (const auto& e : d.events)
      if (e.arrivalTime > e.occurrenceTime) {
        ++delayed;
        sum += static_cast<double>(e.arrivalTime - e.occurrenceTime);
      }
    const double sigma = std::sqrt(static_cast<double>(n) * p * (1 - p));
    CHECK(std::abs(static_cast<double>(delayed) - static_cast<double>(n) * p) <= 4 * sigma);
    // mean of Gamma(2, 2) hours-units is 4 units = 8 h
    CHECK(cfg.meanDelaySecs() == doctest::Approx(8 * 3600));
    CHECK(sum / static_cast<double>(delayed) == doctest::Approx(cfg.meanDelaySecs()).epsilon(0.05));
  }
}

TEST_CASE("delay config validation") {
  DelayConfig cfg;
  cfg.fraction = 1.5;
  CHECK_THROWS_AS(cfg.validate(), ContractViolation);
  cfg.fraction = 0.5;
  cfg.gammaShape = 2.5;
  CHECK_THROWS_AS(cfg.validate(), ContractViolation);
  cfg.gammaShape = 2;
  cfg.unitScaleSecs = 0;
  CHECK_THROWS_AS(cfg.validate(), ContractViolation);
  cfg.unitScaleSecs = 7200;
  CHECK_NOTHROW(cfg.validate());
}

TEST_CASE("replay") {
  auto s = sampleStream(1000);
  std::vector<EventInstance> seen;
  auto stats = replay(s, [&](const EventInstance& e) { seen.push_back(e); });
  CHECK(seen == s.events);
  CHECK(stats.delivered == 1000);
  CHECK(stats.inversions == 0);

  DelayConfig cfg;
  cfg.fraction = 1;
  auto all = injectDelays(s, cfg);
  CHECK(replay(all, [](const EventInstance&) {}).inversions > 0);

  auto none = replay(ReplayStream{}, [](const EventInstance&) { FAIL("no events expected"); });
  CHECK(none.delivered == 0);
}
