#include "stream_io.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <random>
#include <thread>

#include "csv.hpp"
#include "error.hpp"
#include "patterns.hpp"

namespace fleetcer {

std::vector<EventInstance> recordToEvents(const EnrichedRecord& rec, const std::vector<std::string>& attributes,
                                          const IcePredicate& ice) {
  const auto& r = rec.record;
  std::vector<EventInstance> out;
  auto emit = [&](const char* type, std::vector<double> args = {}) {
    out.push_back({type, r.id, std::move(args), r.t, r.t});
  };
  if (r.speed > 0) emit("moving", {r.speed});
  else emit("stopped");
  if (r.abruptAcceleration) emit("abruptAcceleration");
  if (r.abruptDeceleration) emit("abruptDeceleration");
  if (r.abruptCornering) emit("abruptCornering");
  if (r.fuelLevel) emit("fuelLevel", {*r.fuelLevel});
  if (rec.weatherOk) {
    WeatherAttrs attrs;
    for (std::size_t i = 0; i < attributes.size() && i < rec.weather.size(); ++i)
      if (rec.weather[i]) attrs.emplace(attributes[i], *rec.weather[i]);
    if (auto e = deriveIceEvent(r, attrs, ice)) out.push_back(std::move(*e));
  }
  // nearest_gas_distance_m is only filled when a gas station joined.
  if (rec.nearestGasDistanceM) emit("closeToGas");
  return out;
}

std::string eventCsvRow(const EventInstance& e) {
  std::string out = csvEscape(e.eventType) + ',' + csvEscape(e.vehicle) + ',' + std::to_string(e.occurrenceTime) + ',' +
                    std::to_string(e.arrivalTime);
  for (std::size_t i = 0; i < 2; ++i) out += ',' + (i < e.args.size() ? formatNumber(e.args[i]) : std::string());
  return out;
}

void writeEventCsv(std::ostream& out, std::span<const EventInstance> events) {
  out << kEventCsvHeader << '\n';
  for (const auto& e : events) out << eventCsvRow(e) << '\n';
}

std::vector<EventInstance> readEventCsv(std::istream& in) {
  std::vector<EventInstance> out;
  std::string line;
  int lineNo = 0;
  while (readLine(in, line)) {
    ++lineNo;
    if (trim(line).empty()) continue;
    if (lineNo == 1 && line.starts_with("event_type")) continue;
    auto f = splitCsvLine(line);
    if (f.size() != 6) throw ParseError("expected 6 columns in event row", lineNo);
    EventInstance e;
    e.eventType = std::string(trim(f[0]));
    e.vehicle = std::string(trim(f[1]));
    auto occ = parseInt(f[2]);
    auto arr = parseInt(f[3]);
    if (!occ || !arr || *occ < 0) throw ParseError("invalid event timestamps", lineNo);
    if (*arr < *occ) throw ParseError("arrival before occurrence", lineNo);
    e.occurrenceTime = *occ;
    e.arrivalTime = *arr;
    for (std::size_t i = 4; i < 6; ++i) {
      if (trim(f[i]).empty()) continue;
      auto v = parseDouble(f[i]);
      if (!v) throw ParseError("non-numeric event argument", lineNo);
      e.args.push_back(*v);
    }
    auto arity = inputEventArity(e.eventType);
    if (!arity) throw ParseError("unknown event type '" + e.eventType + "'", lineNo);
    if (*arity != e.args.size()) throw ParseError("wrong argument count for " + e.eventType, lineNo);
    out.push_back(std::move(e));
  }
  return out;
}

void DelayConfig::validate() const {
  if (!(fraction >= 0 && fraction <= 1)) throw ContractViolation("delay fraction must lie in [0, 1]");
  if (!(gammaShape > 0) || gammaShape != std::floor(gammaShape))
    throw ContractViolation("gamma shape must be a positive integer");
  if (!(gammaScale > 0)) throw ContractViolation("gamma scale must be positive");
  if (!(unitScaleSecs > 0)) throw ContractViolation("unit scale must be positive");
}

ReplayStream injectDelays(ReplayStream stream, const DelayConfig& cfg) {
  cfg.validate();
  auto& events = stream.events;
  if (!std::is_sorted(events.begin(), events.end(),
                      [](const auto& a, const auto& b) { return a.occurrenceTime < b.occurrenceTime; }))
    throw ContractViolation("injectDelays expects events sorted by occurrence time");

  std::mt19937_64 rng(cfg.seed);
  auto uniform = [&] { return static_cast<double>(rng() >> 11) * 0x1.0p-53; };  // [0, 1)
  const int shape = static_cast<int>(cfg.gammaShape);
  for (auto& e : events) {
    e.arrivalTime = e.occurrenceTime;
    if (!(uniform() < cfg.fraction)) continue;
    double g = 0;
    for (int i = 0; i < shape; ++i) g -= cfg.gammaScale * std::log1p(-uniform());
    e.arrivalTime += static_cast<Duration>(std::llround(g * cfg.unitScaleSecs));
  }
  std::stable_sort(events.begin(), events.end(),
                   [](const auto& a, const auto& b) { return a.arrivalTime < b.arrivalTime; });
  return stream;
}

ReplayStats replay(const ReplayStream& stream, const std::function<void(const EventInstance&)>& sink, double pacing) {
  using Clock = std::chrono::steady_clock;
  ReplayStats stats;
  const auto start = Clock::now();
  const EventInstance* prev = nullptr;
  for (const auto& e : stream.events) {
    if (prev && e.arrivalTime < prev->arrivalTime) throw ContractViolation("replay stream is not sorted by arrival");
    if (pacing > 0) {
      const double offset = static_cast<double>(e.arrivalTime - stream.events.front().arrivalTime) / pacing;
      std::this_thread::sleep_until(start + std::chrono::duration_cast<Clock::duration>(std::chrono::duration<double>(offset)));
    }
    if (prev && e.occurrenceTime < prev->occurrenceTime) ++stats.inversions;
    sink(e);
    ++stats.delivered;
    prev = &e;
  }
  stats.wallSeconds = std::chrono::duration<double>(Clock::now() - start).count();
  return stats;
}

}  // namespace fleetcer
