#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "ec_core.hpp"
#include "poi.hpp"
#include "records.hpp"
#include "weather.hpp"

namespace fleetcer {

// Seeded generator for sample datasets and benchmark streams.
struct SynthConfig {
  std::size_t vehicles = 20;
  TimePoint start = 1'767'225'600;  // 2026-01-01T00:00Z
  Duration duration = kDay;
  Duration sampleInterval = 60;  // seconds between a vehicle's records
  std::size_t pois = 400;
  double gasFraction = 0.3;
  double lonMin = 23.55, latMin = 37.85, lonMax = 23.95, latMax = 38.15;
  std::uint64_t seed = 1;
};

struct SyntheticFleet {
  std::vector<VehicleRecord> records;  // sorted by time
  std::vector<Poi> pois;
  std::vector<GridFile> forecasts;  // every 6 h covering the duration
};

SyntheticFleet generateFleet(const SynthConfig& cfg);

// Writes vehicles.csv, pois.csv and weather/<reference>.grid under dir.
void writeFleet(const SyntheticFleet& fleet, const std::filesystem::path& dir);

// `count` input events for `vehicles` vehicles over `duration` seconds,
// grouped per record as the enrichment stages would emit them. Sorted by
// occurrence time; arrival = occurrence.
std::vector<EventInstance> syntheticEventStream(std::size_t count, std::size_t vehicles, TimePoint start,
                                                Duration duration, std::uint64_t seed);

}  // namespace fleetcer
