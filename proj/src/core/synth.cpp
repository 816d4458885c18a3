#include "synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>

#include "csv.hpp"
#include "error.hpp"

namespace fleetcer {

namespace {

struct Driver {
  std::string id;
  LonLat loc;
  double heading = 0;  // radians
  double speed = 0;
  double fuel = 50;
};

double clampSpeed(double s) { return std::clamp(s, 0.0, 150.0); }

}  // namespace

SyntheticFleet generateFleet(const SynthConfig& cfg) {
  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> unit(0, 1);
  std::normal_distribution<double> noise(0, 1);
  SyntheticFleet fleet;

  std::vector<Driver> drivers(cfg.vehicles);
  for (std::size_t i = 0; i < drivers.size(); ++i) {
    auto& d = drivers[i];
    d.id = "v" + std::to_string(i + 1);
    d.loc = {cfg.lonMin + unit(rng) * (cfg.lonMax - cfg.lonMin), cfg.latMin + unit(rng) * (cfg.latMax - cfg.latMin)};
    d.heading = unit(rng) * 2 * std::numbers::pi;
    d.speed = 40 + unit(rng) * 60;
    d.fuel = 15 + unit(rng) * 45;
  }

  const auto steps = static_cast<std::size_t>(cfg.duration / cfg.sampleInterval);
  fleet.records.reserve(steps * drivers.size());
  for (std::size_t s = 0; s < steps; ++s) {
    const TimePoint t = cfg.start + static_cast<Duration>(s) * cfg.sampleInterval;
    for (auto& d : drivers) {
      d.speed = unit(rng) < 0.03 ? 0.0 : clampSpeed(d.speed + 12 * noise(rng) + (d.speed < 20 ? 15 : 0));
      d.heading += 0.3 * noise(rng);
      const double km = d.speed * static_cast<double>(cfg.sampleInterval) / 3600.0;
      d.loc.lon += km / 111.195 * std::sin(d.heading) / std::cos(d.loc.lat * std::numbers::pi / 180);
      d.loc.lat += km / 111.195 * std::cos(d.heading);
      // bounce off the bounding box
      if (d.loc.lon < cfg.lonMin || d.loc.lon > cfg.lonMax) {
        d.loc.lon = std::clamp(d.loc.lon, cfg.lonMin, cfg.lonMax);
        d.heading = -d.heading;
      }
      if (d.loc.lat < cfg.latMin || d.loc.lat > cfg.latMax) {
        d.loc.lat = std::clamp(d.loc.lat, cfg.latMin, cfg.latMax);
        d.heading = std::numbers::pi - d.heading;
      }
      d.fuel -= d.speed * static_cast<double>(cfg.sampleInterval) / 3600.0 * 0.08;
      if (d.fuel < 5 || (d.speed == 0 && unit(rng) < 0.2)) d.fuel = 55 + unit(rng) * 5;

      VehicleRecord r;
      r.id = d.id;
      r.t = t + static_cast<Duration>(unit(rng) * 10);
      r.loc = d.loc;
      r.speed = std::round(d.speed * 10) / 10;
      const double harsh = d.speed > 80 ? 0.04 : 0.01;
      r.abruptAcceleration = unit(rng) < harsh;
      r.abruptDeceleration = unit(rng) < harsh;
      r.abruptCornering = unit(rng) < harsh;
      if (unit(rng) < 0.25) r.fuelLevel = std::round(d.fuel * 10) / 10;
      fleet.records.push_back(std::move(r));
    }
  }
  std::stable_sort(fleet.records.begin(), fleet.records.end(),
                   [](const auto& a, const auto& b) { return a.t < b.t; });

  for (std::size_t i = 0; i < cfg.pois; ++i) {
    const bool gas = unit(rng) < cfg.gasFraction;
    fleet.pois.push_back({{cfg.lonMin + unit(rng) * (cfg.lonMax - cfg.lonMin),
                           cfg.latMin + unit(rng) * (cfg.latMax - cfg.latMin)},
                          (gas ? "station " : "place ") + std::to_string(i + 1),
                          gas ? kGasStationType : (i % 2 ? "pharmacy" : "restaurant")});
  }

  const TimePoint firstRef = cfg.start / kForecastCycle * kForecastCycle;
  for (TimePoint ref = firstRef; ref < cfg.start + cfg.duration; ref += kForecastCycle) {
    GridFile::Builder b;
    b.referenceTime = ref;
    b.lonMin = std::floor(cfg.lonMin / kGridResolution) * kGridResolution;
    b.latMin = std::floor(cfg.latMin / kGridResolution) * kGridResolution;
    b.lonMax = std::ceil(cfg.lonMax / kGridResolution) * kGridResolution;
    b.latMax = std::ceil(cfg.latMax / kGridResolution) * kGridResolution;
    if (b.lonMax <= b.lonMin) b.lonMax = b.lonMin + kGridResolution;
    if (b.latMax <= b.latMin) b.latMax = b.latMin + kGridResolution;
    b.attributes = {"surfaceTemperature", "iceCover"};
    const double phase = static_cast<double>(ref % kDay) / kDay * 2 * std::numbers::pi;
    b.fill = [phase](GridCell c, TimePoint) {
      const double temp = 1.5 - 4 * std::cos(phase) + 0.7 * static_cast<double>((c.ix + c.iy) % 3 - 1);
      const double ice = temp <= 0 && (c.ix + c.iy) % 2 == 0 ? std::round((0.1 + 0.2 * static_cast<double>(c.ix % 3)) * 100) / 100 : 0.0;
      return std::vector<double>{std::round(temp * 10) / 10, ice};
    };
    fleet.forecasts.push_back(b.build());
  }
  return fleet;
}

void writeFleet(const SyntheticFleet& fleet, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir / "weather");
  auto open = [](const std::filesystem::path& p) {
    std::ofstream out(p, std::ios::binary);
    if (!out) throw IoError("cannot write " + p.string());
    return out;
  };
  {
    auto out = open(dir / "vehicles.csv");
    out << kVehicleCsvHeader << '\n';
    for (const auto& r : fleet.records) out << vehicleCsvFields(r) << '\n';
  }
  {
    auto out = open(dir / "pois.csv");
    out << "lon,lat,name,type\n";
    for (const auto& p : fleet.pois)
      out << formatNumber(p.loc.lon) << ',' << formatNumber(p.loc.lat) << ',' << csvEscape(p.name) << ','
          << csvEscape(p.type) << '\n';
  }
  for (const auto& g : fleet.forecasts) {
    auto name = formatIso(g.referenceTime());
    std::replace(name.begin(), name.end(), ':', '-');
    auto out = open(dir / "weather" / (name + ".grid"));
    out << g.toText();
  }
}

std::vector<EventInstance> syntheticEventStream(std::size_t count, std::size_t vehicles, TimePoint start,
                                                Duration duration, std::uint64_t seed) {
  if (vehicles == 0) throw ContractViolation("need at least one vehicle");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0, 1);
  std::normal_distribution<double> noise(0, 1);
  std::uniform_int_distribution<std::size_t> pick(0, vehicles - 1);

  std::vector<double> speed(vehicles, 70), fuel(vehicles, 40);
  std::vector<EventInstance> out;
  out.reserve(count + 8);
  // Roughly 2.3 events per record.
  const double gap = static_cast<double>(duration) / (static_cast<double>(count) / 2.3);
  double clock = static_cast<double>(start);
  while (out.size() < count) {
    clock += unit(rng) * 2 * gap;
    const auto t = static_cast<TimePoint>(clock);
    const auto v = pick(rng);
    const std::string id = "v" + std::to_string(v + 1);
    auto emit = [&](const char* type, std::vector<double> args = {}) { out.push_back({type, id, std::move(args), t, t}); };

    speed[v] = unit(rng) < 0.04 ? 0.0 : clampSpeed(speed[v] + 15 * noise(rng) + (speed[v] < 20 ? 20 : 0));
    if (speed[v] > 0) emit("moving", {std::round(speed[v])});
    else emit("stopped");
    const double harsh = speed[v] > 90 ? 0.06 : 0.015;
    if (unit(rng) < harsh) emit("abruptAcceleration");
    if (unit(rng) < harsh) emit("abruptDeceleration");
    if (unit(rng) < harsh) emit("abruptCornering");
    if (unit(rng) < 0.35) {
      fuel[v] = fuel[v] < 8 || unit(rng) < 0.05 ? 55 + unit(rng) * 5 : fuel[v] - unit(rng) * 4;
      emit("fuelLevel", {std::round(fuel[v])});
    }
    if (unit(rng) < 0.06) emit("iceOnRoad");
    if (unit(rng) < 0.15) emit("closeToGas");
  }
  out.resize(count);
  return out;
}

}  // namespace fleetcer
