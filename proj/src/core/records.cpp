#include "records.hpp"

#include <cmath>

#include "csv.hpp"
#include "error.hpp"

namespace fleetcer {

namespace {

std::optional<bool> parseFlag(std::string_view s) {
  s = trim(s);
  if (s.empty() || s == "0" || s == "false" || s == "FALSE") return false;
  if (s == "1" || s == "true" || s == "TRUE") return true;
  return std::nullopt;
}

std::string optionalNumber(const std::optional<double>& v) { return v ? formatNumber(*v) : std::string(); }

constexpr std::size_t kVehicleColumns = 9;

}  // namespace

ValidationResult validateRecord(std::string_view csvRow) {
  auto f = splitCsvLine(csvRow);
  if (f.size() < 4) return {std::nullopt, "missing spatio-temporal fields"};

  VehicleRecord r;
  r.id = std::string(trim(f[0]));
  auto t = parseTimestamp(f[1]);
  if (trim(f[1]).empty()) return {std::nullopt, "empty timestamp"};
  if (!t) return {std::nullopt, "invalid timestamp"};
  auto lon = parseDouble(f[2]);
  auto lat = parseDouble(f[3]);
  if (!lon || !lat) return {std::nullopt, "missing or non-numeric coordinates"};
  if (!std::isfinite(*lon) || *lon < -180 || *lon > 180) return {std::nullopt, "invalid longitude"};
  if (!std::isfinite(*lat) || *lat < -90 || *lat > 90) return {std::nullopt, "invalid latitude"};
  if (r.id.empty()) return {std::nullopt, "empty vehicle id"};
  if (f.size() != kVehicleColumns) return {std::nullopt, "expected 9 columns"};
  r.t = *t;
  r.loc = {*lon, *lat};

  if (!trim(f[4]).empty()) {
    auto speed = parseDouble(f[4]);
    if (!speed || !std::isfinite(*speed) || *speed < 0) return {std::nullopt, "invalid speed"};
    r.speed = *speed;
  }
  auto a = parseFlag(f[5]), d = parseFlag(f[6]), c = parseFlag(f[7]);
  if (!a || !d || !c) return {std::nullopt, "invalid accelerometer flag"};
  r.abruptAcceleration = *a;
  r.abruptDeceleration = *d;
  r.abruptCornering = *c;
  if (!trim(f[8]).empty()) {
    auto fuel = parseDouble(f[8]);
    if (!fuel || !std::isfinite(*fuel) || *fuel < 0) return {std::nullopt, "invalid fuel level"};
    r.fuelLevel = *fuel;
  }
  return {std::move(r), {}};
}

std::string vehicleCsvFields(const VehicleRecord& r) {
  std::string out = csvEscape(r.id);
  out += ',' + std::to_string(r.t);
  out += ',' + formatNumber(r.loc.lon);
  out += ',' + formatNumber(r.loc.lat);
  out += ',' + formatNumber(r.speed);
  out += r.abruptAcceleration ? ",1" : ",0";
  out += r.abruptDeceleration ? ",1" : ",0";
  out += r.abruptCornering ? ",1" : ",0";
  out += ',' + optionalNumber(r.fuelLevel);
  return out;
}

std::string enrichedCsvHeader(const std::vector<std::string>& attributes, bool withPoi) {
  std::string out = kVehicleCsvHeader;
  for (const auto& a : attributes) out += ',' + a;
  out += ",weather_ok";
  if (withPoi) out += ",poi_count,nearest_gas_distance_m";
  return out;
}

std::string enrichedCsvRow(const EnrichedRecord& r, bool withPoi) {
  std::string out = vehicleCsvFields(r.record);
  for (const auto& w : r.weather) out += ',' + optionalNumber(w);
  out += r.weatherOk ? ",1" : ",0";
  if (withPoi) {
    out += ',' + (r.poiCount ? std::to_string(*r.poiCount) : std::string());
    out += ',' + optionalNumber(r.nearestGasDistanceM);
  }
  return out;
}

EnrichedCsvReader::EnrichedCsvReader(std::string_view headerRow) {
  auto cols = splitCsvLine(headerRow);
  columns_ = cols.size();
  if (cols.size() < kVehicleColumns) throw ParseError("enriched CSV header lacks vehicle columns", 1);
  for (std::size_t i = kVehicleColumns; i < cols.size(); ++i) {
    const auto name = std::string(trim(cols[i]));
    if (name == "weather_ok") {
      weatherOk_ = static_cast<int>(i);
    } else if (name == "poi_count") {
      poiCount_ = static_cast<int>(i);
    } else if (name == "nearest_gas_distance_m") {
      nearestGas_ = static_cast<int>(i);
    } else if (weatherOk_ < 0) {
      attributes_.push_back(name);
      attributeColumns_.push_back(static_cast<int>(i));
    }
  }
  if (weatherOk_ < 0) throw ParseError("enriched CSV header lacks weather_ok", 1);
}

EnrichedRecord EnrichedCsvReader::parse(std::string_view row, int lineNo) const {
  auto fields = splitCsvLine(row);
  if (fields.size() != columns_) throw ParseError("expected " + std::to_string(columns_) + " columns", lineNo);
  std::string base;
  for (std::size_t i = 0; i < kVehicleColumns; ++i) base += (i ? "," : "") + csvEscape(fields[i]);
  auto v = validateRecord(base);
  if (!v.record) throw ParseError("invalid vehicle fields: " + v.reason, lineNo);

  EnrichedRecord r;
  r.record = std::move(*v.record);
  for (int c : attributeColumns_) {
    const auto& s = fields[static_cast<std::size_t>(c)];
    if (trim(s).empty()) {
      r.weather.emplace_back();
    } else if (auto d = parseDouble(s)) {
      r.weather.emplace_back(*d);
    } else {
      throw ParseError("non-numeric weather value", lineNo);
    }
  }
  r.weatherOk = trim(fields[static_cast<std::size_t>(weatherOk_)]) == "1";
  if (poiCount_ >= 0) {
    const auto& s = fields[static_cast<std::size_t>(poiCount_)];
    if (!trim(s).empty()) {
      auto n = parseInt(s);
      if (!n || *n < 0) throw ParseError("invalid poi_count", lineNo);
      r.poiCount = static_cast<std::size_t>(*n);
    }
  }
  if (nearestGas_ >= 0) {
    const auto& s = fields[static_cast<std::size_t>(nearestGas_)];
    if (!trim(s).empty()) {
      auto d = parseDouble(s);
      if (!d) throw ParseError("invalid nearest_gas_distance_m", lineNo);
      r.nearestGasDistanceM = *d;
    }
  }
  return r;
}

}  // namespace fleetcer
