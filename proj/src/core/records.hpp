#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "time.hpp"

namespace fleetcer {

struct LonLat {
  double lon = 0;
  double lat = 0;

  friend bool operator==(const LonLat&, const LonLat&) = default;
};

// One validated GPS record.
struct VehicleRecord {
  std::string id;
  LonLat loc;
  TimePoint t = 0;
  double speed = 0;  // km/h
  bool abruptAcceleration = false;
  bool abruptDeceleration = false;
  bool abruptCornering = false;
  std::optional<double> fuelLevel;  // liters

  friend bool operator==(const VehicleRecord&, const VehicleRecord&) = default;
};

// A record after the enrichment stages. `weather` is aligned with the run's
// configured attribute names.
struct EnrichedRecord {
  VehicleRecord record;
  std::vector<std::optional<double>> weather;
  bool weatherOk = false;
  std::optional<std::size_t> poiCount;
  std::optional<double> nearestGasDistanceM;
};

inline constexpr const char* kVehicleCsvHeader =
    "id,timestamp,lon,lat,speed,abrupt_accel,abrupt_decel,abrupt_corner,fuel_level";

struct ValidationResult {
  std::optional<VehicleRecord> record;
  std::string reason;  // set when rejected
};

// Spatio-temporal parsing and cleaning of one CSV row of the vehicle format.
// Rows with a missing or invalid lon, lat or timestamp are rejected; so are
// rows whose remaining fields are malformed.
ValidationResult validateRecord(std::string_view csvRow);

std::string vehicleCsvFields(const VehicleRecord& r);

// Header for an enriched CSV: vehicle columns, one column per weather
// attribute, `weather_ok`, and when `withPoi` also `poi_count` and
// `nearest_gas_distance_m`.
std::string enrichedCsvHeader(const std::vector<std::string>& attributes, bool withPoi);
std::string enrichedCsvRow(const EnrichedRecord& r, bool withPoi);

// Column layout of an enriched CSV, discovered from its header row.
class EnrichedCsvReader {
 public:
  // Throws ParseError when a required column is missing.
  explicit EnrichedCsvReader(std::string_view headerRow);

  const std::vector<std::string>& attributes() const noexcept { return attributes_; }
  bool hasPoi() const noexcept { return poiCount_ >= 0; }
  // Throws ParseError on malformed rows (these files are produced by the
  // pipeline itself, so damage is an error rather than noise).
  EnrichedRecord parse(std::string_view row, int lineNo) const;

 private:
  std::vector<std::string> attributes_;
  std::vector<int> attributeColumns_;
  int weatherOk_ = -1;
  int poiCount_ = -1;
  int nearestGas_ = -1;
  std::size_t columns_ = 0;
};

}  // namespace fleetcer
