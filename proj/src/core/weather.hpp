#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <list>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ec_core.hpp"
#include "patterns.hpp"
#include "records.hpp"

namespace fleetcer {

// Forecasts are issued at 00/06/12/18 UTC and describe the state 3 h later.
inline constexpr Duration kForecastCycle = 6 * kHour;
inline constexpr Duration kForecastLead = 3 * kHour;
inline constexpr double kGridResolution = 0.5;

struct GridCell {
  std::int64_t ix = 0;
  std::int64_t iy = 0;

  friend bool operator==(const GridCell&, const GridCell&) = default;
};

GridCell gridCellOf(LonLat loc, double resolution = kGridResolution);

// One gridded forecast file held in memory.
//
// Text format:
//   # comment lines
//   reference_time <ISO-8601 or epoch seconds>
//   resolution 0.5
//   bbox <lon_min> <lat_min> <lon_max> <lat_max>
//   attributes <name> [<name>...]
//   <ix> <iy> <value> [<value>...]      one row per cell, global cell indices
// Cells inside the bbox without a row have no values.
class GridFile {
 public:
  static GridFile load(const std::filesystem::path& path);
  static GridFile parse(std::string_view text, const std::string& origin = "<memory>");
  // Reads only the header lines; the cell table is left empty.
  static GridFile loadHeader(const std::filesystem::path& path);

  TimePoint referenceTime() const noexcept { return referenceTime_; }
  TimePoint validTime() const noexcept { return referenceTime_ + kForecastLead; }
  double resolution() const noexcept { return resolution_; }
  const std::vector<std::string>& attributes() const noexcept { return attributes_; }
  bool covers(GridCell c) const noexcept;
  // nullopt when the cell is outside coverage or has no row.
  std::optional<double> value(GridCell c, std::size_t attribute) const;
  std::optional<std::size_t> attributeIndex(std::string_view name) const;

  // Serializes in the text format above.
  std::string toText() const;

  struct Builder;

 private:
  static GridFile parseImpl(std::string_view text, const std::string& origin, bool headerOnly);

  TimePoint referenceTime_ = 0;
  double resolution_ = kGridResolution;
  double bbox_[4] = {0, 0, 0, 0};
  std::int64_t ixMin_ = 0, iyMin_ = 0, nx_ = 0, ny_ = 0;
  std::vector<std::string> attributes_;
  std::vector<double> values_;  // NaN = no value; (iy - iyMin) * nx + (ix - ixMin), then attribute
};

// Programmatic construction (tests, synthetic data).
struct GridFile::Builder {
  TimePoint referenceTime = 0;
  double lonMin = 0, latMin = 0, lonMax = 0, latMax = 0;
  std::vector<std::string> attributes;
  // Called for every cell inside the bbox; return one value per attribute.
  std::function<std::vector<double>(GridCell, TimePoint)> fill;

  GridFile build() const;
};

struct ForecastRef {
  TimePoint referenceTime = 0;
  TimePoint validTime = 0;
  std::filesystem::path path;

  friend bool operator==(const ForecastRef&, const ForecastRef&) = default;
};

// Attribute name -> value for the attributes configured for a run.
using WeatherAttrs = std::map<std::string, double, std::less<>>;

struct CacheStats {
  std::uint64_t hits = 0;
  std::uint64_t misses = 0;
  std::uint64_t evictions = 0;

  double hitRatio() const noexcept {
    const auto n = hits + misses;
    return n == 0 ? 0.0 : static_cast<double>(hits) / static_cast<double>(n);
  }
};

// Ordered index of forecast files by reference time plus a bounded LRU cache
// of loaded files. Not thread-safe: each enrichment worker owns its store.
class WeatherStore {
 public:
  static constexpr std::size_t kDefaultCacheCapacity = 8;

  WeatherStore(std::vector<ForecastRef> files, std::size_t cacheCapacity = kDefaultCacheCapacity);
  // Indexes every `*.grid` file in `dir` by the reference time in its header.
  static WeatherStore openDirectory(const std::filesystem::path& dir,
                                    std::size_t cacheCapacity = kDefaultCacheCapacity);

  bool empty() const noexcept { return index_.empty(); }
  std::size_t size() const noexcept { return index_.size(); }

  // File whose valid time is closest to t; ties go to the earlier valid time.
  // Throws ContractViolation on an empty store.
  const ForecastRef& nearestForecast(TimePoint t) const;

  // Values of `attributes` for the grid cell containing loc, taken from the
  // nearest forecast. nullopt when the cell is outside that file's coverage;
  // attributes without a value in the cell are left out of the map.
  std::optional<WeatherAttrs> lookupWeather(LonLat loc, TimePoint t, const std::vector<std::string>& attributes);

  const CacheStats& cacheStats() const noexcept { return stats_; }

 private:
  std::shared_ptr<const GridFile> open(const ForecastRef& ref);

  std::map<TimePoint, ForecastRef> index_;
  std::size_t capacity_;
  std::list<std::pair<std::filesystem::path, std::shared_ptr<const GridFile>>> lru_;
  CacheStats stats_;
};

// Conjunction of `attribute op value` conditions, e.g.
// "iceCover > 0 and surfaceTemperature <= 0". False when an attribute is absent.
class IcePredicate {
 public:
  struct Condition {
    std::string attribute;
    CompareOp op;
    double value;
  };

  static IcePredicate parse(std::string_view text);
  static IcePredicate defaultPredicate() { return parse(kDefault); }
  static constexpr const char* kDefault = "iceCover > 0 and surfaceTemperature <= 0";

  bool operator()(const WeatherAttrs& attrs) const;
  const std::vector<Condition>& conditions() const noexcept { return conditions_; }

 private:
  std::vector<Condition> conditions_;
};

// iceOnRoad(V) at rec.t when the predicate holds for attrs.
std::optional<EventInstance> deriveIceEvent(const VehicleRecord& rec, const WeatherAttrs& attrs,
                                            const IcePredicate& predicate);

}  // namespace fleetcer
