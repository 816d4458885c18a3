#pragma once

#include <cstdint>
#include <istream>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "ec_core.hpp"
#include "records.hpp"

namespace fleetcer {

inline constexpr double kEarthRadiusM = 6'371'000.0;
// Length of one degree of arc on the reference sphere.
inline constexpr double kMetersPerDegree = 111'195.0;

double haversineDistance(LonLat a, LonLat b);

struct Poi {
  LonLat loc;
  std::string name;
  std::string type;
};

inline constexpr const char* kGasStationType = "gas_station";

struct CellId {
  std::int64_t ix = 0;
  std::int64_t iy = 0;

  friend bool operator==(const CellId&, const CellId&) = default;
};

struct CellIdHash {
  std::size_t operator()(const CellId& c) const noexcept {
    return std::hash<std::int64_t>{}(c.ix * 0x9E3779B97F4A7C15LL ^ c.iy);
  }
};

CellId cellOf(LonLat loc, double cellSize);

// Exact minimum great-circle distance from p to the lon/lat rectangle of
// cell c (0 when p lies inside). Valid for cells narrower than 180 degrees.
double minDistanceToCell(LonLat p, CellId c, double cellSize);

// Square cell edge in degrees: theta expressed as longitude extent at the
// mean latitude of `pois`, which is the larger of the two extents.
double defaultCellSize(std::span<const Poi> pois, double thetaMeters);

struct JoinMatch {
  std::size_t poi = 0;  // index into GridIndex::pois()
  double distanceM = 0;
};

struct GridIndexStats {
  std::size_t pois = 0;            // n
  std::size_t cells = 0;           // non-empty cells
  std::size_t replicatedEntries = 0;
  double avgPoisPerCell = 0;       // c
  double replicationFactor = 0;    // entries / n
};

// POIs replicated into every cell whose rectangle lies within theta of them,
// so a record's distance join is answered from its own cell alone.
// Immutable after construction; safe to share between join workers.
class GridIndex {
 public:
  // Throws ContractViolation unless theta >= 0 and cellSize > 0.
  GridIndex(std::vector<Poi> pois, double thetaMeters, double cellSizeDegrees);

  double theta() const noexcept { return theta_; }
  double cellSize() const noexcept { return cellSize_; }
  const std::vector<Poi>& pois() const noexcept { return pois_; }
  const GridIndexStats& stats() const noexcept { return stats_; }

  // POI indices replicated into `cell`, ascending.
  std::span<const std::uint32_t> cellMembers(CellId cell) const;
  // Candidates for a record: the members of its own cell.
  std::span<const std::uint32_t> candidates(LonLat loc) const { return cellMembers(cellOf(loc, cellSize_)); }

  // POIs within theta of loc (boundary inclusive), nearest first.
  std::vector<JoinMatch> distanceJoin(LonLat loc) const;

  const std::unordered_map<CellId, std::vector<std::uint32_t>, CellIdHash>& cells() const noexcept { return cells_; }

 private:
  std::vector<Poi> pois_;
  double theta_;
  double cellSize_;
  std::unordered_map<CellId, std::vector<std::uint32_t>, CellIdHash> cells_;
  GridIndexStats stats_;
};

// closeToGas(V) at rec.t when at least one joined POI is a gas station.
std::optional<EventInstance> deriveCloseToGas(const VehicleRecord& rec, std::span<const JoinMatch> joined,
                                              const GridIndex& index);

struct PoiCsvResult {
  std::vector<Poi> pois;
  std::size_t rejected = 0;
};

// `lon,lat,name,type` with an optional header row. Rows with invalid
// coordinates are skipped and counted.
PoiCsvResult readPoiCsv(std::istream& in);

}  // namespace fleetcer
