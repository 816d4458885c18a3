#include "poi.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "csv.hpp"
#include "error.hpp"

namespace fleetcer {

namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;
constexpr double kRadToDeg = 180.0 / std::numbers::pi;
// Replication slack: a POI is replicated when its distance to a cell is within
// theta plus this many meters, so rounding can never lose a true match.
constexpr double kReplicationSlackM = 1e-6;
constexpr double kMinCellSizeDeg = 1e-4;

}  // namespace

double haversineDistance(LonLat a, LonLat b) {
  const double phi1 = a.lat * kDegToRad, phi2 = b.lat * kDegToRad;
  const double dPhi = phi2 - phi1;
  const double dLambda = (b.lon - a.lon) * kDegToRad;
  const double s = std::sin(dPhi / 2), t = std::sin(dLambda / 2);
  const double h = std::min(1.0, s * s + std::cos(phi1) * std::cos(phi2) * t * t);
  return 2 * kEarthRadiusM * std::asin(std::sqrt(h));
}

CellId cellOf(LonLat loc, double cellSize) {
  return {static_cast<std::int64_t>(std::floor(loc.lon / cellSize)),
          static_cast<std::int64_t>(std::floor(loc.lat / cellSize))};
}

double minDistanceToCell(LonLat p, CellId c, double cellSize) {
  const double x0 = static_cast<double>(c.ix) * cellSize, x1 = x0 + cellSize;
  const double y0 = static_cast<double>(c.iy) * cellSize, y1 = y0 + cellSize;
  if (p.lon >= x0 && p.lon <= x1) return haversineDistance(p, {p.lon, std::clamp(p.lat, y0, y1)});

  // Outside the longitude span: the nearest point is on the nearer meridian
  // edge, at the foot of the perpendicular great circle clamped to the edge.
  const double edge = p.lon < x0 ? x0 : x1;
  const double dLambda = std::abs(p.lon - edge) * kDegToRad;
  if (dLambda >= std::numbers::pi / 2)
    return std::min(haversineDistance(p, {edge, y0}), haversineDistance(p, {edge, y1}));
  const double foot = std::atan(std::tan(p.lat * kDegToRad) / std::cos(dLambda)) * kRadToDeg;
  return haversineDistance(p, {edge, std::clamp(foot, y0, y1)});
}

double defaultCellSize(std::span<const Poi> pois, double thetaMeters) {
  double meanLat = 0;
  for (const auto& p : pois) meanLat += p.loc.lat;
  if (!pois.empty()) meanLat /= static_cast<double>(pois.size());
  const double cosLat = std::max(std::cos(meanLat * kDegToRad), 1e-6);
  return std::max(thetaMeters / (kMetersPerDegree * cosLat), kMinCellSizeDeg);
}

GridIndex::GridIndex(std::vector<Poi> pois, double thetaMeters, double cellSizeDegrees)
    : pois_(std::move(pois)), theta_(thetaMeters), cellSize_(cellSizeDegrees) {
  if (!(theta_ >= 0)) throw ContractViolation("theta must be non-negative");
  if (!(cellSize_ > 0)) throw ContractViolation("cell size must be positive");

  const double angular = theta_ / kEarthRadiusM;  // radians
  const double dLatDeg = angular * kRadToDeg;
  for (std::size_t i = 0; i < pois_.size(); ++i) {
    const auto& p = pois_[i].loc;
    const double latLo = std::max(-90.0, p.lat - dLatDeg), latHi = std::min(90.0, p.lat + dLatDeg);
    double dLonDeg = 180.0;
    if (std::abs(p.lat) + dLatDeg < 90.0) {
      const double s = std::sin(angular) / std::cos(p.lat * kDegToRad);
      dLonDeg = s >= 1 ? 180.0 : std::asin(s) * kRadToDeg;
    }
    const double lonLo = std::max(-180.0, p.lon - dLonDeg), lonHi = std::min(180.0, p.lon + dLonDeg);

    const auto lo = cellOf({lonLo, latLo}, cellSize_);
    const auto hi = cellOf({lonHi, latHi}, cellSize_);
    for (auto iy = lo.iy - 1; iy <= hi.iy + 1; ++iy) {
      for (auto ix = lo.ix - 1; ix <= hi.ix + 1; ++ix) {
        const CellId cell{ix, iy};
        if (minDistanceToCell(p, cell, cellSize_) <= theta_ + kReplicationSlackM)
          cells_[cell].push_back(static_cast<std::uint32_t>(i));
      }
    }
  }

  stats_.pois = pois_.size();
  stats_.cells = cells_.size();
  for (const auto& [cell, members] : cells_) stats_.replicatedEntries += members.size();
  if (stats_.cells) stats_.avgPoisPerCell = static_cast<double>(stats_.replicatedEntries) / static_cast<double>(stats_.cells);
  if (stats_.pois) stats_.replicationFactor = static_cast<double>(stats_.replicatedEntries) / static_cast<double>(stats_.pois);
}

std::span<const std::uint32_t> GridIndex::cellMembers(CellId cell) const {
  auto it = cells_.find(cell);
  if (it == cells_.end()) return {};
  return it->second;
}

std::vector<JoinMatch> GridIndex::distanceJoin(LonLat loc) const {
  std::vector<JoinMatch> out;
  for (auto i : candidates(loc)) {
    const double d = haversineDistance(loc, pois_[i].loc);
    if (d <= theta_) out.push_back({i, d});
  }
  std::sort(out.begin(), out.end(), [](const JoinMatch& a, const JoinMatch& b) {
    return a.distanceM != b.distanceM ? a.distanceM < b.distanceM : a.poi < b.poi;
  });
  return out;
}

std::optional<EventInstance> deriveCloseToGas(const VehicleRecord& rec, std::span<const JoinMatch> joined,
                                              const GridIndex& index) {
  for (const auto& m : joined)
    if (index.pois()[m.poi].type == kGasStationType) return EventInstance{"closeToGas", rec.id, {}, rec.t, rec.t};
  return std::nullopt;
}

PoiCsvResult readPoiCsv(std::istream& in) {
  PoiCsvResult out;
  std::string line;
  bool first = true;
  while (readLine(in, line)) {
    if (trim(line).empty()) continue;
    auto f = splitCsvLine(line);
    const bool header = std::exchange(first, false);
    auto lon = f.size() >= 2 ? parseDouble(f[0]) : std::nullopt;
    auto lat = f.size() >= 2 ? parseDouble(f[1]) : std::nullopt;
    if (header && !lon && f.size() >= 2 && trim(f[0]) == "lon") continue;
    if (f.size() != 4 || !lon || !lat || *lon < -180 || *lon > 180 || *lat < -90 || *lat > 90) {
      ++out.rejected;
      continue;
    }
    out.pois.push_back({{*lon, *lat}, std::string(trim(f[2])), std::string(trim(f[3]))});
  }
  return out;
}

}  // namespace fleetcer
