#include "weather.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "csv.hpp"
#include "error.hpp"

namespace fleetcer {

GridCell gridCellOf(LonLat loc, double resolution) {
  return {static_cast<std::int64_t>(std::floor(loc.lon / resolution)),
          static_cast<std::int64_t>(std::floor(loc.lat / resolution))};
}

namespace {

constexpr double kNoValue = std::numeric_limits<double>::quiet_NaN();

std::string readFile(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

bool GridFile::covers(GridCell c) const noexcept {
  return c.ix >= ixMin_ && c.ix < ixMin_ + nx_ && c.iy >= iyMin_ && c.iy < iyMin_ + ny_;
}

std::optional<double> GridFile::value(GridCell c, std::size_t attribute) const {
  if (!covers(c) || attribute >= attributes_.size() || values_.empty()) return std::nullopt;
  const auto cell = static_cast<std::size_t>((c.iy - iyMin_) * nx_ + (c.ix - ixMin_));
  const double v = values_[cell * attributes_.size() + attribute];
  if (std::isnan(v)) return std::nullopt;
  return v;
}

std::optional<std::size_t> GridFile::attributeIndex(std::string_view name) const {
  auto it = std::find(attributes_.begin(), attributes_.end(), name);
  if (it == attributes_.end()) return std::nullopt;
  return static_cast<std::size_t>(it - attributes_.begin());
}

GridFile GridFile::parseImpl(std::string_view text, const std::string& origin, bool headerOnly) {
  GridFile g;
  std::istringstream in{std::string(text)};
  std::string line;
  int lineNo = 0;
  bool haveRef = false, haveBbox = false, haveAttrs = false, inData = false;
  auto fail = [&](const std::string& msg) { throw ParseError(origin + ": " + msg, lineNo); };
  auto layout = [&] {
    g.ixMin_ = static_cast<std::int64_t>(std::floor(g.bbox_[0] / g.resolution_));
    g.iyMin_ = static_cast<std::int64_t>(std::floor(g.bbox_[1] / g.resolution_));
    g.nx_ = static_cast<std::int64_t>(std::ceil(g.bbox_[2] / g.resolution_)) - g.ixMin_;
    g.ny_ = static_cast<std::int64_t>(std::ceil(g.bbox_[3] / g.resolution_)) - g.iyMin_;
    if (!headerOnly) g.values_.assign(static_cast<std::size_t>(g.nx_ * g.ny_) * g.attributes_.size(), kNoValue);
  };

  while (readLine(in, line)) {
    ++lineNo;
    auto body = trim(line);
    if (body.empty() || body.front() == '#') continue;
    std::istringstream ls{std::string(body)};

    if (!inData) {
      std::string key;
      ls >> key;
      if (key == "reference_time") {
        std::string v;
        ls >> v;
        auto t = parseTimestamp(v);
        if (!t) fail("invalid reference_time");
        if (*t % kForecastCycle != 0) fail("reference_time must fall on 00/06/12/18 UTC");
        g.referenceTime_ = *t;
        haveRef = true;
        continue;
      }
      if (key == "resolution") {
        if (!(ls >> g.resolution_) || !(g.resolution_ > 0)) fail("invalid resolution");
        continue;
      }
      if (key == "bbox") {
        auto& b = g.bbox_;
        if (!(ls >> b[0] >> b[1] >> b[2] >> b[3]) || b[2] <= b[0] || b[3] <= b[1]) fail("invalid bbox");
        haveBbox = true;
        continue;
      }
      if (key == "attributes") {
        std::string a;
        while (ls >> a) g.attributes_.push_back(a);
        if (g.attributes_.empty()) fail("no attributes declared");
        haveAttrs = true;
        continue;
      }
      if (!haveRef || !haveBbox || !haveAttrs) fail("data row before reference_time/bbox/attributes");
      inData = true;
      if (headerOnly) break;
      layout();
      ls.clear();
      ls.seekg(0);
    }

    std::int64_t ix = 0, iy = 0;
    if (!(ls >> ix >> iy)) fail("invalid cell row");
    if (!g.covers({ix, iy})) fail("cell outside bbox");
    const auto n = g.attributes_.size();
    const auto cell = static_cast<std::size_t>((iy - g.iyMin_) * g.nx_ + (ix - g.ixMin_));
    for (std::size_t a = 0; a < n; ++a) {
      std::string tok;
      if (!(ls >> tok)) fail("missing attribute value");
      if (tok == "NA" || tok == "nan") continue;
      auto v = parseDouble(tok);
      if (!v) fail("non-numeric attribute value");
      g.values_[cell * n + a] = *v;
    }
  }
  if (!haveRef || !haveBbox || !haveAttrs) fail("incomplete header");
  if (!inData || headerOnly) layout();
  return g;
}

GridFile GridFile::parse(std::string_view text, const std::string& origin) { return parseImpl(text, origin, false); }

GridFile GridFile::load(const std::filesystem::path& path) { return parse(readFile(path), path.string()); }

GridFile GridFile::loadHeader(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::string header, line;
  while (readLine(in, line)) {
    header += line + "\n";
    if (trim(line).starts_with("attributes")) break;
  }
  return parseImpl(header, path.string(), true);
}

std::string GridFile::toText() const {
  std::ostringstream os;
  os << "# gridded weather forecast\n";
  os << "reference_time " << formatIso(referenceTime_) << "\n";
  os << "resolution " << formatNumber(resolution_) << "\n";
  os << "bbox " << formatNumber(bbox_[0]) << " " << formatNumber(bbox_[1]) << " " << formatNumber(bbox_[2]) << " "
     << formatNumber(bbox_[3]) << "\n";
  os << "attributes";
  for (const auto& a : attributes_) os << " " << a;
  os << "\n";
  for (std::int64_t y = 0; y < ny_; ++y) {
    for (std::int64_t x = 0; x < nx_; ++x) {
      const auto cell = static_cast<std::size_t>(y * nx_ + x);
      os << (ixMin_ + x) << " " << (iyMin_ + y);
      for (std::size_t a = 0; a < attributes_.size(); ++a) {
        const double v = values_[cell * attributes_.size() + a];
        os << " " << (std::isnan(v) ? std::string("NA") : formatNumber(v));
      }
      os << "\n";
    }
  }
  return os.str();
}

GridFile GridFile::Builder::build() const {
  std::ostringstream header;
  header << "reference_time " << referenceTime << "\nresolution 0.5\nbbox " << formatNumber(lonMin) << " "
         << formatNumber(latMin) << " " << formatNumber(lonMax) << " " << formatNumber(latMax) << "\nattributes";
  for (const auto& a : attributes) header << " " << a;
  header << "\n";
  GridFile g = GridFile::parse(header.str(), "<builder>");
  if (!fill) return g;
  for (std::int64_t y = 0; y < g.ny_; ++y) {
    for (std::int64_t x = 0; x < g.nx_; ++x) {
      auto vals = fill({g.ixMin_ + x, g.iyMin_ + y}, referenceTime + kForecastLead);
      if (vals.size() != attributes.size()) throw ContractViolation("grid fill returned wrong value count");
      const auto cell = static_cast<std::size_t>(y * g.nx_ + x);
      std::copy(vals.begin(), vals.end(), g.values_.begin() + static_cast<std::ptrdiff_t>(cell * attributes.size()));
    }
  }
  return g;
}

WeatherStore::WeatherStore(std::vector<ForecastRef> files, std::size_t cacheCapacity)
    : capacity_(std::max<std::size_t>(1, cacheCapacity)) {
  for (auto& f : files) {
    f.validTime = f.referenceTime + kForecastLead;
    auto key = f.referenceTime;
    if (!index_.emplace(key, std::move(f)).second)
      throw ContractViolation("two forecast files share reference time " + formatIso(key));
  }
}

WeatherStore WeatherStore::openDirectory(const std::filesystem::path& dir, std::size_t cacheCapacity) {
  if (!std::filesystem::is_directory(dir)) throw IoError("weather directory not found: " + dir.string());
  std::vector<ForecastRef> refs;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (!entry.is_regular_file() || entry.path().extension() != ".grid") continue;
    auto header = GridFile::loadHeader(entry.path());
    refs.push_back({header.referenceTime(), header.validTime(), entry.path()});
  }
  return WeatherStore(std::move(refs), cacheCapacity);
}

const ForecastRef& WeatherStore::nearestForecast(TimePoint t) const {
  if (index_.empty()) throw ContractViolation("weather store is empty");
  // First file whose valid time is >= t, and the one before it.
  auto after = index_.lower_bound(t - kForecastLead);
  if (after == index_.end()) return std::prev(after)->second;
  if (after == index_.begin()) return after->second;
  auto before = std::prev(after);
  const auto dAfter = after->second.validTime - t;
  const auto dBefore = t - before->second.validTime;
  return dBefore <= dAfter ? before->second : after->second;
}

std::shared_ptr<const GridFile> WeatherStore::open(const ForecastRef& ref) {
  auto it = std::find_if(lru_.begin(), lru_.end(), [&](const auto& e) { return e.first == ref.path; });
  if (it != lru_.end()) {
    ++stats_.hits;
    lru_.splice(lru_.begin(), lru_, it);
    return lru_.front().second;
  }
  ++stats_.misses;
  auto grid = std::make_shared<const GridFile>(GridFile::load(ref.path));
  lru_.emplace_front(ref.path, grid);
  if (lru_.size() > capacity_) {
    lru_.pop_back();
    ++stats_.evictions;
  }
  return grid;
}

std::optional<WeatherAttrs> WeatherStore::lookupWeather(LonLat loc, TimePoint t,
                                                        const std::vector<std::string>& attributes) {
  const auto grid = open(nearestForecast(t));
  const auto cell = gridCellOf(loc, grid->resolution());
  if (!grid->covers(cell)) return std::nullopt;
  WeatherAttrs out;
  for (const auto& name : attributes) {
    auto idx = grid->attributeIndex(name);
    if (!idx) continue;
    if (auto v = grid->value(cell, *idx)) out.emplace(name, *v);
  }
  return out;
}

IcePredicate IcePredicate::parse(std::string_view text) {
  IcePredicate p;
  std::istringstream in{std::string(text)};
  std::string attr, op, value;
  for (;;) {
    if (!(in >> attr)) break;
    if (!(in >> op >> value)) throw ParseError("ice predicate: expected '<attribute> <op> <value>'");
    CompareOp cop;
    if (op == "<") cop = CompareOp::Less;
    else if (op == "<=") cop = CompareOp::LessEqual;
    else if (op == ">") cop = CompareOp::Greater;
    else if (op == ">=") cop = CompareOp::GreaterEqual;
    else throw ParseError("ice predicate: unknown operator '" + op + "'");
    auto v = parseDouble(value);
    if (!v) throw ParseError("ice predicate: '" + value + "' is not a number");
    p.conditions_.push_back({attr, cop, *v});
    std::string conj;
    if (!(in >> conj)) break;
    if (conj != "and" && conj != "&&") throw ParseError("ice predicate: expected 'and'");
  }
  if (p.conditions_.empty()) throw ParseError("ice predicate is empty");
  return p;
}

bool IcePredicate::operator()(const WeatherAttrs& attrs) const {
  for (const auto& c : conditions_) {
    auto it = attrs.find(c.attribute);
    if (it == attrs.end() || !compare(it->second, c.op, c.value)) return false;
  }
  return true;
}

std::optional<EventInstance> deriveIceEvent(const VehicleRecord& rec, const WeatherAttrs& attrs,
                                            const IcePredicate& predicate) {
  if (!predicate(attrs)) return std::nullopt;
  return EventInstance{"iceOnRoad", rec.id, {}, rec.t, rec.t};
}

}  // namespace fleetcer
