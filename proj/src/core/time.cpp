#include "time.hpp"

#include <charconv>
#include <chrono>
#include <cstdio>

namespace fleetcer {

namespace {

bool parseFixed(std::string_view s, std::size_t pos, std::size_t len, int& out) {
  if (pos + len > s.size()) return false;
  auto first = s.data() + pos;
  auto [ptr, ec] = std::from_chars(first, first + len, out);
  return ec == std::errc{} && ptr == first + len;
}

}  // namespace

std::optional<TimePoint> parseTimestamp(std::string_view text) {
  while (!text.empty() && (text.front() == ' ' || text.front() == '\t')) text.remove_prefix(1);
  while (!text.empty() && (text.back() == ' ' || text.back() == '\t' || text.back() == '\r'))
    text.remove_suffix(1);
  if (text.empty()) return std::nullopt;

  if (text.find('-', 1) == std::string_view::npos) {
    TimePoint v = 0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc{} || ptr != text.data() + text.size() || v < 0) return std::nullopt;
    return v;
  }

  int y = 0, mo = 0, d = 0, h = 0, mi = 0, sec = 0;
  if (!parseFixed(text, 0, 4, y) || text.size() < 16 || text[4] != '-' ||
      !parseFixed(text, 5, 2, mo) || text[7] != '-' || !parseFixed(text, 8, 2, d) ||
      (text[10] != 'T' && text[10] != ' ') || !parseFixed(text, 11, 2, h) || text[13] != ':' ||
      !parseFixed(text, 14, 2, mi))
    return std::nullopt;
  std::size_t pos = 16;
  if (pos < text.size() && text[pos] == ':') {
    if (!parseFixed(text, pos + 1, 2, sec)) return std::nullopt;
    pos += 3;
  }
  if (pos < text.size() && text[pos] == 'Z') ++pos;
  if (pos != text.size()) return std::nullopt;
  if (h > 23 || mi > 59 || sec > 60) return std::nullopt;

  using namespace std::chrono;
  year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)}, day{static_cast<unsigned>(d)}};
  if (!ymd.ok()) return std::nullopt;
  auto days = sys_days{ymd}.time_since_epoch().count();
  TimePoint t = static_cast<TimePoint>(days) * 86400 + h * 3600 + mi * 60 + sec;
  if (t < 0) return std::nullopt;
  return t;
}

std::string formatIso(TimePoint t) {
  using namespace std::chrono;
  auto days = floor<std::chrono::days>(sys_seconds{seconds{t}});
  year_month_day ymd{days};
  auto rem = t - days.time_since_epoch().count() * 86400;
  char buf[64];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02lld:%02lld:%02lldZ", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                static_cast<long long>(rem / 3600), static_cast<long long>(rem / 60 % 60),
                static_cast<long long>(rem % 60));
  return buf;
}

}  // namespace fleetcer
