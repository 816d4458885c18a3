#include <CLI11.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "fleetcer/fleetcer.h"

namespace {

struct FcError {
  fc_status status;
};

void check(fc_status s) {
  if (s != FC_OK) throw FcError{s};
}

struct OwnedString {
  char* p = nullptr;
  ~OwnedString() { fc_string_free(p); }
  std::string str() const { return p ? p : ""; }
};

// "90", "90s", "15m", "8h", "1d" -> seconds
long long parseDuration(const std::string& text) {
  if (text.empty()) throw CLI::ValidationError("empty duration");
  long long mult = 1;
  std::string digits = text;
  switch (text.back()) {
    case 's': mult = 1; digits.pop_back(); break;
    case 'm': mult = 60; digits.pop_back(); break;
    case 'h': mult = 3600; digits.pop_back(); break;
    case 'd': mult = 86400; digits.pop_back(); break;
    default: break;
  }
  std::size_t used = 0;
  long long v = 0;
  try {
    v = std::stoll(digits, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != digits.size() || digits.empty() || v <= 0) throw CLI::ValidationError("invalid duration '" + text + "'");
  return v * mult;
}

std::optional<std::string> envSeed() {
  if (const char* s = std::getenv("FLEETCER_SEED"); s && *s) return std::string(s);
  return std::nullopt;
}

void writeText(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out || !(out << text)) {
    std::cerr << "fleetcer: cannot write " << path.string() << "\n";
    throw FcError{FC_ERR_IO};
  }
}

// Flags that map onto run settings. Only flags given on the command line are
// forwarded, and a --config file replaces them.
struct SettingFlags {
  std::map<std::string, std::string> values;
  std::vector<std::pair<std::string, CLI::Option*>> options;
  std::string configFile;

  void add(CLI::App* app, const std::string& flag, const std::string& key, const std::string& help) {
    options.emplace_back(key, app->add_option("--" + flag, values[key], help));
  }

  void durationFlag(CLI::App* app, const std::string& flag, const std::string& key, const std::string& help) {
    add(app, flag, key, help + " (e.g. 3600, 90m, 8h)");
  }

  fc_config* build() const {
    fc_config* cfg = nullptr;
    check(fc_config_new(&cfg));
    std::unique_ptr<fc_config, decltype(&fc_config_free)> guard(cfg, fc_config_free);
    if (auto seed = envSeed()) check(fc_config_set(cfg, "seed", seed->c_str()));
    for (const auto& [key, opt] : options) {
      if (opt->count() == 0) continue;
      std::string v = values.at(key);
      if (key == "window_secs" || key == "slide_secs") v = std::to_string(parseDuration(v));
      check(fc_config_set(cfg, key.c_str(), v.c_str()));
    }
    if (!configFile.empty()) check(fc_config_load(cfg, configFile.c_str()));
    return guard.release();
  }
};

void addRecognitionFlags(CLI::App* app, SettingFlags& f) {
  app->add_option("--config", f.configFile, "key=value settings file (overrides flags)");
  f.add(app, "patterns", "patterns", "pattern definition file (default: built-in fleet patterns)");
  f.add(app, "thresholds", "thresholds", "threshold CSV (default: placeholder speed=90, fuel=60)");
  f.durationFlag(app, "window", "window_secs", "window size");
  f.durationFlag(app, "slide", "slide_secs", "slide step");
  f.add(app, "first-query", "first_query", "first query time (epoch seconds or ISO-8601)");
  f.add(app, "mode", "mode", "batch or incremental");
  f.add(app, "workers", "workers", "recognizer workers");
}

void addEnrichmentFlags(CLI::App* app, SettingFlags& f) {
  f.add(app, "vehicles", "vehicles", "vehicle CSV");
  f.add(app, "pois", "pois", "POI CSV (lon,lat,name,type)");
  f.add(app, "weather-dir", "weather_dir", "directory of .grid forecast files");
  f.add(app, "weather-attributes", "weather_attributes", "comma-separated attribute names");
  f.add(app, "ice-predicate", "ice_predicate", "iceOnRoad condition");
  f.add(app, "theta-meters", "theta_meters", "POI distance threshold in meters (default 300)");
  f.add(app, "cell-size-deg", "cell_size_deg", "POI grid cell size in degrees");
  f.add(app, "delay-fraction", "delay_fraction", "fraction of events to delay");
  f.add(app, "seed", "seed", "delay injection seed (default: $FLEETCER_SEED or 1)");
  f.add(app, "unit-scale-secs", "unit_scale_secs", "seconds per Gamma unit (default 7200)");
}

void printStageCounts(const char* what, const fc_stage_counts& c) {
  std::printf("%s: read %zu, wrote %zu, rejected %zu\n", what, c.read, c.written, c.rejected);
}

void printSummary(fc_report* report) {
  std::printf("queries: %zu\navg recognition: %.3f ms\n", fc_report_query_count(report),
              fc_report_avg_recognition_ms(report));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Fleet monitoring: stream enrichment and composite event recognition"};
  app.require_subcommand(1);

  // enrich-weather
  auto* ew = app.add_subcommand("enrich-weather", "validate vehicle records and attach weather attributes");
  std::string ewIn, ewOut, ewDir, ewAttrs;
  ew->add_option("input", ewIn, "vehicle CSV")->required();
  ew->add_option("output", ewOut, "enriched CSV")->required();
  ew->add_option("--weather-dir", ewDir, "directory of .grid forecast files")->required();
  ew->add_option("--weather-attributes", ewAttrs, "comma-separated attribute names");

  // enrich-poi
  auto* ep = app.add_subcommand("enrich-poi", "join enriched records with nearby POIs");
  std::string epIn, epOut, epPois;
  double epTheta = 300;
  ep->add_option("input", epIn, "enriched CSV")->required();
  ep->add_option("output", epOut, "enriched CSV with POI columns")->required();
  ep->add_option("--pois", epPois, "POI CSV")->required();
  ep->add_option("--theta-meters", epTheta, "distance threshold in meters")->capture_default_str();

  // derive-events
  auto* de = app.add_subcommand("derive-events", "turn enriched records into input events");
  std::string deIn, deOut, deIce;
  de->add_option("input", deIn, "enriched CSV")->required();
  de->add_option("output", deOut, "event CSV")->required();
  de->add_option("--ice-predicate", deIce, "iceOnRoad condition");

  // inject-delays
  auto* id = app.add_subcommand("inject-delays", "delay a random subset of events");
  std::string idIn, idOut;
  double idFraction = 0, idUnit = 7200;
  std::optional<std::uint64_t> idSeed;
  id->add_option("input", idIn, "event CSV")->required();
  id->add_option("output", idOut, "event CSV sorted by arrival")->required();
  id->add_option("--fraction", idFraction, "fraction of events to delay")->required()->check(CLI::Range(0.0, 1.0));
  id->add_option("--seed", idSeed, "random seed (default: $FLEETCER_SEED or 1)");
  id->add_option("--unit-scale-secs", idUnit, "seconds per Gamma unit")->capture_default_str();

  // recognize
  auto* rc = app.add_subcommand("recognize", "recognize composite events in an event CSV");
  SettingFlags rcFlags;
  std::string rcIn, rcOut;
  rc->add_option("input", rcIn, "event CSV")->required();
  rc->add_option("--out", rcOut, "output directory for intervals.csv, metrics.csv, report.json")->required();
  addRecognitionFlags(rc, rcFlags);

  // run
  auto* rn = app.add_subcommand("run", "full pipeline: enrichment, events, recognition");
  SettingFlags rnFlags;
  addRecognitionFlags(rn, rnFlags);
  addEnrichmentFlags(rn, rnFlags);
  rnFlags.add(rn, "out", "output_dir", "output directory");

  // sweep
  auto* sw = app.add_subcommand("sweep", "benchmark table over windows, workers and delays");
  SettingFlags swFlags;
  addRecognitionFlags(sw, swFlags);
  addEnrichmentFlags(sw, swFlags);
  std::vector<std::string> swWindows{"1h", "2h", "4h", "8h"};
  std::vector<unsigned> swWorkers{1, 2, 4, 8};
  std::vector<double> swDelays;
  std::string swOut;
  sw->add_option("--windows", swWindows, "window sizes")->delimiter(',')->capture_default_str();
  sw->add_option("--worker-counts", swWorkers, "worker counts")->delimiter(',')->capture_default_str();
  sw->add_option("--delay-fractions", swDelays, "delay fractions (none: batch-only table)")->delimiter(',');
  sw->add_option("--table", swOut, "write the table here instead of stdout");

  // generate-sample
  auto* gs = app.add_subcommand("generate-sample", "write a synthetic dataset");
  std::string gsDir;
  std::size_t gsVehicles = 20;
  std::string gsDuration = "1d";
  std::optional<std::uint64_t> gsSeed;
  gs->add_option("dir", gsDir, "output directory")->required();
  gs->add_option("--vehicles", gsVehicles, "number of vehicles")->capture_default_str();
  gs->add_option("--duration", gsDuration, "covered time span (e.g. 1d, 12h)")->capture_default_str();
  gs->add_option("--seed", gsSeed, "random seed (default: $FLEETCER_SEED or 1)");

  CLI11_PARSE(app, argc, argv);

  auto seedOr = [](const std::optional<std::uint64_t>& s) -> std::uint64_t {
    if (s) return *s;
    if (auto e = envSeed()) return std::strtoull(e->c_str(), nullptr, 10);
    return 1;
  };

  try {
    fc_stage_counts counts{};
    if (*ew) {
      check(fc_enrich_weather(ewIn.c_str(), ewDir.c_str(), ewAttrs.empty() ? nullptr : ewAttrs.c_str(), ewOut.c_str(),
                              &counts));
      printStageCounts("enrich-weather", counts);
    } else if (*ep) {
      check(fc_enrich_poi(epIn.c_str(), epPois.c_str(), epTheta, epOut.c_str(), &counts));
      printStageCounts("enrich-poi", counts);
    } else if (*de) {
      check(fc_derive_events(deIn.c_str(), deIce.empty() ? nullptr : deIce.c_str(), deOut.c_str(), &counts));
      printStageCounts("derive-events", counts);
    } else if (*id) {
      check(fc_inject_delays(idIn.c_str(), idOut.c_str(), idFraction, seedOr(idSeed), idUnit, &counts));
      printStageCounts("inject-delays", counts);
    } else if (*rc || *rn) {
      std::unique_ptr<fc_config, decltype(&fc_config_free)> cfg((*rc ? rcFlags : rnFlags).build(), fc_config_free);
      fc_report* raw = nullptr;
      if (*rc) check(fc_recognize(cfg.get(), rcIn.c_str(), &raw));
      else check(fc_run_pipeline(cfg.get(), &raw));
      std::unique_ptr<fc_report, decltype(&fc_report_free)> report(raw, fc_report_free);
      if (*rc) {
        std::filesystem::create_directories(rcOut);
        OwnedString intervals, metrics, json;
        check(fc_report_intervals_csv(report.get(), &intervals.p));
        check(fc_report_metrics_csv(report.get(), &metrics.p));
        check(fc_report_json(report.get(), &json.p));
        writeText(std::filesystem::path(rcOut) / "intervals.csv", intervals.str());
        writeText(std::filesystem::path(rcOut) / "metrics.csv", metrics.str());
        writeText(std::filesystem::path(rcOut) / "report.json", json.str());
      }
      printSummary(report.get());
    } else if (*sw) {
      std::unique_ptr<fc_config, decltype(&fc_config_free)> cfg(swFlags.build(), fc_config_free);
      std::vector<std::int64_t> windows;
      for (const auto& w : swWindows) windows.push_back(parseDuration(w));
      OwnedString table;
      check(fc_sweep(cfg.get(), windows.data(), windows.size(), swWorkers.data(), swWorkers.size(), swDelays.data(),
                     swDelays.size(), &table.p));
      if (swOut.empty()) std::fputs(table.p, stdout);
      else writeText(swOut, table.str());
    } else if (*gs) {
      check(fc_generate_sample(gsDir.c_str(), gsVehicles, parseDuration(gsDuration), seedOr(gsSeed)));
      std::printf("sample written to %s\n", gsDir.c_str());
    }
  } catch (const FcError& e) {
    std::fprintf(stderr, "fleetcer: %s: %s\n", fc_status_name(e.status), fc_last_error());
    return static_cast<int>(e.status);
  } catch (const CLI::ValidationError& e) {
    std::fprintf(stderr, "fleetcer: %s\n", e.what());
    return static_cast<int>(FC_ERR_INVALID_ARGUMENT);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "fleetcer: %s\n", e.what());
    return static_cast<int>(FC_ERR_INTERNAL);
  }
  return 0;
}
