#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <fleetcer/fleetcer.h>

#include "../unit/temp_dir.hpp"

extern "C" int fc_header_check_ok(void);

namespace {

// Takes ownership of a returned string.
std::string take(char* s) {
  std::string out = s ? s : "";
  fc_string_free(s);
  return out;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct Config {
  fc_config* cfg = nullptr;
  Config() { REQUIRE(fc_config_new(&cfg) == FC_OK); }
  ~Config() { fc_config_free(cfg); }
  void set(const char* k, const std::string& v) { REQUIRE(fc_config_set(cfg, k, v.c_str()) == FC_OK); }
};

}  // namespace

TEST_CASE("header compiles as C") { CHECK(fc_header_check_ok() == 1); }

TEST_CASE("status names and null arguments") {
  CHECK(std::string(fc_status_name(FC_OK)) == "ok");
  CHECK(std::string(fc_status_name(FC_ERR_NO_RECORDS)) != std::string(fc_status_name(FC_ERR_IO)));
  CHECK(fc_config_new(nullptr) == FC_ERR_INVALID_ARGUMENT);
  CHECK(std::string(fc_last_error()).size() > 0);
  CHECK(fc_run_pipeline(nullptr, nullptr) == FC_ERR_INVALID_ARGUMENT);
  CHECK(fc_report_query_count(nullptr) == 0);
  fc_string_free(nullptr);
  fc_report_free(nullptr);
  fc_engine_free(nullptr);
}

TEST_CASE("config values") {
  Config c;
  c.set("window_secs", "7200");
  char* v = nullptr;
  REQUIRE(fc_config_get(c.cfg, "window_secs", &v) == FC_OK);
  CHECK(take(v) == "7200");
  CHECK(fc_config_get(c.cfg, "slide_secs", &v) == FC_ERR_INVALID_ARGUMENT);
  CHECK(fc_config_validate(c.cfg) == FC_OK);
  c.set("mystery", "1");
  CHECK(fc_config_validate(c.cfg) == FC_ERR_CONTRACT);
  CHECK(std::string(fc_last_error()).find("mystery") != std::string::npos);

  TempDir d;
  Config loaded;
  loaded.set("workers", "3");
  auto p = d.write("run.conf", "# comment\nworkers = 2\nmode=incremental\n");
  REQUIRE(fc_config_load(loaded.cfg, p.c_str()) == FC_OK);
  REQUIRE(fc_config_get(loaded.cfg, "workers", &v) == FC_OK);
  CHECK(take(v) == "2");
  CHECK(fc_config_load(loaded.cfg, (d / "missing.conf").c_str()) == FC_ERR_IO);
}

TEST_CASE("pipeline through the C API") {
  TempDir d;
  REQUIRE(fc_generate_sample(d.path().c_str(), 4, 86400, 3) == FC_OK);
  Config c;
  c.set("vehicles", (d / "vehicles.csv").string());
  c.set("pois", (d / "pois.csv").string());
  c.set("weather_dir", (d / "weather").string());
  c.set("output_dir", (d / "out").string());
  fc_report* rep = nullptr;
  REQUIRE(fc_run_pipeline(c.cfg, &rep) == FC_OK);
  CHECK(fc_report_query_count(rep) >= 24);
  CHECK(fc_report_avg_recognition_ms(rep) >= 0);
  char* s = nullptr;
  REQUIRE(fc_report_json(rep, &s) == FC_OK);
  CHECK(take(s).find("\"queries\"") != std::string::npos);
  REQUIRE(fc_report_intervals_csv(rep, &s) == FC_OK);
  const auto intervals = take(s);
  CHECK(intervals == slurp(d / "out" / "intervals.csv"));
  REQUIRE(fc_report_metrics_csv(rep, &s) == FC_OK);
  CHECK(take(s) == slurp(d / "out" / "metrics.csv"));
  fc_report_free(rep);

  // recognition over the written events gives the same intervals
  fc_report* again = nullptr;
  REQUIRE(fc_recognize(c.cfg, (d / "out" / "events.csv").c_str(), &again) == FC_OK);
  REQUIRE(fc_report_intervals_csv(again, &s) == FC_OK);
  CHECK(take(s) == intervals);
  fc_report_free(again);

  c.set("vehicles", (d / "absent.csv").string());
  CHECK(fc_run_pipeline(c.cfg, &rep) == FC_ERR_IO);
}

TEST_CASE("staged commands") {
  TempDir d;
  REQUIRE(fc_generate_sample(d.path().c_str(), 2, 6 * 3600, 1) == FC_OK);
  fc_stage_counts n{};
  REQUIRE(fc_enrich_weather((d / "vehicles.csv").c_str(), (d / "weather").c_str(), nullptr,
                            (d / "w.csv").c_str(), &n) == FC_OK);
  CHECK(n.read == 2 * 360);
  CHECK(n.written == n.read);
  REQUIRE(fc_enrich_poi((d / "w.csv").c_str(), (d / "pois.csv").c_str(), 300, (d / "p.csv").c_str(), &n) == FC_OK);
  REQUIRE(fc_derive_events((d / "p.csv").c_str(), nullptr, (d / "e.csv").c_str(), &n) == FC_OK);
  CHECK(n.written > n.read);
  REQUIRE(fc_inject_delays((d / "e.csv").c_str(), (d / "late.csv").c_str(), 0.5, 7, 7200, &n) == FC_OK);
  CHECK(n.written == n.read);

  d.write("bad.csv", "lon,lat\nnot,numbers\n");
  CHECK(fc_derive_events((d / "bad.csv").c_str(), nullptr, (d / "x.csv").c_str(), &n) == FC_ERR_PARSE);
  CHECK(fc_inject_delays((d / "e.csv").c_str(), (d / "y.csv").c_str(), 2.0, 7, 7200, &n) == FC_ERR_CONTRACT);
}

TEST_CASE("sweep table") {
  TempDir d;
  REQUIRE(fc_generate_sample(d.path().c_str(), 3, 86400, 2) == FC_OK);
  Config c;
  c.set("vehicles", (d / "vehicles.csv").string());
  const int64_t windows[] = {3600, 7200};
  const unsigned workers[] = {1, 2};
  char* csv = nullptr;
  REQUIRE(fc_sweep(c.cfg, windows, 2, workers, 2, nullptr, 0, &csv) == FC_OK);
  auto table = take(csv);
  CHECK(std::count(table.begin(), table.end(), '\n') == 5);
  CHECK(table.rfind("window_secs,slide_secs,workers,mode,delay_pct", 0) == 0);
}

TEST_CASE("patterns and a single engine") {
  fc_patterns* ps = nullptr;
  REQUIRE(fc_patterns_builtin(&ps) == FC_OK);
  REQUIRE(fc_patterns_set_thresholds(ps, "*,speed,90\n*,fuel,60\n") == FC_OK);
  char* text = nullptr;
  REQUIRE(fc_patterns_serialize(ps, &text) == FC_OK);
  const auto serialized = take(text);
  CHECK(serialized.find("fluent highSpeed") != std::string::npos);

  fc_patterns* parsed = nullptr;
  REQUIRE(fc_patterns_parse(serialized.c_str(), &parsed) == FC_OK);
  fc_patterns_free(parsed);
  CHECK(fc_patterns_parse("fluent a\n init when nope()\n", &parsed) == FC_ERR_PARSE);

  fc_engine* eng = nullptr;
  REQUIRE(fc_engine_new(ps, 100, 100, -1, &eng) == FC_OK);
  fc_patterns_free(ps);  // the engine keeps its own copy
  const double fast = 120, slow = 40;
  int kept = 0;
  REQUIRE(fc_engine_ingest(eng, "moving", "v1", &fast, 1, 10, 10, &kept) == FC_OK);
  CHECK(kept == 1);
  REQUIRE(fc_engine_ingest(eng, "moving", "v1", &slow, 1, 30, 30, &kept) == FC_OK);
  CHECK(fc_engine_ingest(eng, "moving", "v1", nullptr, 0, 40, 40, &kept) == FC_ERR_CONTRACT);
  char* rows = nullptr;
  REQUIRE(fc_engine_evaluate(eng, 100, 0, &rows) == FC_OK);
  CHECK(take(rows) == "fluent,vehicle,start_exclusive,end_inclusive,query_time\nhighSpeed,v1,10,30,100\n");

  // older than the window of the last query: dropped
  REQUIRE(fc_engine_ingest(eng, "moving", "v1", &fast, 1, 0, 150, &kept) == FC_OK);
  CHECK(kept == 0);
  CHECK(fc_engine_dropped(eng) == 1);
  REQUIRE(fc_engine_evaluate(eng, 200, 1, &rows) == FC_OK);
  CHECK(take(rows) == "fluent,vehicle,start_exclusive,end_inclusive,query_time\n");
  fc_engine_free(eng);
}
