#include <doctest.h>

#include <fstream>
#include <functional>
#include <sstream>

#include "error.hpp"
#include "patterns.hpp"

using namespace fleetcer;

namespace {

std::string readText(const std::string& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Strata by DFS depth over guard and start/end references, for comparison.
std::map<std::string, int> depths(const std::vector<FluentDefinition>& fluents) {
  std::map<std::string, const FluentDefinition*> byName;
  for (const auto& f : fluents) byName[f.name] = &f;
  std::map<std::string, int> memo;
  std::function<int(const std::string&)> depth = [&](const std::string& n) {
    if (auto it = memo.find(n); it != memo.end()) return it->second;
    int d = 0;
    const auto* f = byName.at(n);
    for (const auto* rules : {&f->initiations, &f->terminations})
      for (const auto& r : *rules) {
        for (const auto& g : r.guards) d = std::max(d, depth(g) + 1);
        for (const auto& t : r.triggers)
          if (t.kind != TriggerAtom::Kind::Input) d = std::max(d, depth(t.name) + 1);
      }
    return memo[n] = d;
  };
  for (const auto& f : fluents) depth(f.name);
  return memo;
}

}  // namespace

TEST_CASE("built-in fleet patterns have the expected shape") {
  auto ps = builtinFleetPatterns();
  const auto* hs = ps.find("highSpeed");
  const auto* dd = ps.find("dangerousDriving");
  const auto* rf = ps.find("reFuelOpportunity");
  REQUIRE(hs);
  REQUIRE(dd);
  REQUIRE(rf);
  CHECK(hs->initiations.size() == 1);
  CHECK(hs->terminations.size() == 2);
  CHECK((hs->initiations[0].comparisons[0].op == CompareOp::Greater));
  CHECK((hs->terminations[0].comparisons[0].op == CompareOp::LessEqual));

  CHECK(dd->initiations.size() == 4);
  CHECK(dd->terminations.size() == 2);
  for (const auto& r : dd->initiations) CHECK(r.guards == std::vector<std::string>{"highSpeed"});
  CHECK(dd->terminations[0].triggers[0].kind == TriggerAtom::Kind::End);
  CHECK(dd->terminations[0].triggers[0].name == "highSpeed");

  REQUIRE(rf->initiations.size() == 1);
  const auto& init = rf->initiations[0];
  CHECK(init.triggers.size() == 2);
  CHECK(init.guards.size() == 1);
  REQUIRE(init.comparisons.size() == 1);
  CHECK((init.comparisons[0].op == CompareOp::Less));
  CHECK(init.comparisons[0].parameter == "fuel");
  CHECK(init.comparisons[0].scale() == doctest::Approx(0.5));
  CHECK((rf->terminations[0].comparisons[0].op == CompareOp::GreaterEqual));

  CHECK(ps.strata == Strata{{"highSpeed"}, {"dangerousDriving", "reFuelOpportunity"}});
  CHECK(builtinFleetPatterns() == ps);
}

TEST_CASE("the sample pattern file parses to the built-in set") {
  auto text = readText(std::string(FLEETCER_TEST_DATA) + "/../../config/fleet.patterns");
  REQUIRE_FALSE(text.empty());
  CHECK(parsePatternFile(text) == builtinFleetPatterns());
}

TEST_CASE("serialize then parse is the identity") {
  auto ps = builtinFleetPatterns();
  CHECK(parsePatternFile(serializePatterns(ps)) == ps);
  auto custom = parsePatternFile(
      "fluent a deadline 30\n init when abruptCornering()\n"
      "fluent b\n init when start(a) and fuelLevel(L) if holds a if L >= threshold(fuel)*3/4\n term when end(a)\n");
  CHECK(parsePatternFile(serializePatterns(custom)) == custom);
  CHECK(custom.find("a")->deadline == 30);
}

TEST_CASE("empty file gives an empty set") {
  auto ps = parsePatternFile("# nothing here\n\n");
  CHECK(ps.fluents.empty());
  CHECK(ps.strata.empty());
}

TEST_CASE("parse errors carry line numbers") {
  try {
    parsePatternFile("fluent a\n init when abruptCornering()\n init when\n");
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line() == 3);
  }
  CHECK_THROWS_AS(parsePatternFile("fluent a\n init when teleport()\n"), PatternError);
  CHECK_THROWS_AS(parsePatternFile("fluent a\n init when moving()\n"), PatternError);  // arity
  CHECK_THROWS_AS(parsePatternFile("fluent a\n init when stopped() if holds ghost\n"), PatternError);
  CHECK_THROWS_AS(parsePatternFile("fluent a\nfluent a\n"), PatternError);
  CHECK_THROWS_AS(parsePatternFile("init when stopped()\n"), ParseError);
  CHECK_THROWS_AS(parsePatternFile("fluent a\n init when moving(S) if S ~ threshold(speed)\n"), ParseError);
}

TEST_CASE("cycles are reported with their members") {
  try {
    parsePatternFile("fluent a\n init when stopped() if holds b\nfluent b\n init when stopped() if holds a\n");
    FAIL("expected PatternError");
  } catch (const PatternError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("cycl") != std::string::npos);
    CHECK(msg.find('a') != std::string::npos);
    CHECK(msg.find('b') != std::string::npos);
  }
}

TEST_CASE("dependency order") {
  auto one = parsePatternFile("fluent x\n init when stopped()\n");
  CHECK(one.strata == Strata{{"x"}});
  auto chain = parsePatternFile(
      "fluent c\n init when stopped() if holds b\nfluent b\n init when stopped() if holds a\nfluent a\n init when stopped()\n");
  CHECK(chain.strata == Strata{{"a"}, {"b"}, {"c"}});

  auto ps = builtinFleetPatterns();
  auto d = depths(ps.fluents);
  for (std::size_t s = 0; s < ps.strata.size(); ++s)
    for (const auto& f : ps.strata[s]) CHECK(d.at(f) == static_cast<int>(s));
}

TEST_CASE("threshold lookup") {
  ThresholdRegistry reg;
  reg.set("v1", "speed", 90);
  reg.set("*", "fuel", 60);
  CHECK(reg.lookup("v1", "speed") == 90);
  CHECK(reg.lookup("v2", "fuel") == 60);
  CHECK_THROWS_AS(ThresholdRegistry{}.lookup("v3", "speed"), Error);
  CHECK_THROWS_AS(reg.set("v1", "speed", 0), ContractViolation);
}

TEST_CASE("threshold files") {
  auto a = parseThresholds("vehicle,parameter,value\n*,speed,90\nv7,speed,70 # slower truck\n*,fuel,60\n");
  CHECK(a.lookup("v7", "speed") == 70);
  CHECK(a.lookup("v1", "speed") == 90);
  auto b = parseThresholds("# whitespace form\nthreshold * speed 90\nthreshold v7 fuel 40\n");
  CHECK(b.lookup("v7", "fuel") == 40);
  CHECK_THROWS_AS(parseThresholds("*,speed,fast\n*,fuel,x\n"), ParseError);
  auto sample = parseThresholds(readText(std::string(FLEETCER_TEST_DATA) + "/../../config/thresholds.csv"));
  CHECK(sample.lookup("any", "speed") == 90);
  CHECK(sample.lookup("any", "fuel") == 60);
}
