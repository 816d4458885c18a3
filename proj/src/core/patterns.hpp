#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "time.hpp"

namespace fleetcer {

// Per-vehicle numeric thresholds (`speed` in km/h, `fuel` tank size in liters).
// The vehicle id `*` acts as a default row.
class ThresholdRegistry {
 public:
  static constexpr const char* kAnyVehicle = "*";

  // Throws ContractViolation unless value > 0.
  void set(const std::string& vehicle, const std::string& parameter, double value);
  // Vehicle-specific value, else the `*` row, else throws Error.
  double lookup(std::string_view vehicle, std::string_view parameter) const;
  bool empty() const noexcept { return entries_.empty(); }
  const std::map<std::pair<std::string, std::string>, double>& entries() const noexcept {
    return entries_;
  }

  friend bool operator==(const ThresholdRegistry&, const ThresholdRegistry&) = default;

 private:
  std::map<std::pair<std::string, std::string>, double> entries_;
};

// Rows `vehicle,parameter,value` (an optional header row is skipped) or the
// whitespace form `threshold <vehicle|*> <parameter> <value>`. `#` starts a comment.
ThresholdRegistry parseThresholds(std::string_view text);

enum class CompareOp { Less, LessEqual, Greater, GreaterEqual };

std::string_view toString(CompareOp op);
bool compare(double lhs, CompareOp op, double rhs);

// One happensAt atom. Input atoms name an input event type and bind its
// arguments to variables; Start/End atoms are the built-in boundary events
// of another fluent's maximal intervals.
struct TriggerAtom {
  enum class Kind { Input, Start, End };

  Kind kind = Kind::Input;
  std::string name;
  std::vector<std::string> argNames;

  friend bool operator==(const TriggerAtom&, const TriggerAtom&) = default;
};

// `variable op threshold(parameter) * scaleNum / scaleDen`
struct Comparison {
  std::string variable;
  CompareOp op = CompareOp::Greater;
  std::string parameter;
  std::int64_t scaleNum = 1;
  std::int64_t scaleDen = 1;

  double scale() const noexcept { return static_cast<double>(scaleNum) / static_cast<double>(scaleDen); }

  friend bool operator==(const Comparison&, const Comparison&) = default;
};

enum class RuleKind { Initiates, Terminates };

// initiatedAt / terminatedAt rule for `target=true` of the implicit vehicle V.
// All triggers must occur at the same time-point T; every guard fluent must
// hold at T.
struct Rule {
  RuleKind kind = RuleKind::Initiates;
  std::string target;
  std::vector<TriggerAtom> triggers;
  std::vector<std::string> guards;
  std::vector<Comparison> comparisons;

  friend bool operator==(const Rule&, const Rule&) = default;
};

struct FluentDefinition {
  std::string name;
  std::vector<Rule> initiations;
  std::vector<Rule> terminations;
  // Automatic termination this many seconds after the last initiation.
  std::optional<Duration> deadline;

  friend bool operator==(const FluentDefinition&, const FluentDefinition&) = default;
};

using Strata = std::vector<std::vector<std::string>>;

struct PatternSet {
  std::vector<FluentDefinition> fluents;  // declaration order
  Strata strata;
  ThresholdRegistry thresholds;

  const FluentDefinition* find(std::string_view name) const;

  friend bool operator==(const PatternSet&, const PatternSet&) = default;
};

struct InputEventSpec {
  std::string_view name;
  std::size_t arity;
};

// moving(V,S), stopped(V), abruptAcceleration(V), abruptDeceleration(V),
// abruptCornering(V), fuelLevel(V,L), iceOnRoad(V), closeToGas(V)
const std::vector<InputEventSpec>& inputEventCatalog();
std::optional<std::size_t> inputEventArity(std::string_view eventType);

// highSpeed, dangerousDriving and reFuelOpportunity with an empty threshold registry.
PatternSet builtinFleetPatterns();

// Line-oriented pattern grammar:
//   fluent <name> [deadline <seconds>]
//   init when <event>(<vars>) [and <event>(<vars>)]... [if holds <fluent>]... [if <var> <op> threshold(<param>)[*k][/k]]...
//   term when ...
// Throws ParseError (syntax) or PatternError (unknown event, undefined fluent, cycle).
PatternSet parsePatternFile(std::string_view text);

// Canonical text that parsePatternFile reads back to an equal PatternSet
// (threshold registry excluded).
std::string serializePatterns(const PatternSet& patterns);

// Topological strata over guard and start/end references. Within a stratum
// fluents keep declaration order. Throws PatternError naming the cycle members.
Strata dependencyOrder(const std::vector<FluentDefinition>& fluents);

}  // namespace fleetcer
