#include "recognizer.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cstdio>
#include <iterator>

#include "error.hpp"

namespace fleetcer {

void WindowConfig::validate() const {
  if (slideStep <= 0) throw ContractViolation("slide step must be positive");
  if (windowSize < slideStep) throw ContractViolation("window size must be at least the slide step");
}

std::string resultCsvRows(const RecognitionResult& r) {
  std::string out;
  const auto q = std::to_string(r.queryTime);
  for (const auto& [fv, list] : r.intervals) {
    for (const auto& iv : list) {
      out += fv.fluent;
      out += ',';
      out += fv.vehicle;
      out += ',';
      out += std::to_string(iv.openStart);
      out += ',';
      out += formatEnd(iv);
      out += ',';
      out += q;
      out += '\n';
    }
  }
  return out;
}

std::string metricsCsvRow(const RecognitionResult& r) {
  char buf[128];
  std::snprintf(buf, sizeof buf, "%lld,%.6f,%zu,%zu", static_cast<long long>(r.queryTime),
                r.recognitionTimeMs, r.eventsConsumed, r.dropped);
  return buf;
}

namespace {

constexpr std::size_t kMaxArgs = 2;

struct CompiledComparison {
  std::size_t argIndex = 0;
  CompareOp op = CompareOp::Greater;
  std::size_t thresholdSlot = 0;
  double scale = 1;
};

struct CompiledAtom {
  enum class Kind { Input, Start, End, Guard };
  Kind kind = Kind::Input;
  std::size_t id = 0;  // input type index or fluent index
  std::vector<CompiledComparison> comps;
};

struct CompiledRule {
  bool initiates = true;
  std::size_t target = 0;
  // Trigger atoms first (at least one), then guards.
  std::vector<CompiledAtom> atoms;
};

struct CompiledFluent {
  std::string name;
  std::vector<std::size_t> initRules;
  std::vector<std::size_t> termRules;
  std::optional<Duration> deadline;
};

struct Plan {
  std::vector<CompiledFluent> fluents;
  std::vector<CompiledRule> rules;
  std::vector<std::size_t> order;  // fluent indices, stratum by stratum
  std::vector<std::string> thresholdParameters;
};

std::size_t fluentIndex(const PatternSet& ps, const std::string& name) {
  for (std::size_t i = 0; i < ps.fluents.size(); ++i)
    if (ps.fluents[i].name == name) return i;
  throw PatternError("undefined fluent '" + name + "'");
}

std::size_t inputTypeIndex(std::string_view name) {
  const auto& cat = inputEventCatalog();
  for (std::size_t i = 0; i < cat.size(); ++i)
    if (cat[i].name == name) return i;
  return cat.size();
}

Plan compile(const PatternSet& ps) {
  Plan plan;
  auto slotFor = [&](const std::string& param) {
    auto it = std::find(plan.thresholdParameters.begin(), plan.thresholdParameters.end(), param);
    if (it != plan.thresholdParameters.end()) return static_cast<std::size_t>(it - plan.thresholdParameters.begin());
    plan.thresholdParameters.push_back(param);
    return plan.thresholdParameters.size() - 1;
  };

  for (std::size_t f = 0; f < ps.fluents.size(); ++f) {
    const auto& def = ps.fluents[f];
    CompiledFluent cf{def.name, {}, {}, def.deadline};
    auto add = [&](const Rule& r) {
      if (r.triggers.empty()) throw PatternError("rule for '" + def.name + "' has no trigger");
      CompiledRule cr;
      cr.initiates = r.kind == RuleKind::Initiates;
      cr.target = f;
      for (const auto& t : r.triggers) {
        CompiledAtom a;
        switch (t.kind) {
          case TriggerAtom::Kind::Input:
            a.kind = CompiledAtom::Kind::Input;
            a.id = inputTypeIndex(t.name);
            if (a.id == inputEventCatalog().size()) throw PatternError("unknown event type '" + t.name + "'");
            break;
          case TriggerAtom::Kind::Start:
            a.kind = CompiledAtom::Kind::Start;
            a.id = fluentIndex(ps, t.name);
            break;
          case TriggerAtom::Kind::End:
            a.kind = CompiledAtom::Kind::End;
            a.id = fluentIndex(ps, t.name);
            break;
        }
        cr.atoms.push_back(std::move(a));
      }
      for (const auto& c : r.comparisons) {
        bool bound = false;
        for (std::size_t ti = 0; ti < r.triggers.size() && !bound; ++ti) {
          const auto& names = r.triggers[ti].argNames;
          auto it = std::find(names.begin(), names.end(), c.variable);
          if (it == names.end()) continue;
          auto argIndex = static_cast<std::size_t>(it - names.begin());
          if (argIndex >= kMaxArgs) throw PatternError("too many event arguments");
          cr.atoms[ti].comps.push_back({argIndex, c.op, slotFor(c.parameter), c.scale()});
          bound = true;
        }
        if (!bound) throw PatternError("variable '" + c.variable + "' is not bound by a trigger");
      }
      for (const auto& g : r.guards) cr.atoms.push_back({CompiledAtom::Kind::Guard, fluentIndex(ps, g), {}});
      (cr.initiates ? cf.initRules : cf.termRules).push_back(plan.rules.size());
      plan.rules.push_back(std::move(cr));
    };
    for (const auto& r : def.initiations) add(r);
    for (const auto& r : def.terminations) add(r);
    plan.fluents.push_back(std::move(cf));
  }

  const auto strata = ps.strata.empty() ? dependencyOrder(ps.fluents) : ps.strata;
  for (const auto& stratum : strata)
    for (const auto& name : stratum) plan.order.push_back(fluentIndex(ps, name));
  return plan;
}

struct StoredEvent {
  TimePoint occ = 0;
  TimePoint arrival = 0;
  std::array<double, kMaxArgs> args{};
};

bool occLess(const StoredEvent& e, TimePoint t) { return e.occ < t; }
bool occGreater(TimePoint t, const StoredEvent& e) { return t < e.occ; }

struct FluentState {
  IntervalList current;
  IntervalList previous;
  std::vector<TimePoint> starts, ends;
  std::vector<TimePoint> prevStarts, prevEnds;
  bool intervalsChanged = false;
  bool startsChanged = false;
  bool endsChanged = false;
};

struct VehicleState {
  std::string id;
  std::vector<std::vector<StoredEvent>> events;   // per input type, sorted by occurrence
  std::vector<std::vector<StoredEvent>> pending;  // arrived since the last query
  std::size_t pendingCount = 0;
  std::vector<std::vector<TimePoint>> rulePoints;  // derivations at the last query
  std::vector<FluentState> fluents;
  std::vector<double> thresholds;
  bool thresholdsResolved = false;
};

void sortUnique(std::vector<TimePoint>& v) {
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
}

// Sorted set difference a \ b restricted to (lo, hi].
std::vector<TimePoint> pointsGained(const std::vector<TimePoint>& a, const std::vector<TimePoint>& b,
                                    TimePoint lo, TimePoint hi) {
  std::vector<TimePoint> out;
  std::set_difference(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  std::erase_if(out, [&](TimePoint t) { return t <= lo || t > hi; });
  return out;
}

bool contains(const std::vector<TimePoint>& sorted, TimePoint t) {
  return std::binary_search(sorted.begin(), sorted.end(), t);
}

// Terminations `deadline` seconds after each initiation that is followed by
// neither a natural termination nor a re-initiation within the deadline.
void addDeadlineTerminations(const std::vector<TimePoint>& inits, std::vector<TimePoint>& terms,
                             Duration deadline, TimePoint q) {
  std::vector<TimePoint> extra;
  for (std::size_t i = 0; i < inits.size(); ++i) {
    const TimePoint due = inits[i] + deadline;
    if (due > q) continue;
    if (i + 1 < inits.size() && inits[i + 1] <= due) continue;
    auto next = std::upper_bound(terms.begin(), terms.end(), inits[i]);
    if (next != terms.end() && *next <= due) continue;
    extra.push_back(due);
  }
  if (extra.empty()) return;
  terms.insert(terms.end(), extra.begin(), extra.end());
  sortUnique(terms);
}

enum class View { Old, New };

}  // namespace

struct Engine::Impl {
  std::shared_ptr<const PatternSet> patterns;
  WindowConfig config;
  Plan plan;
  std::map<std::string, VehicleState, std::less<>> vehicles;
  std::optional<TimePoint> lastQuery;
  TimePoint maxArrival = 0;
  std::size_t dropped = 0;
  std::size_t buffered = 0;

  // Per-evaluation context.
  TimePoint windowStart = 0;
  TimePoint query = 0;
  std::size_t derivations = 0;

  Impl(std::shared_ptr<const PatternSet> p, WindowConfig c)
      : patterns(std::move(p)), config(std::move(c)), plan(compile(*patterns)) {
    config.validate();
  }

  VehicleState& vehicle(const std::string& id) {
    auto it = vehicles.find(id);
    if (it != vehicles.end()) return it->second;
    VehicleState v;
    v.id = id;
    v.events.resize(inputEventCatalog().size());
    v.pending.resize(inputEventCatalog().size());
    v.rulePoints.resize(plan.rules.size());
    v.fluents.resize(plan.fluents.size());
    return vehicles.emplace(id, std::move(v)).first->second;
  }

  bool ingest(const EventInstance& e) {
    const auto type = inputTypeIndex(e.eventType);
    if (type == inputEventCatalog().size()) throw ContractViolation("unknown event type '" + e.eventType + "'");
    if (e.args.size() != inputEventCatalog()[type].arity)
      throw ContractViolation("wrong argument count for '" + e.eventType + "'");
    if (e.arrivalTime < e.occurrenceTime) throw ContractViolation("event arrives before it occurs");
    if (lastQuery && e.occurrenceTime <= *lastQuery - config.windowSize) {
      ++dropped;
      return false;
    }
    StoredEvent se;
    se.occ = e.occurrenceTime;
    // An event handed over after the query covering its arrival was already
    // evaluated becomes visible at the next query.
    se.arrival = lastQuery ? std::max(e.arrivalTime, *lastQuery + 1) : e.arrivalTime;
    std::copy(e.args.begin(), e.args.end(), se.args.begin());
    maxArrival = std::max(maxArrival, se.arrival);

    auto& v = vehicle(e.vehicle);
    auto& list = v.events[type];
    list.insert(std::upper_bound(list.begin(), list.end(), se.occ, occGreater), se);
    v.pending[type].push_back(se);
    ++v.pendingCount;
    ++buffered;
    return true;
  }

  void beginQuery(TimePoint q) {
    if (lastQuery && q != *lastQuery + config.slideStep)
      throw ContractViolation("query time must advance by exactly one slide step");
    if (maxArrival > q) throw ContractViolation("buffered events arrive after the query time");
    query = q;
    windowStart = q - config.windowSize;
    derivations = 0;
    buffered = 0;
    for (auto& [id, v] : vehicles) {
      for (auto& list : v.events) {
        auto cut = std::upper_bound(list.begin(), list.end(), windowStart, occGreater);
        list.erase(list.begin(), cut);
        buffered += list.size();
      }
    }
  }

  void resolveThresholds(VehicleState& v) {
    if (v.thresholdsResolved) return;
    v.thresholds.clear();
    for (const auto& p : plan.thresholdParameters) v.thresholds.push_back(patterns->thresholds.lookup(v.id, p));
    v.thresholdsResolved = true;
  }

  static bool satisfies(const VehicleState& v, const CompiledAtom& a, const StoredEvent& e) {
    for (const auto& c : a.comps)
      if (!compare(e.args[c.argIndex], c.op, v.thresholds[c.thresholdSlot] * c.scale)) return false;
    return true;
  }

  bool atomHolds(const VehicleState& v, const CompiledAtom& a, TimePoint t, View view) const {
    switch (a.kind) {
      case CompiledAtom::Kind::Input: {
        const TimePoint visible = view == View::New ? query : lastQuery.value_or(windowStart);
        const auto& list = v.events[a.id];
        auto lo = std::lower_bound(list.begin(), list.end(), t, occLess);
        for (auto it = lo; it != list.end() && it->occ == t; ++it)
          if (it->arrival <= visible && satisfies(v, a, *it)) return true;
        return false;
      }
      case CompiledAtom::Kind::Start: {
        const auto& f = v.fluents[a.id];
        return contains(f.starts, t) && (view == View::New || contains(f.prevStarts, t));
      }
      case CompiledAtom::Kind::End: {
        const auto& f = v.fluents[a.id];
        return contains(f.ends, t) && (view == View::New || contains(f.prevEnds, t));
      }
      case CompiledAtom::Kind::Guard: {
        const auto& f = v.fluents[a.id];
        return holdsAt(f.current, t) && (view == View::New || holdsAt(f.previous, t));
      }
    }
    return false;
  }

  // Points of a trigger atom's current set within (lo, hi], ascending.
  void enumerateTrigger(const VehicleState& v, const CompiledAtom& a, TimePoint lo, TimePoint hi,
                        std::vector<TimePoint>& out) const {
    if (hi <= lo) return;
    switch (a.kind) {
      case CompiledAtom::Kind::Input: {
        const auto& list = v.events[a.id];
        auto it = std::upper_bound(list.begin(), list.end(), lo, occGreater);
        for (; it != list.end() && it->occ <= hi; ++it)
          if (it->arrival <= query && satisfies(v, a, *it) && (out.empty() || out.back() != it->occ))
            out.push_back(it->occ);
        return;
      }
      case CompiledAtom::Kind::Start:
      case CompiledAtom::Kind::End: {
        const auto& pts = a.kind == CompiledAtom::Kind::Start ? v.fluents[a.id].starts : v.fluents[a.id].ends;
        auto it = std::upper_bound(pts.begin(), pts.end(), lo);
        for (; it != pts.end() && *it <= hi; ++it) out.push_back(*it);
        return;
      }
      case CompiledAtom::Kind::Guard: break;
    }
  }

  std::vector<TimePoint> evaluateRuleFull(const VehicleState& v, const CompiledRule& r) const {
    std::vector<TimePoint> candidates, out;
    enumerateTrigger(v, r.atoms.front(), windowStart, query, candidates);
    for (TimePoint t : candidates) {
      bool ok = true;
      for (std::size_t j = 1; j < r.atoms.size() && ok; ++j) ok = atomHolds(v, r.atoms[j], t, View::New);
      if (ok) out.push_back(t);
    }
    return out;
  }

  // Whether atom `a` may have lost points since the last query.
  bool mayShrink(const VehicleState& v, const CompiledAtom& a) const {
    switch (a.kind) {
      case CompiledAtom::Kind::Input: return false;  // only by expiry
      case CompiledAtom::Kind::Start: return v.fluents[a.id].startsChanged;
      case CompiledAtom::Kind::End: return v.fluents[a.id].endsChanged;
      case CompiledAtom::Kind::Guard: return v.fluents[a.id].intervalsChanged;
    }
    return false;
  }

  // Candidate points for the delta of atom k.
  std::vector<TimePoint> deltaCandidates(const VehicleState& v, const CompiledRule& r, std::size_t k) const {
    const auto& a = r.atoms[k];
    std::vector<TimePoint> out;
    switch (a.kind) {
      case CompiledAtom::Kind::Input:
        for (const auto& e : v.pending[a.id])
          if (e.occ > windowStart && e.occ <= query && satisfies(v, a, e)) out.push_back(e.occ);
        sortUnique(out);
        break;
      case CompiledAtom::Kind::Start:
        out = pointsGained(v.fluents[a.id].starts, v.fluents[a.id].prevStarts, windowStart, query);
        break;
      case CompiledAtom::Kind::End:
        out = pointsGained(v.fluents[a.id].ends, v.fluents[a.id].prevEnds, windowStart, query);
        break;
      case CompiledAtom::Kind::Guard: {
        const auto& f = v.fluents[a.id];
        if (!f.intervalsChanged) break;
        for (const auto& iv : intervalDifference(f.current, f.previous)) {
          const TimePoint lo = std::max(iv.openStart, windowStart);
          const TimePoint hi = iv.end ? std::min(*iv.end, query) : query;
          enumerateTrigger(v, r.atoms.front(), lo, hi, out);
        }
        break;
      }
    }
    return out;
  }

  std::vector<TimePoint> evaluateRuleDelta(const VehicleState& v, std::size_t ruleIndex) {
    const auto& r = plan.rules[ruleIndex];
    const auto& before = v.rulePoints[ruleIndex];
    std::vector<TimePoint> out;
    out.reserve(before.size());

    // Retained derivations: still inside the window and still supported.
    std::vector<const CompiledAtom*> shrinking;
    for (const auto& a : r.atoms)
      if (mayShrink(v, a)) shrinking.push_back(&a);
    const auto live = std::upper_bound(before.begin(), before.end(), windowStart);
    if (shrinking.empty()) {
      out.assign(live, before.end());
    } else {
      for (auto it = live; it != before.end(); ++it) {
        bool ok = true;
        for (const auto* a : shrinking)
          if (!(ok = atomHolds(v, *a, *it, View::New))) break;
        if (ok) out.push_back(*it);
      }
    }

    // One delta rule per body atom: atoms before k over the old sets, atom k
    // over its delta, atoms after k over the current sets.
    const std::size_t kept = out.size();
    for (std::size_t k = 0; k < r.atoms.size(); ++k) {
      for (TimePoint t : deltaCandidates(v, r, k)) {
        if (atomHolds(v, r.atoms[k], t, View::Old)) continue;
        bool ok = true;
        for (std::size_t j = 0; j < r.atoms.size() && ok; ++j)
          if (j != k) ok = atomHolds(v, r.atoms[j], t, j < k ? View::Old : View::New);
        if (ok) out.push_back(t);
      }
    }
    derivations += out.size() - kept;
    if (out.size() != kept) {
      const auto mid = out.begin() + static_cast<std::ptrdiff_t>(kept);
      std::sort(mid, out.end());
      std::inplace_merge(out.begin(), mid, out.end());
      out.erase(std::unique(out.begin(), out.end()), out.end());
    }
    return out;
  }

  void finalizeFluent(VehicleState& v, std::size_t f) {
    const auto& cf = plan.fluents[f];
    auto gather = [&](const std::vector<std::size_t>& rules) {
      // each rule's points are sorted already
      std::vector<TimePoint> pts;
      for (auto r : rules) {
        const auto mid = static_cast<std::ptrdiff_t>(pts.size());
        pts.insert(pts.end(), v.rulePoints[r].begin(), v.rulePoints[r].end());
        std::inplace_merge(pts.begin(), pts.begin() + mid, pts.end());
      }
      pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
      return pts;
    };
    auto inits = gather(cf.initRules);
    auto terms = gather(cf.termRules);
    if (cf.deadline) addDeadlineTerminations(inits, terms, *cf.deadline, query);

    auto& st = v.fluents[f];
    st.previous = std::move(st.current);
    st.current = makeIntervals(inits, terms);
    st.intervalsChanged = st.current != st.previous;
    st.prevStarts = std::move(st.starts);
    st.prevEnds = std::move(st.ends);
    st.starts.clear();
    st.ends.clear();
    for (const auto& iv : st.current) {
      st.starts.push_back(iv.openStart);
      if (iv.end) st.ends.push_back(*iv.end);
    }
    st.startsChanged = st.starts != st.prevStarts;
    st.endsChanged = st.ends != st.prevEnds;
  }

  static bool idle(const VehicleState& v) {
    if (v.pendingCount) return false;
    for (const auto& p : v.rulePoints)
      if (!p.empty()) return false;
    for (const auto& f : v.fluents)
      if (!f.current.empty() || !f.previous.empty()) return false;
    return true;
  }

  void evaluateVehicle(VehicleState& v, bool incremental) {
    resolveThresholds(v);
    for (auto f : plan.order) {
      const auto& cf = plan.fluents[f];
      for (const auto* rules : {&cf.initRules, &cf.termRules}) {
        for (auto r : *rules) {
          if (incremental) {
            v.rulePoints[r] = evaluateRuleDelta(v, r);
          } else {
            v.rulePoints[r] = evaluateRuleFull(v, plan.rules[r]);
            derivations += v.rulePoints[r].size();
          }
        }
      }
      finalizeFluent(v, f);
    }
  }

  RecognitionResult run(TimePoint q, bool incremental) {
    const auto t0 = std::chrono::steady_clock::now();
    // Incremental evaluation needs the previous query's state.
    const bool delta = incremental && lastQuery.has_value();
    beginQuery(q);

    RecognitionResult result;
    result.queryTime = q;
    for (auto& [id, v] : vehicles) {
      if (delta && idle(v)) continue;
      evaluateVehicle(v, delta);
      for (auto& p : v.pending) p.clear();
      v.pendingCount = 0;
      for (std::size_t f = 0; f < plan.fluents.size(); ++f) {
        const auto& cur = v.fluents[f].current;
        if (cur.empty()) continue;
        result.intervals.emplace(FluentValue{plan.fluents[f].name, id, "true"}, cur);
      }
    }
    lastQuery = q;
    result.eventsConsumed = buffered;
    result.dropped = dropped;
    result.newDerivations = derivations;
    result.recognitionTimeMs =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    return result;
  }
};

Engine::Engine(std::shared_ptr<const PatternSet> patterns, WindowConfig config)
    : impl_(std::make_unique<Impl>(std::move(patterns), std::move(config))) {}
Engine::~Engine() = default;
Engine::Engine(Engine&&) noexcept = default;
Engine& Engine::operator=(Engine&&) noexcept = default;

bool Engine::ingest(const EventInstance& e) { return impl_->ingest(e); }
RecognitionResult Engine::evaluateQuery(TimePoint q) { return impl_->run(q, false); }
RecognitionResult Engine::evaluateQueryIncremental(TimePoint q) { return impl_->run(q, true); }
std::optional<TimePoint> Engine::lastQueryTime() const { return impl_->lastQuery; }
std::size_t Engine::droppedEvents() const { return impl_->dropped; }
std::size_t Engine::bufferedEvents() const { return impl_->buffered; }
const WindowConfig& Engine::config() const { return impl_->config; }

std::vector<TimePoint> queryTimesFor(const WindowConfig& config, TimePoint firstArrival, TimePoint lastArrival) {
  config.validate();
  const Duration slide = config.slideStep;
  TimePoint q = config.firstQueryTime.value_or((firstArrival + slide - 1) / slide * slide);
  std::vector<TimePoint> out{q};
  while (q < lastArrival) out.push_back(q += slide);
  return out;
}

std::vector<RecognitionResult> recognizeStream(std::shared_ptr<const PatternSet> patterns,
                                               const WindowConfig& config, EvaluationMode mode,
                                               std::span<const EventInstance> stream,
                                               std::optional<TimePoint> lastQuery) {
  config.validate();
  std::vector<RecognitionResult> results;
  if (stream.empty() && !config.firstQueryTime) return results;

  Engine engine(std::move(patterns), config);
  const Duration slide = config.slideStep;
  TimePoint q = config.firstQueryTime ? *config.firstQueryTime
                                      : (stream.front().arrivalTime + slide - 1) / slide * slide;
  for (const auto& e : stream) {
    while (e.arrivalTime > q) {
      results.push_back(engine.evaluate(q, mode));
      q += slide;
    }
    engine.ingest(e);
  }
  const TimePoint last = lastQuery.value_or(q);
  while (q <= last) {
    results.push_back(engine.evaluate(q, mode));
    q += slide;
  }
  return results;
}

}  // namespace fleetcer
