#include "patterns.hpp"

#include <algorithm>
#include <cctype>
#include <functional>
#include <set>
#include <sstream>
#include <utility>

#include "csv.hpp"
#include "error.hpp"

namespace fleetcer {

void ThresholdRegistry::set(const std::string& vehicle, const std::string& parameter, double value) {
  if (!(value > 0)) throw ContractViolation("threshold " + parameter + " for " + vehicle + " must be > 0");
  entries_[{vehicle, parameter}] = value;
}

double ThresholdRegistry::lookup(std::string_view vehicle, std::string_view parameter) const {
  if (auto it = entries_.find(std::pair{std::string(vehicle), std::string(parameter)}); it != entries_.end()) return it->second;
  if (auto it = entries_.find(std::pair{std::string(kAnyVehicle), std::string(parameter)}); it != entries_.end())
    return it->second;
  throw Error("no threshold '" + std::string(parameter) + "' for vehicle '" + std::string(vehicle) +
              "' and no default row");
}

ThresholdRegistry parseThresholds(std::string_view text) {
  ThresholdRegistry reg;
  std::istringstream in{std::string(text)};
  std::string line;
  int lineNo = 0;
  bool firstRow = true;
  while (readLine(in, line)) {
    ++lineNo;
    auto body = trim(std::string_view(line).substr(0, line.find('#')));
    if (body.empty()) continue;
    const bool headerCandidate = std::exchange(firstRow, false);
    std::vector<std::string> fields;
    if (body.starts_with("threshold ") || body.starts_with("threshold\t")) {
      std::istringstream ws{std::string(body)};
      std::string tok;
      ws >> tok;
      while (ws >> tok) fields.push_back(tok);
    } else {
      for (auto& f : splitCsvLine(body)) fields.emplace_back(trim(f));
    }
    if (fields.size() != 3) throw ParseError("threshold row needs vehicle, parameter and value", lineNo);
    auto value = parseDouble(fields[2]);
    if (!value) {
      if (headerCandidate) continue;
      throw ParseError("threshold value '" + fields[2] + "' is not a number", lineNo);
    }
    if (!(*value > 0)) throw ParseError("threshold value must be > 0", lineNo);
    reg.set(fields[0], fields[1], *value);
  }
  return reg;
}

std::string_view toString(CompareOp op) {
  switch (op) {
    case CompareOp::Less: return "<";
    case CompareOp::LessEqual: return "<=";
    case CompareOp::Greater: return ">";
    case CompareOp::GreaterEqual: return ">=";
  }
  return "?";
}

bool compare(double lhs, CompareOp op, double rhs) {
  switch (op) {
    case CompareOp::Less: return lhs < rhs;
    case CompareOp::LessEqual: return lhs <= rhs;
    case CompareOp::Greater: return lhs > rhs;
    case CompareOp::GreaterEqual: return lhs >= rhs;
  }
  return false;
}

const FluentDefinition* PatternSet::find(std::string_view name) const {
  auto it = std::find_if(fluents.begin(), fluents.end(), [&](const auto& f) { return f.name == name; });
  return it == fluents.end() ? nullptr : &*it;
}

const std::vector<InputEventSpec>& inputEventCatalog() {
  static const std::vector<InputEventSpec> catalog = {
      {"moving", 1},          {"stopped", 0},         {"abruptAcceleration", 0},
      {"abruptDeceleration", 0}, {"abruptCornering", 0}, {"fuelLevel", 1},
      {"iceOnRoad", 0},       {"closeToGas", 0},
  };
  return catalog;
}

std::optional<std::size_t> inputEventArity(std::string_view eventType) {
  for (const auto& spec : inputEventCatalog())
    if (spec.name == eventType) return spec.arity;
  return std::nullopt;
}

namespace {

TriggerAtom input(std::string name, std::vector<std::string> args = {}) {
  return {TriggerAtom::Kind::Input, std::move(name), std::move(args)};
}

Rule rule(RuleKind kind, std::string target, std::vector<TriggerAtom> triggers,
          std::vector<std::string> guards = {}, std::vector<Comparison> comps = {}) {
  return {kind, std::move(target), std::move(triggers), std::move(guards), std::move(comps)};
}

}  // namespace

PatternSet builtinFleetPatterns() {
  using enum RuleKind;
  PatternSet ps;

  FluentDefinition highSpeed{"highSpeed", {}, {}, std::nullopt};
  highSpeed.initiations.push_back(rule(Initiates, "highSpeed", {input("moving", {"S"})}, {},
                                       {{"S", CompareOp::Greater, "speed", 1, 1}}));
  highSpeed.terminations.push_back(rule(Terminates, "highSpeed", {input("moving", {"S"})}, {},
                                        {{"S", CompareOp::LessEqual, "speed", 1, 1}}));
  highSpeed.terminations.push_back(rule(Terminates, "highSpeed", {input("stopped")}));

  FluentDefinition dangerous{"dangerousDriving", {}, {}, std::nullopt};
  for (const char* ev : {"abruptAcceleration", "abruptDeceleration", "abruptCornering", "iceOnRoad"})
    dangerous.initiations.push_back(rule(Initiates, "dangerousDriving", {input(ev)}, {"highSpeed"}));
  dangerous.terminations.push_back(
      rule(Terminates, "dangerousDriving", {{TriggerAtom::Kind::End, "highSpeed", {}}}));
  dangerous.terminations.push_back(rule(Terminates, "dangerousDriving", {input("stopped")}));

  FluentDefinition refuel{"reFuelOpportunity", {}, {}, std::nullopt};
  refuel.initiations.push_back(rule(Initiates, "reFuelOpportunity",
                                    {input("closeToGas"), input("fuelLevel", {"L"})}, {"highSpeed"},
                                    {{"L", CompareOp::Less, "fuel", 1, 2}}));
  refuel.terminations.push_back(rule(Terminates, "reFuelOpportunity", {input("fuelLevel", {"L"})}, {},
                                     {{"L", CompareOp::GreaterEqual, "fuel", 1, 2}}));

  ps.fluents = {std::move(highSpeed), std::move(dangerous), std::move(refuel)};
  ps.strata = dependencyOrder(ps.fluents);
  return ps;
}

namespace {

std::vector<std::string> dependenciesOf(const FluentDefinition& f) {
  std::vector<std::string> deps;
  auto collect = [&](const std::vector<Rule>& rules) {
    for (const auto& r : rules) {
      for (const auto& g : r.guards) deps.push_back(g);
      for (const auto& t : r.triggers)
        if (t.kind != TriggerAtom::Kind::Input) deps.push_back(t.name);
    }
  };
  collect(f.initiations);
  collect(f.terminations);
  std::sort(deps.begin(), deps.end());
  deps.erase(std::unique(deps.begin(), deps.end()), deps.end());
  return deps;
}

}  // namespace

Strata dependencyOrder(const std::vector<FluentDefinition>& fluents) {
  std::map<std::string, std::size_t, std::less<>> index;
  for (std::size_t i = 0; i < fluents.size(); ++i) index.emplace(fluents[i].name, i);

  std::vector<std::vector<std::size_t>> deps(fluents.size());
  for (std::size_t i = 0; i < fluents.size(); ++i) {
    for (const auto& d : dependenciesOf(fluents[i])) {
      auto it = index.find(d);
      if (it == index.end())
        throw PatternError("fluent '" + fluents[i].name + "' refers to undefined fluent '" + d + "'");
      deps[i].push_back(it->second);
    }
  }

  enum class Mark { None, Active, Done };
  std::vector<Mark> mark(fluents.size(), Mark::None);
  std::vector<int> level(fluents.size(), 0);
  std::vector<std::size_t> stack;

  std::function<void(std::size_t)> visit = [&](std::size_t i) {
    mark[i] = Mark::Active;
    stack.push_back(i);
    int lv = 0;
    for (auto d : deps[i]) {
      if (mark[d] == Mark::Active) {
        auto from = std::find(stack.begin(), stack.end(), d);
        std::string names;
        for (auto it = from; it != stack.end(); ++it) names += (names.empty() ? "" : " -> ") + fluents[*it].name;
        throw PatternError("cyclic dependency: " + names + " -> " + fluents[d].name);
      }
      if (mark[d] == Mark::None) visit(d);
      lv = std::max(lv, level[d] + 1);
    }
    level[i] = lv;
    stack.pop_back();
    mark[i] = Mark::Done;
  };
  for (std::size_t i = 0; i < fluents.size(); ++i)
    if (mark[i] == Mark::None) visit(i);

  Strata strata;
  for (std::size_t i = 0; i < fluents.size(); ++i) {
    if (static_cast<std::size_t>(level[i]) >= strata.size()) strata.resize(level[i] + 1);
    strata[level[i]].push_back(fluents[i].name);
  }
  return strata;
}

// ---------------------------------------------------------------------------
// Pattern file parser

namespace {

struct Token {
  enum class Kind { Ident, Number, Punct, End };
  Kind kind = Kind::End;
  std::string text;
};

std::vector<Token> tokenize(std::string_view line, int lineNo) {
  std::vector<Token> out;
  std::size_t i = 0;
  while (i < line.size()) {
    const char c = line[i];
    if (std::isspace(static_cast<unsigned char>(c))) {
      ++i;
    } else if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::size_t j = i;
      while (j < line.size() && (std::isalnum(static_cast<unsigned char>(line[j])) || line[j] == '_')) ++j;
      out.push_back({Token::Kind::Ident, std::string(line.substr(i, j - i))});
      i = j;
    } else if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
      std::size_t j = i;
      while (j < line.size() && (std::isdigit(static_cast<unsigned char>(line[j])) || line[j] == '.')) ++j;
      out.push_back({Token::Kind::Number, std::string(line.substr(i, j - i))});
      i = j;
    } else if ((c == '<' || c == '>') && i + 1 < line.size() && line[i + 1] == '=') {
      out.push_back({Token::Kind::Punct, std::string(line.substr(i, 2))});
      i += 2;
    } else if (std::string_view("(),<>/*=").find(c) != std::string_view::npos) {
      out.push_back({Token::Kind::Punct, std::string(1, c)});
      ++i;
    } else {
      throw ParseError(std::string("unexpected character '") + c + "'", lineNo);
    }
  }
  out.push_back({Token::Kind::End, ""});
  return out;
}

class LineParser {
 public:
  LineParser(std::vector<Token> tokens, int lineNo) : toks_(std::move(tokens)), line_(lineNo) {}

  const Token& peek() const { return toks_[pos_]; }
  bool atEnd() const { return peek().kind == Token::Kind::End; }

  bool acceptWord(std::string_view w) {
    if (peek().kind == Token::Kind::Ident && peek().text == w) {
      ++pos_;
      return true;
    }
    return false;
  }
  bool acceptPunct(std::string_view p) {
    if (peek().kind == Token::Kind::Punct && peek().text == p) {
      ++pos_;
      return true;
    }
    return false;
  }
  void expectWord(std::string_view w) {
    if (!acceptWord(w)) fail("expected '" + std::string(w) + "'");
  }
  void expectPunct(std::string_view p) {
    if (!acceptPunct(p)) fail("expected '" + std::string(p) + "'");
  }
  std::string ident(std::string_view what) {
    if (peek().kind != Token::Kind::Ident) fail("expected " + std::string(what));
    return toks_[pos_++].text;
  }
  std::int64_t positiveInteger(std::string_view what) {
    if (peek().kind != Token::Kind::Number) fail("expected " + std::string(what));
    auto v = parseInt(toks_[pos_].text);
    if (!v || *v <= 0) fail(std::string(what) + " must be a positive integer");
    ++pos_;
    return *v;
  }
  // Accepts an optional `=true` suffix after a fluent name.
  void booleanValue() {
    if (acceptPunct("=")) {
      auto v = ident("fluent value");
      if (v != "true") fail("only boolean fluents (=true) are supported");
    }
  }
  [[noreturn]] void fail(const std::string& msg) const {
    const auto& t = peek();
    throw ParseError(msg + (t.kind == Token::Kind::End ? " at end of line" : " near '" + t.text + "'"), line_);
  }

 private:
  std::vector<Token> toks_;
  std::size_t pos_ = 0;
  int line_;
};

std::optional<CompareOp> compareOp(const Token& t) {
  if (t.kind != Token::Kind::Punct) return std::nullopt;
  if (t.text == "<") return CompareOp::Less;
  if (t.text == "<=") return CompareOp::LessEqual;
  if (t.text == ">") return CompareOp::Greater;
  if (t.text == ">=") return CompareOp::GreaterEqual;
  return std::nullopt;
}

struct Reference {
  std::string fluent;
  int line;
};

Rule parseRule(LineParser& p, RuleKind kind, const std::string& target, int lineNo,
               std::vector<Reference>& refs) {
  Rule r;
  r.kind = kind;
  r.target = target;
  p.expectWord("when");
  std::set<std::string> vars;
  do {
    TriggerAtom atom;
    atom.name = p.ident("event name");
    p.expectPunct("(");
    if (atom.name == "start" || atom.name == "end") {
      atom.kind = atom.name == "start" ? TriggerAtom::Kind::Start : TriggerAtom::Kind::End;
      atom.name = p.ident("fluent name");
      p.booleanValue();
      refs.push_back({atom.name, lineNo});
      p.expectPunct(")");
    } else {
      if (!p.acceptPunct(")")) {
        do {
          auto v = p.ident("argument variable");
          if (!vars.insert(v).second) p.fail("variable '" + v + "' bound twice");
          atom.argNames.push_back(v);
        } while (p.acceptPunct(","));
        p.expectPunct(")");
      }
      auto arity = inputEventArity(atom.name);
      if (!arity) throw PatternError("unknown event type '" + atom.name + "'", lineNo);
      if (*arity != atom.argNames.size())
        throw PatternError("event '" + atom.name + "' takes " + std::to_string(*arity) + " argument(s)", lineNo);
    }
    r.triggers.push_back(std::move(atom));
  } while (p.acceptWord("and"));

  while (p.acceptWord("if")) {
    if (p.acceptWord("holds")) {
      auto f = p.ident("fluent name");
      p.booleanValue();
      refs.push_back({f, lineNo});
      r.guards.push_back(std::move(f));
      continue;
    }
    Comparison c;
    c.variable = p.ident("variable");
    if (!vars.contains(c.variable)) p.fail("variable '" + c.variable + "' is not bound by a trigger");
    auto op = compareOp(p.peek());
    if (!op) p.fail("expected comparison operator");
    c.op = *op;
    p.expectPunct(p.peek().text);
    p.expectWord("threshold");
    p.expectPunct("(");
    c.parameter = p.ident("threshold parameter");
    p.expectPunct(")");
    if (p.acceptPunct("*")) c.scaleNum = p.positiveInteger("scale factor");
    if (p.acceptPunct("/")) c.scaleDen = p.positiveInteger("scale divisor");
    r.comparisons.push_back(std::move(c));
  }
  if (!p.atEnd()) p.fail("unexpected token");
  return r;
}

}  // namespace

PatternSet parsePatternFile(std::string_view text) {
  PatternSet ps;
  std::vector<Reference> refs;
  std::istringstream in{std::string(text)};
  std::string line;
  int lineNo = 0;
  while (readLine(in, line)) {
    ++lineNo;
    auto body = trim(std::string_view(line).substr(0, line.find('#')));
    if (body.empty()) continue;
    LineParser p(tokenize(body, lineNo), lineNo);
    if (p.acceptWord("fluent")) {
      FluentDefinition f;
      f.name = p.ident("fluent name");
      if (f.name == "start" || f.name == "end" || inputEventArity(f.name))
        p.fail("'" + f.name + "' is reserved");
      if (ps.find(f.name)) throw PatternError("fluent '" + f.name + "' declared twice", lineNo);
      if (p.acceptWord("deadline")) f.deadline = p.positiveInteger("deadline seconds");
      if (!p.atEnd()) p.fail("unexpected token");
      ps.fluents.push_back(std::move(f));
    } else if (p.acceptWord("init") || p.acceptWord("term")) {
      if (ps.fluents.empty()) throw ParseError("rule before any 'fluent' declaration", lineNo);
      const bool isInit = body.starts_with("init");
      auto& f = ps.fluents.back();
      auto r = parseRule(p, isInit ? RuleKind::Initiates : RuleKind::Terminates, f.name, lineNo, refs);
      (isInit ? f.initiations : f.terminations).push_back(std::move(r));
    } else {
      p.fail("expected 'fluent', 'init' or 'term'");
    }
  }
  for (const auto& ref : refs)
    if (!ps.find(ref.fluent)) throw PatternError("undefined fluent '" + ref.fluent + "'", ref.line);
  ps.strata = dependencyOrder(ps.fluents);
  return ps;
}

namespace {

void writeRule(std::ostream& os, const Rule& r) {
  os << "  " << (r.kind == RuleKind::Initiates ? "init" : "term") << " when ";
  for (std::size_t i = 0; i < r.triggers.size(); ++i) {
    const auto& t = r.triggers[i];
    if (i) os << " and ";
    switch (t.kind) {
      case TriggerAtom::Kind::Input: {
        os << t.name << "(";
        for (std::size_t a = 0; a < t.argNames.size(); ++a) os << (a ? ", " : "") << t.argNames[a];
        os << ")";
        break;
      }
      case TriggerAtom::Kind::Start: os << "start(" << t.name << "=true)"; break;
      case TriggerAtom::Kind::End: os << "end(" << t.name << "=true)"; break;
    }
  }
  for (const auto& g : r.guards) os << " if holds " << g << "=true";
  for (const auto& c : r.comparisons) {
    os << " if " << c.variable << " " << toString(c.op) << " threshold(" << c.parameter << ")";
    if (c.scaleNum != 1) os << "*" << c.scaleNum;
    if (c.scaleDen != 1) os << "/" << c.scaleDen;
  }
  os << "\n";
}

}  // namespace

std::string serializePatterns(const PatternSet& patterns) {
  std::ostringstream os;
  for (const auto& f : patterns.fluents) {
    os << "fluent " << f.name;
    if (f.deadline) os << " deadline " << *f.deadline;
    os << "\n";
    for (const auto& r : f.initiations) writeRule(os, r);
    for (const auto& r : f.terminations) writeRule(os, r);
  }
  return os.str();
}

}  // namespace fleetcer
