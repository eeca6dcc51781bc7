#pragma once

// Action semantic knowledge graph: one subgraph per action class.

#include <algorithm>
#include <cctype>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "stdd/error.hpp"

namespace stdd::askg {

enum class ConceptKind { object, sub_action, related };
enum class TripleKind { spatial, temporal };

inline std::string to_string(ConceptKind k) {
  switch (k) {
    case ConceptKind::object: return "object";
    case ConceptKind::sub_action: return "sub_action";
    case ConceptKind::related: return "related";
  }
  return "?";
}

inline std::string to_string(TripleKind k) { return k == TripleKind::spatial ? "spatial" : "temporal"; }

inline TripleKind triple_kind_from_string(const std::string& s) {
  if (s == "spatial") return TripleKind::spatial;
  if (s == "temporal") return TripleKind::temporal;
  throw ParseError("unknown triple kind '" + s + "'");
}

// Trimmed, inner whitespace collapsed, ASCII lowercase.
inline std::string normalize_name(const std::string& s) {
  std::string out;
  bool space = false;
  for (unsigned char c : s) {
    if (std::isspace(c)) {
      space = !out.empty();
      continue;
    }
    if (space) out.push_back(' ');
    space = false;
    out.push_back(static_cast<char>(std::tolower(c)));
  }
  return out;
}

// File-name form of an action: normalized, spaces replaced by underscores.
inline std::string slug(const std::string& action) {
  std::string s = normalize_name(action);
  std::replace(s.begin(), s.end(), ' ', '_');
  return s;
}

struct RelationTriple {
  std::string head;
  std::string predicate;
  std::string tail;
  TripleKind kind = TripleKind::spatial;

  std::string key() const { return "<" + head + ", " + predicate + ", " + tail + ">"; }
  friend bool operator==(const RelationTriple&, const RelationTriple&) = default;
};

inline const std::vector<std::string>& sequencing_predicates() {
  static const std::vector<std::string> p{"starts with", "begins with", "precedes", "comes before", "follows",
                                          "ends with",   "followed by", "leads to", "then"};
  return p;
}

struct ActionSubgraph {
  std::string action;
  std::vector<std::string> objects;
  std::vector<std::string> sub_actions;
  std::vector<std::string> related;  // triple endpoints not in either entity list
  std::vector<RelationTriple> triples;
  std::map<std::string, std::string> clauses;  // object name or triple key -> generated clause
  std::optional<std::size_t> requested_k;

  std::optional<ConceptKind> kind_of(const std::string& name) const {
    const std::string n = normalize_name(name);
    auto in = [&](const std::vector<std::string>& v) { return std::find(v.begin(), v.end(), n) != v.end(); };
    if (in(objects)) return ConceptKind::object;
    if (in(sub_actions)) return ConceptKind::sub_action;
    if (in(related)) return ConceptKind::related;
    return std::nullopt;
  }
  bool is_action(const std::string& name) const { return normalize_name(name) == action; }
  bool resolves(const std::string& name) const { return is_action(name) || kind_of(name).has_value(); }

  TripleKind classify(const std::string& head, const std::string& predicate, const std::string& tail) const {
    if (kind_of(head) == ConceptKind::sub_action || kind_of(tail) == ConceptKind::sub_action) return TripleKind::temporal;
    if (is_action(head)) {
      const std::string p = normalize_name(predicate);
      for (const auto& s : sequencing_predicates())
        if (p == s) return TripleKind::temporal;
    }
    return TripleKind::spatial;
  }

  std::vector<RelationTriple> triples_of(TripleKind k) const {
    std::vector<RelationTriple> out;
    for (const auto& t : triples)
      if (t.kind == k) out.push_back(t);
    return out;
  }

  friend bool operator==(const ActionSubgraph&, const ActionSubgraph&) = default;
};

struct Violation {
  std::string code;
  std::string message;
};

struct ValidationReport {
  std::vector<Violation> violations;
  bool ok() const noexcept { return violations.empty(); }
  std::size_t count(const std::string& code) const {
    return static_cast<std::size_t>(
        std::count_if(violations.begin(), violations.end(), [&](const Violation& v) { return v.code == code; }));
  }
};

inline constexpr std::size_t kMinObjects = 5;
inline constexpr std::size_t kMaxObjects = 10;

inline ValidationReport validate_graph(const ActionSubgraph& g) {
  ValidationReport r;
  auto add = [&](std::string code, std::string msg) { r.violations.push_back({std::move(code), std::move(msg)}); };
  if (g.action.empty()) add("empty_name", "action name is empty");
  if (g.requested_k && (g.objects.size() < kMinObjects || g.objects.size() > kMaxObjects))
    add("k_range", std::to_string(g.objects.size()) + " objects, expected between 5 and 10");

  std::map<std::string, int> seen;
  auto check_names = [&](const std::vector<std::string>& names, const char* what) {
    for (const auto& n : names) {
      if (normalize_name(n).empty()) add("empty_name", std::string("empty ") + what + " name");
      else if (++seen[normalize_name(n)] == 2) add("duplicate_concept", "'" + n + "' is listed more than once");
    }
  };
  check_names(g.objects, "object");
  check_names(g.sub_actions, "sub-action");
  check_names(g.related, "related concept");

  std::map<std::string, int> seen_triples;
  for (const auto& t : g.triples) {
    if (t.predicate.empty()) add("empty_name", "empty predicate in " + t.key());
    for (const auto* end : {&t.head, &t.tail})
      if (!g.resolves(*end)) add("unresolved_endpoint", "'" + *end + "' in " + t.key() + " is not a listed concept");
    if (normalize_name(t.head) == normalize_name(t.tail)) add("self_loop", t.key() + " relates a concept to itself");
    if (g.resolves(t.head) && g.resolves(t.tail) && g.classify(t.head, t.predicate, t.tail) != t.kind)
      add("kind_mismatch", t.key() + " is marked " + to_string(t.kind));
    if (++seen_triples[t.key()] == 2) add("duplicate_triple", t.key() + " appears more than once");
  }
  return r;
}

inline nlohmann::json to_json(const ValidationReport& r) {
  nlohmann::json v = nlohmann::json::array();
  for (const auto& x : r.violations) v.push_back({{"code", x.code}, {"message", x.message}});
  return {{"ok", r.ok()}, {"violations", v}};
}

inline nlohmann::json to_json(const ActionSubgraph& g) {
  nlohmann::json triples = nlohmann::json::array();
  for (const auto& t : g.triples)
    triples.push_back({{"head", t.head}, {"predicate", t.predicate}, {"tail", t.tail}, {"kind", to_string(t.kind)}});
  nlohmann::json out = {{"action", g.action},           {"objects", g.objects}, {"sub_actions", g.sub_actions},
                        {"related", g.related},         {"triples", triples},   {"clauses", g.clauses}};
  if (g.requested_k) out["requested_k"] = *g.requested_k;
  return out;
}

inline ActionSubgraph subgraph_from_json(const nlohmann::json& j) {
  try {
    ActionSubgraph g;
    g.action = j.at("action").get<std::string>();
    g.objects = j.at("objects").get<std::vector<std::string>>();
    g.sub_actions = j.at("sub_actions").get<std::vector<std::string>>();
    g.related = j.value("related", std::vector<std::string>{});
    for (const auto& t : j.at("triples"))
      g.triples.push_back({t.at("head").get<std::string>(), t.at("predicate").get<std::string>(),
                           t.at("tail").get<std::string>(), triple_kind_from_string(t.at("kind").get<std::string>())});
    g.clauses = j.value("clauses", std::map<std::string, std::string>{});
    if (j.contains("requested_k")) g.requested_k = j["requested_k"].get<std::size_t>();
    return g;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("graph JSON: ") + e.what());
  }
}

}  // namespace stdd::askg
