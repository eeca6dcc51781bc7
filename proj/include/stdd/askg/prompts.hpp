#pragma once

// Two-stage LLM prompting: graph construction, then sentence completion.
// Responses are parsed into a subgraph and into one clause per concept, and
// clauses are spliced onto the hard template "This is a video of {action}, ".

#include <regex>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "stdd/askg/graph.hpp"

namespace stdd::askg {

struct StructuredPrompt {
  std::string instruction;
  std::string context_user;
  std::string context_assistant;
  std::string input;

  std::string text() const {
    return "Instruction:\n" + instruction + "\n\nContext:\nUser: " + context_user + "\nAssistant: " +
           context_assistant + "\n\nInput:\n" + input + "\n";
  }
};

inline nlohmann::json to_json(const StructuredPrompt& p) {
  return {{"instruction", p.instruction},
          {"context_user", p.context_user},
          {"context_assistant", p.context_assistant},
          {"input", p.input}};
}

inline StructuredPrompt compose_stage1_prompt(const std::string& action, std::size_t k) {
  const std::string a = normalize_name(action);
  if (a.empty()) throw ValidationError("stage-1 prompt needs a non-empty action");
  if (k < kMinObjects || k > kMaxObjects)
    throw ValidationError("K = " + std::to_string(k) + " is outside [5, 10]");
  const std::string ks = std::to_string(k);
  StructuredPrompt p;
  p.instruction =
      "You are a commonsense knowledge base for human actions. Answer the questions below for the given "
      "action. YAML output is preferred.\n"
      "Q1: Return the object entity list containing Top " + ks + " most relevant objects involved in action: " + a +
      "\n"
      "Q2: Return the sub-action entity list containing the most relevant sub-actions involved in action: " + a +
      ", in temporal order\n"
      "Q3: Find the proper predicate names that concisely describe the relationship between each object / "
      "sub-action pair chosen from the entity list, written as <head, predicate, tail>\n"
      "Answer with the sections objects, sub_actions, object_triples and sub_action_triples.";
  p.context_user = "abseiling";
  p.context_assistant =
      "objects:\n  - rope\n  - harness\n  - carabiner\n  - helmet\n  - cliff\n"
      "sub_actions:\n  - clipping in\n  - leaning back\n  - descending the cliff\n"
      "object_triples:\n  - <rope, attached to, harness>\n  - <carabiner, connects, rope>\n"
      "sub_action_triples:\n  - <abseiling, starts with, clipping in>\n  - <clipping in, precedes, leaning back>\n"
      "  - <leaning back, precedes, descending the cliff>";
  p.input = a;
  return p;
}

inline StructuredPrompt compose_stage2_prompt(const ActionSubgraph& g) {
  if (g.triples.empty()) throw ValidationError("stage-2 prompt for '" + g.action + "' needs at least one triple");
  StructuredPrompt p;
  p.instruction =
      "You are a commonsense knowledge base for human actions. Try to complete the whole sentence according to "
      "each relation triples: This is an example of " + g.action +
      ", ... Continue the sentence with a short clause (or a non-predicate verb phrase) that describes the "
      "object or the relation triple. Return one line per item as \"- item: sentence\". YAML output is preferred.";
  p.context_user = "abseiling\nobjects:\n  - rope\ntriples:\n  - <rope, attached to, harness>";
  p.context_assistant =
      "objects:\n  - rope: This is an example of abseiling, which requires a rope.\n"
      "triples:\n  - <rope, attached to, harness>: This is an example of abseiling, where a rope is attached to a "
      "harness.";
  std::ostringstream in;
  in << g.action << "\n";
  if (!g.objects.empty()) {
    in << "objects:\n";
    for (const auto& o : g.objects) in << "  - " << o << "\n";
  }
  in << "triples:\n";
  for (const auto& t : g.triples) in << "  - " << t.key() << "\n";
  p.input = in.str();
  return p;
}

// Number of completion requests carried by a stage-2 prompt.
inline std::size_t stage2_requests(const ActionSubgraph& g) { return g.objects.size() + g.triples.size(); }

// ------------------------------------------------------------------ parsing

struct Stage1Result {
  ActionSubgraph graph;
  std::vector<std::string> warnings;
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

// Text of a list item ("- x", "* x", "3. x", "3) x") or nullopt.
inline std::optional<std::string> list_item(const std::string& line) {
  static const std::regex item(R"(^\s*(?:[-*•]|\d+[.)])\s+(.*)$)");
  std::smatch m;
  if (!std::regex_match(line, m, item)) return std::nullopt;
  std::string s = trim(m[1].str());
  while (s.size() >= 2 && (s.front() == '"' || s.front() == '\'' || s.front() == '`') && s.back() == s.front())
    s = trim(s.substr(1, s.size() - 2));
  return s;
}

struct RawTriple {
  std::string head, predicate, tail;
};

inline std::optional<RawTriple> parse_triple(const std::string& s) {
  static const std::regex triple(R"(<\s*([^,<>]+?)\s*,\s*([^,<>]+?)\s*,\s*([^,<>]+?)\s*>)");
  std::smatch m;
  if (!std::regex_search(s, m, triple)) return std::nullopt;
  return RawTriple{normalize_name(m[1].str()), normalize_name(m[2].str()), normalize_name(m[3].str())};
}

enum class Section { none, objects, sub_actions, triples };

inline std::optional<Section> section_header(const std::string& line) {
  static const std::regex header(R"(^\s*#*\s*([A-Za-z _-]+?)\s*:\s*$)");
  std::smatch m;
  if (!std::regex_match(line, m, header)) return std::nullopt;
  std::string h = normalize_name(m[1].str());
  std::replace(h.begin(), h.end(), '-', '_');
  std::replace(h.begin(), h.end(), ' ', '_');
  if (h == "objects" || h == "object_list" || h == "object_entities") return Section::objects;
  if (h == "sub_actions" || h == "sub_action_list" || h == "subactions") return Section::sub_actions;
  if (h.find("triples") != std::string::npos) return Section::triples;
  return Section::none;
}

inline void push_unique(std::vector<std::string>& v, const std::string& s) {
  if (std::find(v.begin(), v.end(), s) == v.end()) v.push_back(s);
}

}  // namespace detail

// Entity lists come from list items under "objects:" / "sub_actions:"
// headers; "<head, predicate, tail>" triples are read from any line. Prose
// around the lists is ignored. Triple tails missing from both entity lists
// are kept as related concepts; a triple whose head resolves to nothing is
// dropped with a warning.
inline Stage1Result parse_stage1_response(const std::string& action, const std::string& text,
                                          std::optional<std::size_t> requested_k = std::nullopt) {
  Stage1Result r;
  ActionSubgraph& g = r.graph;
  g.action = normalize_name(action);
  g.requested_k = requested_k;
  std::vector<detail::RawTriple> raw;
  detail::Section section = detail::Section::none;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto h = detail::section_header(line)) {
      section = *h;
      continue;
    }
    if (auto t = detail::parse_triple(line)) {
      raw.push_back(*t);
      continue;
    }
    auto item = detail::list_item(line);
    if (!item) continue;
    const std::string name = normalize_name(*item);
    if (name.empty()) {
      r.warnings.push_back("line " + std::to_string(lineno) + ": empty list item");
      continue;
    }
    if (section == detail::Section::objects) detail::push_unique(g.objects, name);
    else if (section == detail::Section::sub_actions) detail::push_unique(g.sub_actions, name);
  }
  if (g.objects.empty() && g.sub_actions.empty())
    throw ParseError("stage-1 response for '" + g.action + "': no entities found in " + std::to_string(lineno) +
                     " lines (expected list items under objects: / sub_actions:)");
  if (raw.empty()) r.warnings.push_back("no relation triples found");
  for (const auto& t : raw) {
    if (!g.resolves(t.head)) {
      r.warnings.push_back("dropped <" + t.head + ", " + t.predicate + ", " + t.tail + ">: unknown head '" + t.head +
                           "'");
      continue;
    }
    if (!g.resolves(t.tail)) detail::push_unique(g.related, t.tail);
    RelationTriple rt{t.head, t.predicate, t.tail, g.classify(t.head, t.predicate, t.tail)};
    if (std::find(g.triples.begin(), g.triples.end(), rt) == g.triples.end()) g.triples.push_back(rt);
  }
  return r;
}

// Canonical stage-1 text of a subgraph; parsing it yields the same subgraph.
inline std::string to_stage1_text(const ActionSubgraph& g) {
  std::ostringstream os;
  os << "objects:\n";
  for (const auto& o : g.objects) os << "  - " << o << "\n";
  os << "sub_actions:\n";
  for (const auto& s : g.sub_actions) os << "  - " << s << "\n";
  os << "object_triples:\n";
  for (const auto& t : g.triples_of(TripleKind::spatial)) os << "  - " << t.key() << "\n";
  os << "sub_action_triples:\n";
  for (const auto& t : g.triples_of(TripleKind::temporal)) os << "  - " << t.key() << "\n";
  return os.str();
}

namespace detail {

// Removes a leading "This is a(n) video/example of {action}," and trims.
inline std::string extract_clause(const std::string& action, const std::string& sentence) {
  std::string s = trim(sentence);
  const std::regex lead(R"(^this is an? (?:video|example) of\s+)", std::regex::icase);
  std::smatch m;
  if (std::regex_search(s, m, lead)) {
    std::string rest = s.substr(static_cast<std::size_t>(m.length(0)));
    if (normalize_name(rest.substr(0, std::min(rest.size(), action.size()))) == action) {
      rest = rest.substr(action.size());
      rest = trim(rest);
      if (!rest.empty() && rest.front() == ',') rest = rest.substr(1);
      s = trim(rest);
    }
  }
  std::string out;
  bool space = false;
  for (char c : s) {
    if (c == ' ' || c == '\t') {
      space = true;
      continue;
    }
    if (space && !out.empty()) out.push_back(' ');
    space = false;
    out.push_back(c);
  }
  return out;
}

}  // namespace detail

// "- <h, p, t>: sentence" and "- name: sentence" lines; keys are triple keys
// or normalized object names, values are the clauses.
inline std::map<std::string, std::string> parse_stage2_response(const std::string& action, const std::string& text) {
  const std::string a = normalize_name(action);
  std::map<std::string, std::string> out;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    auto item = detail::list_item(line);
    if (!item) continue;
    std::string key, sentence;
    if (item->front() == '<') {
      const auto close = item->find('>');
      if (close == std::string::npos) continue;
      auto t = detail::parse_triple(item->substr(0, close + 1));
      if (!t) continue;
      key = RelationTriple{t->head, t->predicate, t->tail, TripleKind::spatial}.key();
      sentence = item->substr(close + 1);
    } else {
      const auto colon = item->find(':');
      if (colon == std::string::npos) continue;
      key = normalize_name(item->substr(0, colon));
      sentence = item->substr(colon);
    }
    sentence = detail::trim(sentence);
    if (!sentence.empty() && sentence.front() == ':') sentence = detail::trim(sentence.substr(1));
    const std::string clause = detail::extract_clause(a, sentence);
    if (!key.empty() && !clause.empty()) out[key] = clause;
  }
  return out;
}

// ------------------------------------------------------------------ banks

struct PromptBank {
  std::string action;
  std::vector<std::string> spatial;
  std::vector<std::string> temporal;

  std::vector<std::string> combined() const {
    std::vector<std::string> out = spatial;
    out.insert(out.end(), temporal.begin(), temporal.end());
    return out;
  }
  std::size_t size() const noexcept { return spatial.size() + temporal.size(); }
};

inline std::string hard_template(const std::string& action) { return "This is a video of " + action + ", "; }

// Spatial prompts: one per object, then one per spatial triple. Temporal
// prompts: one per temporal triple. Missing clauses fall back to a templated
// clause; a graph without triples yields the bare class prompt.
inline PromptBank triples_to_prompts(const ActionSubgraph& g, const std::map<std::string, std::string>& clauses) {
  PromptBank b;
  b.action = g.action;
  if (g.triples.empty()) {
    b.spatial.push_back("This is a video of " + g.action + ".");
    return b;
  }
  auto clause_for = [&](const std::string& key, const std::string& fallback) {
    auto it = clauses.find(key);
    return hard_template(g.action) + (it != clauses.end() ? it->second : fallback);
  };
  for (const auto& o : g.objects) b.spatial.push_back(clause_for(o, "which involves " + o + "."));
  for (const auto& t : g.triples) {
    std::string p = clause_for(t.key(), "where " + t.head + " " + t.predicate + " " + t.tail + ".");
    (t.kind == TripleKind::spatial ? b.spatial : b.temporal).push_back(std::move(p));
  }
  return b;
}

inline PromptBank triples_to_prompts(const ActionSubgraph& g) { return triples_to_prompts(g, g.clauses); }

inline nlohmann::json to_json(const PromptBank& b) {
  return {{"action", b.action}, {"spatial", b.spatial}, {"temporal", b.temporal}, {"combined", b.combined()}};
}

}  // namespace stdd::askg
