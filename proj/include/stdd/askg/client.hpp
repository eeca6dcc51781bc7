#pragma once

// LLM transports and the per-action build pipeline.
//
// Fixture layout (also the replay cache written by live runs):
//   <dir>/<slug>.stage1.txt   graph-construction response
//   <dir>/<slug>.stage2.txt   sentence-completion response

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "stdd/askg/prompts.hpp"

namespace stdd::askg {

enum class Stage { graph = 1, completion = 2 };

inline std::string fixture_name(const std::string& action, Stage stage) {
  return slug(action) + (stage == Stage::graph ? ".stage1.txt" : ".stage2.txt");
}

class LLMClient {
 public:
  virtual ~LLMClient() = default;
  virtual std::string complete(Stage stage, const std::string& action, const StructuredPrompt& prompt) = 0;
};

namespace detail {

inline std::string read_text(const std::filesystem::path& p) {
  std::ifstream is(p, std::ios::binary);
  if (!is) throw IoError("cannot open " + p.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

inline void write_text(const std::filesystem::path& p, const std::string& text) {
  std::filesystem::create_directories(p.parent_path().empty() ? "." : p.parent_path());
  std::ofstream os(p, std::ios::binary);
  if (!os) throw IoError("cannot open " + p.string() + " for writing");
  os << text;
  if (!os) throw IoError("write failed: " + p.string());
}

}  // namespace detail

// Stored responses keyed by (stage, action); the prompt is ignored.
class FixtureClient : public LLMClient {
 public:
  explicit FixtureClient(std::filesystem::path dir) : dir_(std::move(dir)) {
    if (!std::filesystem::is_directory(dir_)) throw IoError("fixture directory not found: " + dir_.string());
  }

  std::string complete(Stage stage, const std::string& action, const StructuredPrompt&) override {
    return detail::read_text(dir_ / fixture_name(action, stage));
  }

 private:
  std::filesystem::path dir_;
};

struct BuildResult {
  ActionSubgraph graph;
  std::string stage1_text;
  std::string stage2_text;
  std::vector<std::string> warnings;
};

// Runs both stages for one action. Nothing is returned unless both responses
// arrive and parse, so callers persist all of an action or none of it.
inline BuildResult build_action(LLMClient& client, const std::string& action, std::size_t k = 7) {
  BuildResult r;
  const std::string a = normalize_name(action);
  r.stage1_text = client.complete(Stage::graph, a, compose_stage1_prompt(a, k));
  Stage1Result s1 = parse_stage1_response(a, r.stage1_text, k);
  r.graph = std::move(s1.graph);
  r.warnings = std::move(s1.warnings);
  if (!r.graph.triples.empty()) {
    r.stage2_text = client.complete(Stage::completion, a, compose_stage2_prompt(r.graph));
    r.graph.clauses = parse_stage2_response(a, r.stage2_text);
    for (const auto& o : r.graph.objects)
      if (!r.graph.clauses.count(o)) r.warnings.push_back("no clause for object '" + o + "'");
    for (const auto& t : r.graph.triples)
      if (!r.graph.clauses.count(t.key())) r.warnings.push_back("no clause for " + t.key());
  }
  return r;
}

// Writes <dir>/<slug>.json via a temporary file and rename.
inline std::filesystem::path write_graph(const std::filesystem::path& dir, const ActionSubgraph& g) {
  const auto target = dir / (slug(g.action) + ".json");
  const auto tmp = dir / (slug(g.action) + ".json.tmp");
  detail::write_text(tmp, to_json(g).dump(2) + "\n");
  std::filesystem::rename(tmp, target);
  return target;
}

inline ActionSubgraph read_graph(const std::filesystem::path& path) {
  try {
    return subgraph_from_json(nlohmann::json::parse(detail::read_text(path)));
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

inline void write_replay(const std::filesystem::path& dir, const BuildResult& r) {
  detail::write_text(dir / fixture_name(r.graph.action, Stage::graph), r.stage1_text);
  if (!r.stage2_text.empty()) detail::write_text(dir / fixture_name(r.graph.action, Stage::completion), r.stage2_text);
}

}  // namespace stdd::askg
