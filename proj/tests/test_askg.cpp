#include <gtest/gtest.h>

#include <filesystem>
#include <set>

#include "appendix_prompts.hpp"
#include "stdd/askg/client.hpp"

using namespace stdd;
using namespace stdd::askg;

namespace {

const std::filesystem::path kFixtures = std::filesystem::path(STDD_SOURCE_DIR) / "data" / "fixtures" / "askg";

ActionSubgraph fixture_graph(const std::string& action) {
  FixtureClient client(kFixtures);
  return build_action(client, action).graph;
}

ActionSubgraph small_graph() {
  ActionSubgraph g;
  g.action = "archery";
  g.objects = {"bow", "arrow", "target", "quiver", "armguard"};
  g.sub_actions = {"drawing", "releasing"};
  g.triples = {{"bow", "used to shoot", "arrow", TripleKind::spatial},
               {"drawing", "precedes", "releasing", TripleKind::temporal}};
  g.requested_k = 5;
  return g;
}

class ScriptedClient : public LLMClient {
 public:
  std::string stage1, stage2;
  bool fail_stage2 = false;
  std::size_t calls = 0;

  std::string complete(Stage stage, const std::string&, const StructuredPrompt&) override {
    ++calls;
    if (stage == Stage::completion && fail_stage2) throw IoError("connection reset");
    return stage == Stage::graph ? stage1 : stage2;
  }
};

}  // namespace

TEST(Names, NormalizeAndSlug) {
  EXPECT_EQ(normalize_name("  Clean   and\tJerk "), "clean and jerk");
  EXPECT_EQ(slug("Clean and Jerk"), "clean_and_jerk");
  EXPECT_EQ(normalize_name(""), "");
}

TEST(Stage1Prompt, ContainsQuestionsAndAction) {
  const std::string text = compose_stage1_prompt("abseiling", 7).text();
  EXPECT_NE(text.find("Return the object entity list containing Top 7 most relevant objects"), std::string::npos);
  EXPECT_NE(text.find("Find the proper predicate names that"), std::string::npos);
  EXPECT_NE(text.find("YAML"), std::string::npos);
  const StructuredPrompt a = compose_stage1_prompt("Archery", 5);
  EXPECT_EQ(a.input, "archery");
  EXPECT_NE(a.instruction.find("Top 5 most relevant objects involved in action: archery"), std::string::npos);
  EXPECT_THROW(compose_stage1_prompt("  ", 7), ValidationError);
  EXPECT_THROW(compose_stage1_prompt("archery", 4), ValidationError);
  EXPECT_THROW(compose_stage1_prompt("archery", 11), ValidationError);
}

TEST(Stage1Parse, ArcheryFixture) {
  const ActionSubgraph g = fixture_graph("archery");
  const std::set<std::string> objects(g.objects.begin(), g.objects.end());
  EXPECT_EQ(objects, (std::set<std::string>{"bow", "arrow", "target", "quiver", "armguard", "finger tab", "bullseye"}));
  EXPECT_EQ(g.sub_actions.size(), 6u);
  const RelationTriple shoot{"bow", "used to shoot", "arrow", TripleKind::spatial};
  const RelationTriple start{"archery", "starts with", "gripping the bow", TripleKind::temporal};
  EXPECT_NE(std::find(g.triples.begin(), g.triples.end(), shoot), g.triples.end());
  EXPECT_NE(std::find(g.triples.begin(), g.triples.end(), start), g.triples.end());
  EXPECT_EQ(g.triples_of(TripleKind::spatial).size(), 6u);
  EXPECT_EQ(g.triples_of(TripleKind::temporal).size(), 6u);
  EXPECT_EQ(g.related, (std::vector<std::string>{"arrows", "arm", "fingers"}));
}

TEST(Stage1Parse, ToleratesProseNumberingAndCase) {
  const std::string text =
      "Sure! Here you go.\n\nObjects:\n1. Bow\n2) ARROW\n* target\n- bow\n\nSub-actions:\n- Drawing\n"
      "Some commentary with <Bow , used to shoot,  Arrow > inline.\n<drawing, precedes, releasing>\n";
  const Stage1Result r = parse_stage1_response("Archery", text, 5);
  EXPECT_EQ(r.graph.objects, (std::vector<std::string>{"bow", "arrow", "target"}));
  EXPECT_EQ(r.graph.sub_actions, (std::vector<std::string>{"drawing"}));
  ASSERT_EQ(r.graph.triples.size(), 2u);
  EXPECT_EQ(r.graph.triples[0], (RelationTriple{"bow", "used to shoot", "arrow", TripleKind::spatial}));
  EXPECT_EQ(r.graph.triples[1].kind, TripleKind::temporal);
  EXPECT_EQ(r.graph.related, (std::vector<std::string>{"releasing"}));
}

TEST(Stage1Parse, NoTriplesWarnsAndNoEntitiesThrows) {
  const Stage1Result r = parse_stage1_response("archery", "objects:\n- bow\n- arrow\n");
  EXPECT_TRUE(r.graph.triples.empty());
  ASSERT_EQ(r.warnings.size(), 1u);
  EXPECT_NE(r.warnings[0].find("no relation triples"), std::string::npos);
  try {
    parse_stage1_response("archery", "I cannot help with that.\nSorry.\n");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("2 lines"), std::string::npos);
  }
}

TEST(Stage1Parse, UnknownHeadIsDroppedWithWarning) {
  const Stage1Result r = parse_stage1_response("archery", "objects:\n- bow\n- arrow\n<helmet, protects, head>\n<bow, shoots, arrow>\n");
  EXPECT_EQ(r.graph.triples.size(), 1u);
  ASSERT_EQ(r.warnings.size(), 1u);
  EXPECT_NE(r.warnings[0].find("helmet"), std::string::npos);
}

TEST(TripleKinds, ClassificationRules) {
  const ActionSubgraph g = small_graph();
  EXPECT_EQ(g.classify("bow", "used to shoot", "arrow"), TripleKind::spatial);
  EXPECT_EQ(g.classify("drawing", "precedes", "releasing"), TripleKind::temporal);
  EXPECT_EQ(g.classify("bow", "used while", "drawing"), TripleKind::temporal);
  EXPECT_EQ(g.classify("archery", "starts with", "drawing"), TripleKind::temporal);
  EXPECT_EQ(g.classify("archery", "requires", "bow"), TripleKind::spatial);
}

TEST(Validate, FixturesHaveNoViolations) {
  for (const auto& a : {"archery", "surfing", "clean and jerk", "moving square", "static texture"}) {
    const ValidationReport r = validate_graph(fixture_graph(a));
    EXPECT_TRUE(r.ok()) << a << ": " << to_json(r).dump();
  }
}

TEST(Validate, ViolationCodes) {
  ActionSubgraph g = small_graph();
  EXPECT_TRUE(validate_graph(g).ok());

  ActionSubgraph bad = g;
  bad.triples.push_back({"helmet", "protects", "bow", TripleKind::spatial});
  EXPECT_EQ(validate_graph(bad).count("unresolved_endpoint"), 1u);
  EXPECT_EQ(validate_graph(bad).violations.size(), 1u);

  bad = g;
  bad.objects.resize(3);
  bad.triples.resize(1);
  EXPECT_EQ(validate_graph(bad).count("k_range"), 1u);
  bad.requested_k.reset();
  EXPECT_TRUE(validate_graph(bad).ok());

  bad = g;
  bad.triples.push_back({"bow", "touches", "bow", TripleKind::spatial});
  EXPECT_EQ(validate_graph(bad).count("self_loop"), 1u);

  bad = g;
  bad.triples.push_back(g.triples[0]);
  EXPECT_EQ(validate_graph(bad).count("duplicate_triple"), 1u);

  bad = g;
  bad.triples[1].kind = TripleKind::spatial;
  EXPECT_EQ(validate_graph(bad).count("kind_mismatch"), 1u);

  bad = g;
  bad.sub_actions.push_back("Bow");
  EXPECT_EQ(validate_graph(bad).count("duplicate_concept"), 1u);

  bad = g;
  bad.objects.push_back(" ");
  bad.action.clear();
  EXPECT_EQ(validate_graph(bad).count("empty_name"), 2u);
}

TEST(GraphJson, RoundTripIsIdentity) {
  for (const auto& a : {"archery", "surfing", "clean and jerk"}) {
    const ActionSubgraph g = fixture_graph(a);
    EXPECT_EQ(subgraph_from_json(nlohmann::json::parse(to_json(g).dump())), g) << a;
    const Stage1Result again = parse_stage1_response(a, to_stage1_text(g), g.requested_k);
    ActionSubgraph expect = g;
    expect.clauses.clear();
    EXPECT_EQ(again.graph, expect) << a;
  }
  EXPECT_THROW(subgraph_from_json(nlohmann::json::parse(R"({"action": "x"})")), ParseError);
  EXPECT_THROW(subgraph_from_json(nlohmann::json::parse(
                   R"({"action": "x", "objects": [], "sub_actions": [], "triples": [{"head": "a", "predicate": "b", "tail": "c", "kind": "other"}]})")),
               ParseError);
}

TEST(GraphJson, WriteAndReadFile) {
  const auto dir = std::filesystem::temp_directory_path() / "stdd_graph_io";
  std::filesystem::remove_all(dir);
  const ActionSubgraph g = fixture_graph("clean and jerk");
  const auto path = write_graph(dir, g);
  EXPECT_EQ(path.filename(), "clean_and_jerk.json");
  EXPECT_FALSE(std::filesystem::exists(dir / "clean_and_jerk.json.tmp"));
  EXPECT_EQ(read_graph(path), g);
  detail::write_text(dir / "bad.json", "{");
  EXPECT_THROW(read_graph(dir / "bad.json"), ParseError);
  EXPECT_THROW(read_graph(dir / "none.json"), IoError);
  std::filesystem::remove_all(dir);
}

TEST(Stage2Prompt, EnumeratesTriples) {
  ActionSubgraph abseil;
  abseil.action = "abseiling";
  abseil.objects = {"rope"};
  abseil.triples = {{"rope", "attached to", "harness", TripleKind::spatial}};
  const StructuredPrompt p = compose_stage2_prompt(abseil);
  EXPECT_NE(p.text().find("This is an example of abseiling"), std::string::npos);
  EXPECT_EQ(stage2_requests(abseil), 2u);
  abseil.objects.clear();
  EXPECT_EQ(stage2_requests(abseil), 1u);

  const ActionSubgraph surf = fixture_graph("surfing");
  const std::string in = compose_stage2_prompt(surf).input;
  for (const auto& t : surf.triples_of(TripleKind::spatial)) EXPECT_NE(in.find(t.key()), std::string::npos) << t.key();
  EXPECT_EQ(surf.triples_of(TripleKind::spatial).size(), 6u);

  ActionSubgraph empty = abseil;
  empty.triples.clear();
  EXPECT_THROW(compose_stage2_prompt(empty), ValidationError);
}

TEST(Stage2Parse, ClausesFromSentences) {
  const auto c = parse_stage2_response("archery",
                                       "objects:\n  - Bow: This is a video of archery, which requires a bow.\n"
                                       "triples:\n  - <bow, used to shoot, arrow>: This is an example of Archery,  where a bow   is used.\n"
                                       "  - arrow: which uses an arrow.\n  - nothing here\n");
  EXPECT_EQ(c.at("bow"), "which requires a bow.");
  EXPECT_EQ(c.at("<bow, used to shoot, arrow>"), "where a bow is used.");
  EXPECT_EQ(c.at("arrow"), "which uses an arrow.");
  EXPECT_EQ(c.size(), 3u);
}

TEST(Prompts, AppendixStringsExactly) {
  for (const auto& expected : oracle::appendix_prompts()) {
    const PromptBank b = triples_to_prompts(fixture_graph(expected.action));
    EXPECT_EQ(b.spatial, expected.spatial) << expected.action;
    EXPECT_EQ(b.temporal, expected.temporal) << expected.action;
  }
}

TEST(Prompts, Counts) {
  EXPECT_EQ(triples_to_prompts(fixture_graph("archery")).spatial.size(), 13u);
  EXPECT_EQ(triples_to_prompts(fixture_graph("archery")).temporal.size(), 6u);
  EXPECT_EQ(triples_to_prompts(fixture_graph("surfing")).spatial.size(), 13u);
  EXPECT_EQ(triples_to_prompts(fixture_graph("surfing")).temporal.size(), 6u);
  EXPECT_EQ(triples_to_prompts(fixture_graph("clean and jerk")).spatial.size(), 18u);
  EXPECT_EQ(triples_to_prompts(fixture_graph("clean and jerk")).temporal.size(), 4u);
}

TEST(Prompts, FallbackAndEmptyGraph) {
  ActionSubgraph g = small_graph();
  const PromptBank b = triples_to_prompts(g, {});
  EXPECT_EQ(b.spatial.back(), "This is a video of archery, where bow used to shoot arrow.");
  EXPECT_EQ(b.spatial.front(), "This is a video of archery, which involves bow.");
  EXPECT_EQ(b.temporal, (std::vector<std::string>{"This is a video of archery, where drawing precedes releasing."}));
  g.triples.clear();
  const PromptBank e = triples_to_prompts(g);
  EXPECT_EQ(e.spatial, (std::vector<std::string>{"This is a video of archery."}));
  EXPECT_TRUE(e.temporal.empty());
}

TEST(PromptProperty, PartitionAndTemplatePrefix) {
  for (const auto& a : {"archery", "surfing", "clean and jerk", "moving square", "static texture"}) {
    const PromptBank b = triples_to_prompts(fixture_graph(a));
    const auto all = b.combined();
    EXPECT_EQ(all.size(), b.size());
    EXPECT_GE(all.size(), 1u);
    EXPECT_TRUE(std::equal(b.spatial.begin(), b.spatial.end(), all.begin()));
    EXPECT_TRUE(std::equal(b.temporal.begin(), b.temporal.end(), all.begin() + static_cast<long>(b.spatial.size())));
    for (const auto& p : all) EXPECT_EQ(p.rfind("This is a video of " + normalize_name(a) + ",", 0), 0u) << p;
  }
}

TEST(Build, FixtureBuildsAreDeterministic) {
  for (const auto& a : {"archery", "surfing", "clean and jerk"})
    EXPECT_EQ(to_json(fixture_graph(a)).dump(), to_json(fixture_graph(a)).dump());
  EXPECT_THROW(FixtureClient("/nonexistent/fixtures"), IoError);
  FixtureClient client(kFixtures);
  EXPECT_THROW(build_action(client, "golf"), IoError);
}

TEST(Build, AllOrNothingPerAction) {
  ScriptedClient client;
  client.stage1 = "objects:\n- bow\n- arrow\n- target\n- quiver\n- tab\n<bow, shoots, arrow>\n";
  client.fail_stage2 = true;
  EXPECT_THROW(build_action(client, "archery", 5), IoError);
  EXPECT_EQ(client.calls, 2u);

  client.fail_stage2 = false;
  client.stage2 = "- <bow, shoots, arrow>: This is a video of archery, where a bow shoots an arrow.\n";
  const BuildResult r = build_action(client, "archery", 5);
  EXPECT_EQ(r.graph.clauses.size(), 1u);
  EXPECT_EQ(r.warnings.size(), 5u);  // no clause for the five objects

  ScriptedClient no_triples;
  no_triples.stage1 = "objects:\n- bow\n";
  const BuildResult n = build_action(no_triples, "archery", 5);
  EXPECT_EQ(no_triples.calls, 1u);
  EXPECT_TRUE(n.stage2_text.empty());
}

TEST(Build, ReplayCacheReproducesTheBuild) {
  const auto dir = std::filesystem::temp_directory_path() / "stdd_replay";
  std::filesystem::remove_all(dir);
  FixtureClient client(kFixtures);
  const BuildResult r = build_action(client, "surfing");
  write_replay(dir, r);
  FixtureClient replay(dir);
  EXPECT_EQ(build_action(replay, "surfing").graph, r.graph);
  std::filesystem::remove_all(dir);
}
