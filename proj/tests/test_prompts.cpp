#include "doctest.h"
#include "memfl/prompts.hpp"
#include "memfl/selection.hpp"
#include "support.hpp"

using namespace memfl;

TEST_SUITE("prompts") {

TEST_CASE("variable substitution and sections") {
  CHECK(render_template("a {{x}} b", {{"x", "1"}}) == "a 1 b");
  CHECK(render_template("{{#g}}[{{g}}]{{/g}}", {{"g", "y"}}) == "[y]");
  CHECK(render_template("{{#g}}[{{g}}]{{/g}}", {{"g", ""}}) == "");
  CHECK(render_template("{{^g}}none{{/g}}", {{"g", ""}}) == "none");
  CHECK(render_template("{{^g}}none{{/g}}", {{"g", "z"}}) == "");
  // Standalone section tags drop their whole line.
  const std::string t = "head\n{{#g}}\nG={{g}}\n{{/g}}\ntail\n";
  CHECK(render_template(t, {{"g", "1"}}) == "head\nG=1\ntail\n");
  CHECK(render_template(t, {{"g", ""}}) == "head\ntail\n");
  // Substituted values are not re-expanded.
  CHECK(render_template("{{x}}", {{"x", "{{y}}"}}) == "{{y}}");
}

TEST_CASE("unknown variables are rejected") {
  CHECK_THROWS_AS(render_template("{{missing}}", {}), Error);
  CHECK_THROWS_AS(render_template("{{#missing}}x{{/missing}}", {}), Error);
}

TEST_CASE("builtin library matches the prompts directory") {
  const auto lib = PromptLibrary::builtin();
  const std::vector<std::string> expected{
      "bug_info",         "bug_report",          "condense_classes",       "condense_methods",
      "confirm",          "refine",              "review",                 "summarize_class",
      "summarize_class_merge", "summarize_project", "summarize_project_merge", "system"};
  CHECK(lib.names() == expected);
  const auto dir = testing::mini_dir().parent_path().parent_path().parent_path() / "prompts";
  for (const auto& n : expected) {
    CAPTURE(n);
    CHECK(lib.raw(n) == testing::read_file(dir / (n + ".txt")));
  }
}

TEST_CASE("empty guidance leaves no guidance section") {
  const auto lib = PromptLibrary::builtin();
  PromptVars v{{"project_summary", "P"}, {"bug_info", "B"}, {"guidance", ""}};
  const auto without = lib.render("review", v);
  CHECK(without.find("guidance") == std::string::npos);
  v["guidance"] = "G";
  CHECK(lib.render("review", v).find("# Debugging guidance for this project\nG\n") !=
        std::string::npos);
}

TEST_CASE("overrides replace single templates") {
  const auto dir = testing::scratch_dir("prompt-override");
  std::ofstream(dir / "review.txt") << "custom {{bug_info}}";
  const auto lib = PromptLibrary::with_overrides(dir);
  CHECK(lib.render("review", {{"bug_info", "x"}}) == "custom x");
  CHECK(lib.raw("confirm") == PromptLibrary::builtin().raw("confirm"));
}

}  // TEST_SUITE

TEST_SUITE("prompts") {

TEST_CASE("string arrays from model replies") {
  using V = std::vector<std::string>;
  CHECK(extract_string_array("```json\n[\"A\", \"B\"]\n```") == V{"A", "B"});
  CHECK(extract_string_array("Sure:\n```\n[\"x@1\"]\n```\nDone") == V{"x@1"});
  CHECK(extract_string_array("keep [\"A\",\"B\"] please") == V{"A", "B"});
  CHECK(extract_string_array("[\"A\", 3, \"B\"]") == V{"A", "B"});
  CHECK(extract_string_array("[]") == V{});
  // Not valid JSON, but the quoted strings are recoverable.
  CHECK(extract_string_array("['A', \"B\",]") == V{"A", "B"});
  CHECK_FALSE(extract_string_array("no list here").has_value());
  CHECK_FALSE(extract_string_array("").has_value());
}

TEST_CASE("CAP directive and NO_UPDATE sentinel") {
  CHECK(guidance_cap("Prefer helpers.\nCAP: 3\n") == 3);
  CHECK(guidance_cap("cap:7") == 7);
  CHECK_FALSE(guidance_cap("capital letters").has_value());
  CHECK_FALSE(guidance_cap("").has_value());
  CHECK(is_no_update("NO_UPDATE"));
  CHECK(is_no_update("  `NO_UPDATE` nothing to add"));
  CHECK_FALSE(is_no_update("Do NO_UPDATE things"));
  CHECK_FALSE(is_no_update(""));
}

}  // TEST_SUITE
