#include <sstream>

#include "doctest.h"
#include "memfl/java_scanner.hpp"
#include "memfl/source_index.hpp"
#include "json.hpp"
#include "support.hpp"

using namespace memfl;
using namespace memfl::testing;
using nlohmann::json;

namespace {

void write(const std::filesystem::path& p, const std::string& text) {
  std::filesystem::create_directories(p.parent_path());
  std::ofstream(p, std::ios::binary) << text;
}

const char* kShapes = R"(package toy;

public class Shapes {
    int area(int w, int h) {
        return w * h;
    }

    int perimeter(int w, int h) {
        return 2 * (w + h);
    }

    int square(int s) {
        return area(s, s);
    }
}
)";

const char* kUtil = R"(package toy;

class Util {
    static int twice(int x) {
        return x + x;
    }

    static int half(int x) {
        return x / 2;
    }
}
)";

const char* kTest = R"(package toy;

public class ShapesTest {
    @Test
    public void testSquare() {
        checkArea(3, 9);
    }

    private void checkArea(int s, int expected) {
        assertEquals(expected, new Shapes().square(s));
    }

    @Test
    public void testPerimeter() {
        assertEquals(8, new Shapes().perimeter(1, 3));
    }
}
)";

json toy_manifest() {
  return json{
      {"format", "memfl-manifest/1"},
      {"project_name", "toy"},
      {"source_roots", {"src"}},
      {"test_roots", {"test"}},
      {"classes",
       {{{"name", "toy.Shapes"},
         {"file", "src/toy/Shapes.java"},
         {"methods",
          {{{"name", "area"}, {"decl_line", 4}, {"end_line", 6}},
           {{"name", "perimeter"}, {"decl_line", 8}, {"end_line", 10}},
           {{"name", "square"}, {"decl_line", 12}, {"end_line", 14}}}}},
        {{"name", "toy.Util"},
         {"file", "src/toy/Util.java"},
         {"methods",
          {{{"name", "twice"}, {"decl_line", 4}, {"end_line", 6}},
           {{"name", "half"}, {"decl_line", 8}, {"end_line", 10}}}}}}},
      {"bugs",
       {{{"id", "Toy-1"},
         {"error_message", "expected:<9> but was:<6>"},
         {"stack_trace", {{{"class", "toy.ShapesTest"}, {"method", "checkArea"}, {"line", 10}}}},
         {"failing_tests", {"toy.ShapesTest::testSquare"}},
         {"ground_truth", {"toy.Shapes@area@4"}},
         {"tests",
          {{{"name", "toy.ShapesTest::testSquare"},
            {"outcome", "fail"},
            {"covers", {"toy.Shapes@area@4", "toy.Shapes@square@12", "toy.Util@twice@4"}}},
           {{"name", "toy.ShapesTest::testPerimeter"},
            {"outcome", "pass"},
            {"covers", {"toy.Shapes@perimeter@8"}}}}}}}}};
}

std::filesystem::path make_toy(const std::string& name, const json& manifest) {
  const auto root = scratch_dir(name);
  write(root / "src/toy/Shapes.java", kShapes);
  write(root / "src/toy/Util.java", kUtil);
  write(root / "test/toy/ShapesTest.java", kTest);
  write(root / "manifest.json", manifest.dump(1));
  return root;
}

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected memfl::Error");
  return ErrorCode::kIo;
}

}  // namespace

TEST_SUITE("source_index") {

TEST_CASE("manifest with 2 classes and 5 methods") {
  const auto root = make_toy("manifest", toy_manifest());
  const auto snap = index_tree(root);
  CHECK(snap.project_name() == "toy");
  CHECK(snap.classes().size() == 2);
  CHECK(snap.method_count() == 5);
  const auto* sq = snap.find_exact({"toy.Shapes", "square", 12});
  REQUIRE(sq);
  CHECK(sq->body_text == "    int square(int s) {\n        return area(s, s);\n    }");
}

TEST_CASE("builtin mode agrees with the manifest on the toy tree") {
  const auto root = make_toy("builtin", toy_manifest());
  const auto a = index_tree(root);
  const auto b = index_tree(root, {IndexMode::kBuiltin, {".java"}});
  CHECK(snapshot_to_json(a) == snapshot_to_json(b));
}

TEST_CASE("builtin spans of the mini project match the golden table") {
  const auto snap = index_tree(mini_dir(), {IndexMode::kBuiltin, {".java"}});
  CHECK(snap.classes().size() == 8);
  std::ostringstream table;
  table << "# class\tmethod\tdecl_line\tfirst_line\tend_line\n";
  for (const auto& c : snap.classes())
    for (const auto& m : c.methods)
      table << c.name << '\t' << m.ref.method_name << '\t' << m.ref.decl_line << '\t'
            << m.body_span.first << '\t' << m.body_span.last << '\n';
  CHECK(table.str() == read_file(golden_dir() / "mini_spans.tsv"));
  // Manifest mode on the same tree yields the same snapshot.
  CHECK(snapshot_to_json(index_tree(mini_dir())) == snapshot_to_json(snap));
}

TEST_CASE("indexing is pure and the fingerprint tracks source bytes") {
  const auto root = make_toy("fingerprint", toy_manifest());
  const auto fp = index_tree(root).fingerprint();
  CHECK(index_tree(root).fingerprint() == fp);
  write(root / "src/toy/Util.java", std::string(kUtil) + "// trailing\n");
  CHECK(index_tree(root).fingerprint() != fp);
}

TEST_CASE("invalid trees") {
  const auto empty = scratch_dir("empty");
  CHECK(code_of([&] { index_tree(empty); }) == ErrorCode::kManifestInvalid);

  auto m = toy_manifest();
  m["classes"][0]["methods"][1]["decl_line"] = 5;  // overlaps area's span
  const auto overlap = make_toy("overlap", m);
  try {
    index_tree(overlap);
    FAIL("expected ManifestInvalid");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kManifestInvalid);
    CHECK(std::string(e.what()).find("$.classes[0].methods[1]") != std::string::npos);
  }

  const auto broken = scratch_dir("braces");
  write(broken / "src/B.java", "class B {\n void f() {\n }}}}}\n}}\n");
  CHECK(code_of([&] { index_tree(broken, {IndexMode::kBuiltin, {".java"}}); }) ==
        ErrorCode::kIndexError);
}

TEST_CASE("bug case with one helper and coverage") {
  const auto root = make_toy("bugs", toy_manifest());
  const auto snap = index_tree(root);
  const auto bugs = load_bug_cases(snap, root);
  REQUIRE(bugs.size() == 1);
  const auto& bug = bugs[0];
  CHECK(bug.coverage.covered.size() == 3);
  CHECK(bug.coverage.failing_test_count() == 1);
  CHECK(bug.coverage.passing_test_count() == 1);
  const auto& t = bug.primary_test();
  CHECK(t.name == "toy.ShapesTest::testSquare");
  CHECK(t.source.find("checkArea(3, 9)") != std::string::npos);
  REQUIRE(t.helpers.size() == 1);
  CHECK(t.helpers[0].name == "toy.ShapesTest::checkArea");
  CHECK(t.helpers[0].source.find("assertEquals") != std::string::npos);
  CHECK(bug.stack_trace[0].external);
}

TEST_CASE("unresolved coverage is dropped with a warning") {
  auto m = toy_manifest();
  m["bugs"][0]["tests"][0]["covers"].push_back("toy.Shapes@volume@99");
  const auto root = make_toy("unresolved", m);
  const auto snap = index_tree(root);
  LoadReport report;
  const auto bugs = load_bug_cases(snap, root, &report);
  REQUIRE(bugs.size() == 1);
  CHECK(bugs[0].coverage.covered.size() == 3);
  REQUIRE(report.warnings.size() == 1);
  CHECK(report.warnings[0].find("UnresolvedCoverage") != std::string::npos);
}

TEST_CASE("a bug with no failing test is rejected") {
  auto m = toy_manifest();
  m["bugs"][0]["failing_tests"] = json::array();
  const auto root = make_toy("nofail", m);
  const auto snap = index_tree(root);
  CHECK(code_of([&] { load_bug_cases(snap, root); }) == ErrorCode::kManifestInvalid);
}

TEST_CASE("helper closure is depth-capped and monotone") {
  TestSourceIndex idx;
  idx.add("T", "start", "void start() { a(); }");
  idx.add("T", "a", "void a() { b(); }");
  idx.add("T", "b", "void b() { c(); }");
  idx.add("T", "c", "void c() { d(); }");
  idx.add("T", "d", "void d() { }");
  const auto* start = idx.find("T::start");
  REQUIRE(start);
  auto names = [](const std::vector<TestSource>& v) {
    std::vector<std::string> out;
    for (const auto& s : v) out.push_back(s.name);
    return out;
  };
  const auto closure = names(idx.helper_closure(*start));
  CHECK(closure == std::vector<std::string>{"T::a", "T::b", "T::c"});
  CHECK(names(idx.helper_closure(*start, 1)) == std::vector<std::string>{"T::a"});

  idx.add("T", "unrelated", "void unrelated() { d(); }");
  CHECK(names(idx.helper_closure(*idx.find("T::start"))) == closure);
}

TEST_CASE("java scanner handles comments, literals and nesting") {
  const char* src = R"(package p;
/** doc */
class Outer {
    String s = "{ not a brace";
    // void fake() {
    void real() {
        char c = '}';
        if (true) { run(); }
    }
    static class Inner {
        int g() { return 1; }
    }
    abstract void none();
}
)";
  const auto scan = scan_java_like(src);
  CHECK(scan.package_name == "p");
  CHECK(scan.brace_anomalies == 0);
  REQUIRE(scan.types.size() == 2);
  CHECK(scan.types[0].qualified_name == "p.Outer");
  REQUIRE(scan.types[0].methods.size() == 1);
  CHECK(scan.types[0].methods[0].name == "real");
  CHECK(scan.types[0].methods[0].decl_line == 6);
  CHECK(scan.types[0].methods[0].last_line == 9);
  CHECK(scan.types[1].qualified_name == "p.Outer$Inner");
  CHECK(called_identifiers("a(); new B(); if (x) { c(1); }") == std::set<std::string>{"a", "c"});
}

}  // TEST_SUITE
