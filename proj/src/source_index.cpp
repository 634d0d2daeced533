#include "memfl/source_index.hpp"

#include <algorithm>
#include <deque>
#include <fstream>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "json.hpp"
#include "memfl/hashing.hpp"
#include "memfl/java_scanner.hpp"

namespace memfl {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, fmt::format("cannot read {}", path.string()));
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Error invalid(const std::string& path, const std::string& what) {
  return Error(ErrorCode::kManifestInvalid, fmt::format("{}: {}", path, what));
}

const json& require(const json& obj, const char* key, const std::string& path) {
  if (!obj.is_object() || !obj.contains(key)) throw invalid(path + "." + key, "missing");
  return obj.at(key);
}

std::string require_string(const json& obj, const char* key, const std::string& path) {
  const auto& v = require(obj, key, path);
  if (!v.is_string()) throw invalid(path + "." + key, "expected string");
  return v.get<std::string>();
}

int require_line(const json& obj, const char* key, const std::string& path) {
  const auto& v = require(obj, key, path);
  if (!v.is_number_integer() || v.get<long long>() < 1) {
    throw invalid(path + "." + key, "expected positive integer");
  }
  return v.get<int>();
}

std::vector<std::string> string_list(const json& obj, const char* key,
                                     std::vector<std::string> fallback, const std::string& path) {
  if (!obj.contains(key)) return fallback;
  const auto& v = obj.at(key);
  if (!v.is_array()) throw invalid(path + "." + key, "expected array");
  std::vector<std::string> out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!v[i].is_string()) throw invalid(fmt::format("{}.{}[{}]", path, key, i), "expected string");
    out.push_back(v[i].get<std::string>());
  }
  return out;
}

struct ProjectLayout {
  std::string project_name;
  std::vector<std::string> source_roots;
  std::vector<std::string> test_roots;
  std::optional<json> manifest;
};

ProjectLayout read_layout(const fs::path& root, bool manifest_required) {
  ProjectLayout layout;
  const auto manifest_path = root / kManifestFileName;
  if (fs::exists(manifest_path)) {
    try {
      layout.manifest = json::parse(read_file(manifest_path));
    } catch (const json::parse_error& e) {
      throw invalid("$", fmt::format("manifest is not valid JSON: {}", e.what()));
    }
    const auto& m = *layout.manifest;
    if (!m.is_object()) throw invalid("$", "expected object");
    layout.project_name = require_string(m, "project_name", "$");
    layout.source_roots = string_list(m, "source_roots", {"src"}, "$");
    layout.test_roots = string_list(m, "test_roots", {"test"}, "$");
  } else if (manifest_required) {
    throw invalid("$", fmt::format("no {} in {}", kManifestFileName, root.string()));
  } else {
    layout.project_name = fs::absolute(root).lexically_normal().filename().string();
    if (layout.project_name.empty()) {
      layout.project_name = fs::absolute(root).lexically_normal().parent_path().filename().string();
    }
    layout.source_roots = {fs::exists(root / "src") ? "src" : "."};
    layout.test_roots = {"test"};
  }
  return layout;
}

std::string relative_string(const fs::path& p, const fs::path& root) {
  return p.lexically_relative(root).generic_string();
}

bool under_any(const std::string& rel, const std::vector<std::string>& roots) {
  for (const auto& r : roots) {
    if (r == "." ) continue;
    if (rel == r || rel.rfind(r + "/", 0) == 0) return true;
  }
  return false;
}

std::vector<fs::path> source_files(const fs::path& root, const std::vector<std::string>& roots,
                                   const std::vector<std::string>& extensions,
                                   const std::vector<std::string>& excluded) {
  std::set<fs::path> files;
  for (const auto& r : roots) {
    const auto dir = root / r;
    if (!fs::is_directory(dir)) continue;
    for (const auto& entry : fs::recursive_directory_iterator(dir)) {
      if (!entry.is_regular_file()) continue;
      const auto ext = entry.path().extension().string();
      if (std::find(extensions.begin(), extensions.end(), ext) == extensions.end()) continue;
      if (under_any(relative_string(entry.path(), root), excluded)) continue;
      files.insert(entry.path());
    }
  }
  return {files.begin(), files.end()};
}

MethodRecord make_method(const std::string& cls, const std::string& name, int decl_line,
                         LineSpan span, const std::string& file,
                         const std::vector<std::string>& lines,
                         std::optional<std::string> doc) {
  MethodRecord m;
  m.ref = {cls, name, decl_line};
  m.file = file;
  m.body_span = span;
  m.body_text = join_lines(lines, static_cast<std::size_t>(span.first - 1),
                           static_cast<std::size_t>(span.length()));
  m.doc_text = std::move(doc);
  return m;
}

ProjectSnapshot index_manifest(const fs::path& root, const ProjectLayout& layout) {
  const auto& m = *layout.manifest;
  const auto& classes_json = require(m, "classes", "$");
  if (!classes_json.is_array() || classes_json.empty()) {
    throw invalid("$.classes", "expected non-empty array");
  }
  std::map<std::string, std::string> file_bytes;
  std::map<std::string, std::vector<std::pair<LineSpan, std::string>>> spans_by_file;
  std::vector<ClassRecord> classes;
  for (std::size_t ci = 0; ci < classes_json.size(); ++ci) {
    const auto path = fmt::format("$.classes[{}]", ci);
    const auto& cj = classes_json[ci];
    ClassRecord cls;
    cls.name = require_string(cj, "name", path);
    cls.file = require_string(cj, "file", path);
    if (!fs::is_regular_file(root / cls.file)) {
      throw invalid(path + ".file", fmt::format("file '{}' does not exist", cls.file));
    }
    auto [it, inserted] = file_bytes.try_emplace(cls.file);
    if (inserted) it->second = read_file(root / cls.file);
    cls.source_text = it->second;
    const auto lines = split_lines(cls.source_text);
    const auto& methods = require(cj, "methods", path);
    if (!methods.is_array() || methods.empty()) {
      throw invalid(path + ".methods", "expected non-empty array");
    }
    for (std::size_t mi = 0; mi < methods.size(); ++mi) {
      const auto mpath = fmt::format("{}.methods[{}]", path, mi);
      const auto& mj = methods[mi];
      const auto name = require_string(mj, "name", mpath);
      const int decl = require_line(mj, "decl_line", mpath);
      const int first = mj.contains("first_line") ? require_line(mj, "first_line", mpath) : decl;
      const int last = require_line(mj, "end_line", mpath);
      const LineSpan span{first, last};
      if (!span.contains(decl)) throw invalid(mpath, "span does not contain decl_line");
      if (last > static_cast<int>(lines.size())) {
        throw invalid(mpath + ".end_line", fmt::format("beyond end of {} ({} lines)", cls.file,
                                                       lines.size()));
      }
      for (const auto& [other, who] : spans_by_file[cls.file]) {
        if (other.overlaps(span)) {
          throw invalid(mpath, fmt::format("span {}-{} overlaps {}", first, last, who));
        }
      }
      spans_by_file[cls.file].emplace_back(span, fmt::format("{}@{}", cls.name, name));
      std::optional<std::string> doc;
      if (mj.contains("doc") && mj.at("doc").is_string()) doc = mj.at("doc").get<std::string>();
      try {
        validate_method_ref({cls.name, name, decl});
      } catch (const Error& e) {
        throw invalid(mpath, e.what());
      }
      cls.methods.push_back(make_method(cls.name, name, decl, span, cls.file, lines, doc));
    }
    classes.push_back(std::move(cls));
  }
  Sha256 hash;
  for (const auto& [file, bytes] : file_bytes) {
    hash.feed_field(file);
    hash.feed_field(bytes);
  }
  try {
    return ProjectSnapshot(layout.project_name, std::move(classes), hash.hex_digest());
  } catch (const Error& e) {
    throw invalid("$.classes", e.what());
  }
}

ProjectSnapshot index_builtin(const fs::path& root, const ProjectLayout& layout,
                              const std::vector<std::string>& extensions) {
  const auto files = source_files(root, layout.source_roots, extensions, layout.test_roots);
  if (files.empty()) {
    throw Error(ErrorCode::kIndexError,
                fmt::format("no source files with extensions [{}] under {}",
                            fmt::join(extensions, ", "), root.string()));
  }
  Sha256 hash;
  std::vector<ClassRecord> classes;
  for (const auto& path : files) {
    const auto rel = relative_string(path, root);
    const auto text = read_file(path);
    hash.feed_field(rel);
    hash.feed_field(text);
    const auto scan = scan_java_like(text);
    if (scan.brace_anomalies > kBraceRecoveryLimit) {
      throw Error(ErrorCode::kIndexError,
                  fmt::format("{}: {} unbalanced braces (limit {})", rel, scan.brace_anomalies,
                              kBraceRecoveryLimit));
    }
    if (scan.brace_anomalies > 0) {
      spdlog::warn("{}: recovered from {} unbalanced braces", rel, scan.brace_anomalies);
    }
    const auto lines = split_lines(text);
    for (const auto& type : scan.types) {
      if (type.methods.empty()) continue;
      ClassRecord cls{type.qualified_name, rel, {}, text};
      for (const auto& sm : type.methods) {
        cls.methods.push_back(make_method(cls.name, sm.name, sm.decl_line,
                                          {sm.decl_line, sm.last_line}, rel, lines, sm.doc));
      }
      classes.push_back(std::move(cls));
    }
  }
  return ProjectSnapshot(layout.project_name, std::move(classes), hash.hex_digest());
}

}  // namespace

IndexMode parse_index_mode(std::string_view text) {
  if (text == "manifest") return IndexMode::kManifest;
  if (text == "builtin") return IndexMode::kBuiltin;
  throw Error(ErrorCode::kInvalidInput, fmt::format("unknown index mode '{}'", text));
}

ProjectSnapshot index_tree(const fs::path& root, const IndexOptions& options) {
  if (!fs::is_directory(root)) {
    throw Error(ErrorCode::kIndexError, fmt::format("{} is not a directory", root.string()));
  }
  const bool manifest_mode = options.mode == IndexMode::kManifest;
  const auto layout = read_layout(root, manifest_mode);
  return manifest_mode ? index_manifest(root, layout)
                       : index_builtin(root, layout, options.extensions);
}

std::string snapshot_to_json(const ProjectSnapshot& snapshot) {
  json classes = json::array();
  for (const auto& c : snapshot.classes()) {
    json methods = json::array();
    for (const auto& m : c.methods) {
      methods.push_back({{"name", m.ref.method_name},
                         {"decl_line", m.ref.decl_line},
                         {"first_line", m.body_span.first},
                         {"end_line", m.body_span.last}});
    }
    classes.push_back({{"name", c.name}, {"file", c.file}, {"methods", std::move(methods)}});
  }
  json doc = {{"project_name", snapshot.project_name()},
              {"fingerprint", snapshot.fingerprint()},
              {"classes", std::move(classes)}};
  return doc.dump(1) + "\n";
}

TestSourceIndex TestSourceIndex::scan(const fs::path& root,
                                      const std::vector<std::string>& test_roots,
                                      const std::vector<std::string>& extensions) {
  TestSourceIndex index;
  for (const auto& path : source_files(root, test_roots, extensions, {})) {
    const auto text = read_file(path);
    const auto lines = split_lines(text);
    for (const auto& type : scan_java_like(text).types) {
      for (const auto& m : type.methods) {
        index.add(type.qualified_name, m.name,
                  join_lines(lines, static_cast<std::size_t>(m.decl_line - 1),
                             static_cast<std::size_t>(m.last_line - m.decl_line + 1)));
      }
    }
  }
  return index;
}

void TestSourceIndex::add(const std::string& qualified_class, const std::string& method,
                          std::string source) {
  auto full = qualified_class + "::" + method;
  auto [it, inserted] = by_full_name_.try_emplace(full, TestSource{full, std::move(source)});
  if (!inserted) {
    // Overloads share a name; keep them all in one source block.
    it->second.source += "\n\n" + source;
    return;
  }
  by_method_name_[method].push_back(std::move(full));
}

const TestSource* TestSourceIndex::find(std::string_view test_name) const {
  const auto it = by_full_name_.find(test_name);
  return it == by_full_name_.end() ? nullptr : &it->second;
}

std::vector<TestSource> TestSourceIndex::helper_closure(const TestSource& test,
                                                        int max_depth) const {
  std::vector<TestSource> out;
  std::set<std::string> seen{test.name};
  std::vector<const TestSource*> frontier{&test};
  for (int depth = 1; depth <= max_depth && !frontier.empty(); ++depth) {
    std::set<std::string> next_names;
    for (const auto* src : frontier) {
      for (const auto& ident : called_identifiers(src->source)) {
        const auto it = by_method_name_.find(ident);
        if (it == by_method_name_.end()) continue;
        for (const auto& full : it->second) {
          if (!seen.contains(full)) next_names.insert(full);
        }
      }
    }
    frontier.clear();
    for (const auto& name : next_names) {
      seen.insert(name);
      const auto* src = find(name);
      out.push_back(*src);
      frontier.push_back(src);
    }
  }
  return out;
}

std::vector<BugCase> load_bug_cases(const ProjectSnapshot& snapshot, const fs::path& root,
                                    LoadReport* report) {
  auto warn = [&](std::string msg) {
    spdlog::warn("{}", msg);
    if (report) report->warnings.push_back(std::move(msg));
  };
  const auto layout = read_layout(root, false);
  json bugs_json;
  const auto bugs_path = root / kBugsFileName;
  if (layout.manifest && layout.manifest->contains("bugs")) {
    bugs_json = layout.manifest->at("bugs");
  } else if (fs::exists(bugs_path)) {
    try {
      bugs_json = json::parse(read_file(bugs_path));
    } catch (const json::parse_error& e) {
      throw invalid("$.bugs", fmt::format("{} is not valid JSON: {}", kBugsFileName, e.what()));
    }
    if (bugs_json.is_object() && bugs_json.contains("bugs")) bugs_json = bugs_json.at("bugs");
  } else {
    throw invalid("$.bugs", "no bug entries found");
  }
  if (!bugs_json.is_array()) throw invalid("$.bugs", "expected array");

  const auto tests = TestSourceIndex::scan(root, layout.test_roots, {".java"});
  std::vector<BugCase> cases;
  std::set<std::string> ids;
  for (std::size_t bi = 0; bi < bugs_json.size(); ++bi) {
    const auto path = fmt::format("$.bugs[{}]", bi);
    const auto& bj = bugs_json[bi];
    BugCase bug;
    bug.bug_id = require_string(bj, "id", path);
    if (!ids.insert(bug.bug_id).second) throw invalid(path + ".id", "duplicate bug id");
    bug.error_message = bj.value("error_message", std::string{});

    if (bj.contains("stack_trace")) {
      const auto& frames = bj.at("stack_trace");
      if (!frames.is_array()) throw invalid(path + ".stack_trace", "expected array");
      for (std::size_t fi = 0; fi < frames.size(); ++fi) {
        const auto fpath = fmt::format("{}.stack_trace[{}]", path, fi);
        StackFrame f;
        f.class_name = require_string(frames[fi], "class", fpath);
        f.method_name = require_string(frames[fi], "method", fpath);
        f.line = frames[fi].value("line", 0);
        if (f.class_name.empty() || f.method_name.empty()) {
          throw invalid(fpath, "frame needs class and method names");
        }
        f.external = snapshot.find_class(f.class_name) == nullptr;
        bug.stack_trace.push_back(std::move(f));
      }
    }

    const auto& failing = require(bj, "failing_tests", path);
    if (!failing.is_array() || failing.empty()) {
      throw invalid(path + ".failing_tests", "at least one failing test is required");
    }
    for (std::size_t ti = 0; ti < failing.size(); ++ti) {
      const auto tpath = fmt::format("{}.failing_tests[{}]", path, ti);
      const auto& tj = failing[ti];
      FailingTest ft;
      if (tj.is_string()) {
        ft.name = tj.get<std::string>();
      } else {
        ft.name = require_string(tj, "name", tpath);
        ft.source = tj.value("source", std::string{});
      }
      const TestSource* indexed = tests.find(ft.name);
      if (ft.source.empty() && indexed) ft.source = indexed->source;
      if (ft.source.empty()) {
        warn(fmt::format("{}: source for failing test {} not found", bug.bug_id, ft.name));
      }
      ft.helpers = tests.helper_closure({ft.name, ft.source}, kHelperClosureDepth);
      bug.failing_tests.push_back(std::move(ft));
    }
    std::sort(bug.failing_tests.begin(), bug.failing_tests.end(),
              [](const auto& a, const auto& b) { return a.name < b.name; });

    auto resolve_cov = [&](const json& ref_json, const std::string& rpath)
        -> std::optional<MethodRef> {
      if (!ref_json.is_string()) throw invalid(rpath, "expected method reference string");
      MethodRef ref;
      try {
        ref = parse_method_ref(ref_json.get<std::string>());
      } catch (const Error& e) {
        throw invalid(rpath, e.what());
      }
      if (!snapshot.find_exact(ref)) {
        warn(fmt::format("{}: {} UnresolvedCoverage: {} is not in the snapshot; dropped",
                         bug.bug_id, rpath, ref.str()));
        return std::nullopt;
      }
      return ref;
    };

    if (bj.contains("tests")) {
      const auto& tj = bj.at("tests");
      if (!tj.is_array()) throw invalid(path + ".tests", "expected array");
      for (std::size_t ti = 0; ti < tj.size(); ++ti) {
        const auto tpath = fmt::format("{}.tests[{}]", path, ti);
        TestOutcome outcome;
        outcome.name = require_string(tj[ti], "name", tpath);
        const auto verdict = require_string(tj[ti], "outcome", tpath);
        if (verdict != "pass" && verdict != "fail") {
          throw invalid(tpath + ".outcome", "expected \"pass\" or \"fail\"");
        }
        outcome.passed = verdict == "pass";
        if (tj[ti].contains("covers")) {
          const auto& cov = tj[ti].at("covers");
          for (std::size_t k = 0; k < cov.size(); ++k) {
            if (auto ref = resolve_cov(cov[k], fmt::format("{}.covers[{}]", tpath, k))) {
              outcome.covers.push_back(*ref);
            }
          }
        }
        bug.coverage.tests.push_back(std::move(outcome));
      }
    }
    if (bj.contains("covered")) {
      const auto& cov = bj.at("covered");
      for (std::size_t k = 0; k < cov.size(); ++k) {
        if (auto ref = resolve_cov(cov[k], fmt::format("{}.covered[{}]", path, k))) {
          bug.coverage.covered.insert(*ref);
        }
      }
    } else {
      for (const auto& t : bug.coverage.tests) {
        if (!t.passed) bug.coverage.covered.insert(t.covers.begin(), t.covers.end());
      }
    }
    if (bug.coverage.tests.empty()) {
      for (const auto& ft : bug.failing_tests) {
        bug.coverage.tests.push_back(
            {ft.name, false, {bug.coverage.covered.begin(), bug.coverage.covered.end()}});
      }
    }
    if (bug.coverage.failing_test_count() == 0) {
      throw invalid(path + ".tests", "coverage lists no failing test");
    }

    for (const auto& r : string_list(bj, "ground_truth", {}, path)) {
      MethodRef ref;
      try {
        ref = parse_method_ref(r);
      } catch (const Error& e) {
        throw invalid(path + ".ground_truth", e.what());
      }
      if (!snapshot.find_exact(ref)) {
        throw invalid(path + ".ground_truth", fmt::format("{} is not in the snapshot", r));
      }
      bug.ground_truth.insert(ref);
    }
    if (bj.contains("patches")) {
      const auto& pj = bj.at("patches");
      if (!pj.is_object()) throw invalid(path + ".patches", "expected object");
      for (const auto& [key, body] : pj.items()) {
        const auto ref = parse_method_ref(key);
        if (!bug.ground_truth.contains(ref)) {
          throw invalid(path + ".patches", fmt::format("{} is not a ground-truth method", key));
        }
        bug.patched_bodies[ref] = body.get<std::string>();
      }
    }
    cases.push_back(std::move(bug));
  }
  return cases;
}

}  // namespace memfl
