#pragma once

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "memfl/core.hpp"
#include "memfl/gateway.hpp"
#include "memfl/memory_store.hpp"
#include "memfl/source_index.hpp"

namespace memfl::testing {

inline std::filesystem::path mini_dir() { return MEMFL_FIXTURE_DIR; }
inline std::filesystem::path golden_dir() { return MEMFL_GOLDEN_DIR; }
inline std::filesystem::path data_dir() { return MEMFL_DATA_DIR; }

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Fresh scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("memfl-test-" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

/// Compares `text` with a committed golden file. With MEMFL_UPDATE_GOLDEN=1
/// the file is rewritten instead and the check passes.
inline bool golden_matches(const std::string& rel, const std::string& text) {
  const auto path = golden_dir() / rel;
  if (const char* u = std::getenv("MEMFL_UPDATE_GOLDEN"); u && std::string(u) == "1") {
    std::filesystem::create_directories(path.parent_path());
    std::ofstream(path, std::ios::binary) << text;
    return true;
  }
  return std::filesystem::exists(path) && read_file(path) == text;
}

/// User-message text of every exchange, in tag order.
inline std::string prompt_dump(std::vector<ChatExchange> ledger) {
  std::sort(ledger.begin(), ledger.end(),
            [](const auto& a, const auto& b) { return a.request.tag < b.request.tag; });
  std::string out;
  for (const auto& ex : ledger) {
    out += "===== " + ex.request.tag + " =====\n";
    out += ex.request.messages.back().content + "\n";
  }
  return out;
}

/// Class whose methods are two-line stubs declared at the given lines.
inline ClassRecord make_class(const std::string& name,
                              const std::vector<std::pair<std::string, int>>& methods) {
  ClassRecord cls;
  cls.name = name;
  cls.file = name + ".java";
  for (const auto& [m, line] : methods) {
    MethodRecord rec;
    rec.ref = {name, m, line};
    rec.file = cls.file;
    rec.body_span = {line, line + 1};
    rec.body_text = "void " + m + "() {\n}";
    cls.methods.push_back(rec);
    cls.source_text += rec.body_text + "\n";
  }
  return cls;
}

inline ProjectSnapshot make_snapshot(std::vector<ClassRecord> classes,
                                     const std::string& project = "toy") {
  return ProjectSnapshot(project, std::move(classes), "fp-" + project);
}

/// Rules of the mini script, with `front` taking precedence.
inline std::vector<ScriptRule> fixture_rules(std::vector<ScriptRule> front = {}) {
  const auto doc = nlohmann::json::parse(read_file(mini_dir() / "script.json"));
  const std::chrono::microseconds latency(doc.value("default_latency_ms", 0) * 1000);
  for (auto& r : front)
    if (!r.latency) r.latency = latency;
  for (const auto& rj : doc.at("rules")) {
    ScriptRule r{rj.at("match"), rj.at("reply"), rj.value("sticky", false), {}, {}, latency,
                 rj.value("expand", false)};
    front.push_back(std::move(r));
  }
  return front;
}

inline Gateway rules_gateway(std::vector<ScriptRule> rules) {
  return Gateway(std::make_shared<ScriptedProvider>(std::move(rules)), PriceTable::defaults());
}

/// The bundled mini project, loaded once.
struct Mini {
  ProjectSnapshot snapshot;
  std::vector<BugCase> bugs;
  ExternalMemory memory;

  const BugCase& bug(const std::string& id) const {
    for (const auto& b : bugs)
      if (b.bug_id == id) return b;
    throw std::runtime_error("no bug " + id);
  }
};

inline const Mini& mini() {
  static const Mini m = [] {
    Mini x{index_tree(mini_dir()), {}, {}};
    x.bugs = load_bug_cases(x.snapshot, mini_dir());
    x.memory = load_memory(mini_dir() / "memory.json");
    return x;
  }();
  return m;
}

}  // namespace memfl::testing
