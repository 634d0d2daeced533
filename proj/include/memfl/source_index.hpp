#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "memfl/core.hpp"

namespace memfl {

enum class IndexMode { kManifest, kBuiltin };

IndexMode parse_index_mode(std::string_view text);

inline constexpr std::string_view kManifestFileName = "manifest.json";
inline constexpr std::string_view kBugsFileName = "bugs.json";

struct IndexOptions {
  IndexMode mode = IndexMode::kManifest;
  std::vector<std::string> extensions{".java"};
};

/// Builds a snapshot of the project at `root`. Manifest mode reads
/// `manifest.json`; builtin mode scans source files with the given
/// extensions. Throws Error(kManifestInvalid | kIndexError).
ProjectSnapshot index_tree(const std::filesystem::path& root, const IndexOptions& options = {});

/// Compact JSON description of a snapshot (classes, methods, spans, fingerprint).
std::string snapshot_to_json(const ProjectSnapshot& snapshot);

struct LoadReport {
  std::vector<std::string> warnings;
};

/// Loads every bug entry from the manifest (or `bugs.json`). Coverage entries
/// that do not resolve are dropped with a warning; structural problems throw
/// Error(kManifestInvalid).
std::vector<BugCase> load_bug_cases(const ProjectSnapshot& snapshot,
                                    const std::filesystem::path& root,
                                    LoadReport* report = nullptr);

/// Test methods found under the test roots, addressable as `pkg.Class::method`.
class TestSourceIndex {
 public:
  static TestSourceIndex scan(const std::filesystem::path& root,
                              const std::vector<std::string>& test_roots,
                              const std::vector<std::string>& extensions);

  void add(const std::string& qualified_class, const std::string& method, std::string source);
  const TestSource* find(std::string_view test_name) const;

  /// Test methods reachable from `test` by name reference, breadth first,
  /// up to `max_depth` call levels. Ordered by (depth, name).
  std::vector<TestSource> helper_closure(const TestSource& test, int max_depth = 3) const;

  std::size_t size() const { return by_full_name_.size(); }

 private:
  std::map<std::string, TestSource, std::less<>> by_full_name_;
  std::map<std::string, std::vector<std::string>, std::less<>> by_method_name_;
};

inline constexpr int kHelperClosureDepth = 3;

}  // namespace memfl
