#pragma once

#include <array>
#include <chrono>
#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "memfl/error.hpp"

namespace memfl {

/// Identifies a method as (class, method, declaration line). Overloads are
/// distinguished by line only; the canonical text form is `cls@method@line`.
struct MethodRef {
  std::string class_name;
  std::string method_name;
  int decl_line = 0;

  std::string str() const;
  auto operator<=>(const MethodRef&) const = default;
};

/// Parses `class@method@line`. Throws Error(kMalformedRef).
MethodRef parse_method_ref(std::string_view text);

/// Validates the MethodRef invariants. Throws Error(kMalformedRef).
void validate_method_ref(const MethodRef& ref);

struct LineSpan {
  int first = 0;  // inclusive, 1-based
  int last = 0;   // inclusive

  int length() const { return last - first + 1; }
  bool contains(int line) const { return line >= first && line <= last; }
  bool overlaps(const LineSpan& other) const {
    return first <= other.last && other.first <= last;
  }
  auto operator<=>(const LineSpan&) const = default;
};

struct MethodRecord {
  MethodRef ref;
  std::string file;
  LineSpan body_span;
  std::string body_text;  // exactly body_span.length() lines, '\n'-joined
  std::optional<std::string> doc_text;

  /// First line of the body, trimmed; used when the body is too large to show.
  std::string signature() const;
};

struct ClassRecord {
  std::string name;
  std::string file;
  std::vector<MethodRecord> methods;
  std::string source_text;

  /// Simple name: the part after the last '.'.
  std::string_view simple_name() const;
};

/// Immutable indexed view of a project source tree.
class ProjectSnapshot {
 public:
  ProjectSnapshot() = default;
  /// Sorts classes by name and methods by decl_line; validates invariants.
  /// `fingerprint` is the content hash of the indexed source bytes.
  ProjectSnapshot(std::string project_name, std::vector<ClassRecord> classes,
                  std::string fingerprint);

  const std::string& project_name() const { return project_name_; }
  const std::vector<ClassRecord>& classes() const { return classes_; }
  const std::string& fingerprint() const { return fingerprint_; }
  std::size_t method_count() const;

  const ClassRecord* find_class(std::string_view name) const;
  /// Like find_class, then falls back to a unique simple-name match.
  const ClassRecord* find_class_lenient(std::string_view name) const;
  const MethodRecord* find_exact(const MethodRef& ref) const;

 private:
  std::string project_name_;
  std::vector<ClassRecord> classes_;
  std::string fingerprint_;
  std::map<std::string, std::size_t, std::less<>> by_name_;
};

/// Resolves `ref` against the snapshot. With `fuzzy`, a miss on the exact
/// triple falls back to the same (class, method) at the nearest decl_line,
/// ties toward the smaller line. Throws Error(kNotFound | kAmbiguous).
const MethodRecord& resolve_ref(const ProjectSnapshot& snapshot, const MethodRef& ref,
                                bool fuzzy);

/// Same resolution rules restricted to an explicit candidate list.
const MethodRecord* resolve_among(const std::vector<const MethodRecord*>& candidates,
                                  const MethodRef& ref, bool fuzzy);

struct StackFrame {
  std::string class_name;
  std::string method_name;
  int line = 0;  // 0 when unknown (native or missing debug info)
  bool external = false;  // class is not part of the snapshot
};

struct TestOutcome {
  std::string name;
  bool passed = false;
  std::vector<MethodRef> covers;
};

struct CoverageProfile {
  std::set<MethodRef> covered;  // methods executed by the failing run
  std::vector<TestOutcome> tests;

  bool is_covered(const MethodRef& ref) const { return covered.contains(ref); }
  int failing_test_count() const;
  int passing_test_count() const;
};

struct TestSource {
  std::string name;  // `pkg.Class::method`
  std::string source;
};

struct FailingTest {
  std::string name;
  std::string source;
  std::vector<TestSource> helpers;  // transitively called test methods
};

struct BugCase {
  std::string bug_id;
  std::string error_message;
  std::vector<StackFrame> stack_trace;  // innermost frame first
  std::vector<FailingTest> failing_tests;  // sorted by name
  CoverageProfile coverage;
  std::set<MethodRef> ground_truth;
  std::map<MethodRef, std::string> patched_bodies;

  /// The single failing test shown to the model: smallest name.
  const FailingTest& primary_test() const;
};

enum class PipelineStep { kReview = 0, kCondense1, kCondense2, kCondense3, kConfirm };

inline constexpr std::array<PipelineStep, 5> kAllSteps = {
    PipelineStep::kReview, PipelineStep::kCondense1, PipelineStep::kCondense2,
    PipelineStep::kCondense3, PipelineStep::kConfirm};

std::string_view step_name(PipelineStep step);
PipelineStep parse_step(std::string_view name);
inline bool is_condense_step(PipelineStep s) {
  return s == PipelineStep::kCondense1 || s == PipelineStep::kCondense2 ||
         s == PipelineStep::kCondense3;
}

struct StaticMemory {
  std::string project_summary;
  std::map<std::string, std::string> class_summaries;
  std::map<std::string, std::string> class_hashes;  // content hash per summarized class

  bool operator==(const StaticMemory&) const = default;
};

struct RefinementEvent {
  PipelineStep step = PipelineStep::kReview;
  int version = 0;  // version after the event
  int iteration = 0;
  std::vector<std::string> bug_ids;
  std::string note;

  bool operator==(const RefinementEvent&) const = default;
};

struct ExternalMemory {
  StaticMemory static_part;
  std::array<std::string, 5> dynamic_part{};
  int version = 0;
  std::vector<RefinementEvent> provenance;
  std::string snapshot_fingerprint;

  const std::string& guidance(PipelineStep step) const {
    return dynamic_part[static_cast<std::size_t>(step)];
  }
  bool operator==(const ExternalMemory&) const = default;
};

struct TokenUsage {
  std::int64_t calls = 0;
  std::int64_t prompt_tokens = 0;
  std::int64_t completion_tokens = 0;
  std::int64_t cost_micros = 0;
  std::chrono::microseconds latency{0};

  TokenUsage& operator+=(const TokenUsage& o);
};

struct Intermediates {
  std::string bug_review;
  std::vector<std::string> prefiltered_classes;
  std::vector<std::string> kept_classes_1;
  std::vector<std::string> kept_classes_2;
  std::vector<MethodRef> kept_methods;
};

struct RankedSuspects {
  std::string bug_id;
  std::vector<MethodRef> ranking;
  Intermediates intermediates;
  TokenUsage usage;
  std::chrono::microseconds wall_time{0};
  std::set<std::string> degraded_steps;
  std::vector<std::string> warnings;

  bool degraded() const { return !degraded_steps.empty(); }
};

/// Splits text into lines on '\n' (a trailing newline does not add a line).
std::vector<std::string> split_lines(std::string_view text);
std::string join_lines(const std::vector<std::string>& lines, std::size_t first,
                       std::size_t count);
std::string trim(std::string_view s);

}  // namespace memfl
