#include "memfl/core.hpp"

#include <algorithm>
#include <charconv>
#include <cstdlib>

#include <fmt/format.h>

namespace memfl {

std::string_view error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kMalformedRef: return "MalformedRef";
    case ErrorCode::kNotFound: return "NotFound";
    case ErrorCode::kAmbiguous: return "Ambiguous";
    case ErrorCode::kManifestInvalid: return "ManifestInvalid";
    case ErrorCode::kIndexError: return "IndexError";
    case ErrorCode::kUnresolvedCoverage: return "UnresolvedCoverage";
    case ErrorCode::kValidation: return "ValidationError";
    case ErrorCode::kProviderUnavailable: return "ProviderUnavailable";
    case ErrorCode::kCassetteMiss: return "CassetteMiss";
    case ErrorCode::kScriptExhausted: return "ScriptExhausted";
    case ErrorCode::kInvalidInput: return "InvalidInput";
    case ErrorCode::kCorruptMemoryFile: return "CorruptMemoryFile";
    case ErrorCode::kUnparseableSelection: return "UnparseableSelection";
    case ErrorCode::kMissingPatch: return "MissingPatch";
    case ErrorCode::kInvalidBatch: return "InvalidBatch";
    case ErrorCode::kLeakage: return "Leakage";
    case ErrorCode::kMissingTruth: return "MissingTruth";
    case ErrorCode::kConfig: return "ConfigError";
    case ErrorCode::kIo: return "IoError";
  }
  return "Unknown";
}

bool is_provider_error(ErrorCode code) {
  return code == ErrorCode::kProviderUnavailable || code == ErrorCode::kCassetteMiss ||
         code == ErrorCode::kScriptExhausted;
}

std::string MethodRef::str() const {
  return fmt::format("{}@{}@{}", class_name, method_name, decl_line);
}

namespace {

bool bad_part(std::string_view part) {
  if (part.empty()) return true;
  return std::any_of(part.begin(), part.end(), [](char c) {
    return c == '@' || c == ' ' || c == '\t' || c == '\n' || c == '\r';
  });
}

}  // namespace

void validate_method_ref(const MethodRef& ref) {
  if (bad_part(ref.class_name) || bad_part(ref.method_name) || ref.decl_line < 1) {
    throw Error(ErrorCode::kMalformedRef,
                fmt::format("invalid method reference '{}'", ref.str()));
  }
}

MethodRef parse_method_ref(std::string_view text) {
  auto malformed = [&](std::string_view why) {
    return Error(ErrorCode::kMalformedRef,
                 fmt::format("malformed method reference '{}': {}", text, why));
  };
  const auto first = text.find('@');
  if (first == std::string_view::npos) throw malformed("expected class@method@line");
  const auto second = text.find('@', first + 1);
  if (second == std::string_view::npos) throw malformed("expected class@method@line");
  if (text.find('@', second + 1) != std::string_view::npos) throw malformed("too many parts");

  MethodRef ref;
  ref.class_name = std::string(text.substr(0, first));
  ref.method_name = std::string(text.substr(first + 1, second - first - 1));
  const auto line = text.substr(second + 1);
  if (bad_part(ref.class_name) || bad_part(ref.method_name)) throw malformed("empty part");
  int value = 0;
  const auto [ptr, ec] = std::from_chars(line.data(), line.data() + line.size(), value);
  if (line.empty() || ec != std::errc() || ptr != line.data() + line.size()) {
    throw malformed("line is not an integer");
  }
  if (value < 1) throw malformed("line must be >= 1");
  ref.decl_line = value;
  return ref;
}

std::string MethodRecord::signature() const {
  const auto nl = body_text.find('\n');
  return trim(std::string_view(body_text).substr(0, nl));
}

std::string_view ClassRecord::simple_name() const {
  const auto dot = name.rfind('.');
  return dot == std::string::npos ? std::string_view(name)
                                  : std::string_view(name).substr(dot + 1);
}

ProjectSnapshot::ProjectSnapshot(std::string project_name, std::vector<ClassRecord> classes,
                                 std::string fingerprint)
    : project_name_(std::move(project_name)),
      classes_(std::move(classes)),
      fingerprint_(std::move(fingerprint)) {
  std::sort(classes_.begin(), classes_.end(),
            [](const ClassRecord& a, const ClassRecord& b) { return a.name < b.name; });
  for (std::size_t i = 0; i < classes_.size(); ++i) {
    auto& cls = classes_[i];
    if (cls.methods.empty()) {
      throw Error(ErrorCode::kValidation, fmt::format("class {} has no methods", cls.name));
    }
    std::stable_sort(cls.methods.begin(), cls.methods.end(),
                     [](const MethodRecord& a, const MethodRecord& b) {
                       return a.ref.decl_line < b.ref.decl_line;
                     });
    std::set<std::pair<std::string, int>> seen;
    for (const auto& m : cls.methods) {
      validate_method_ref(m.ref);
      if (m.ref.class_name != cls.name) {
        throw Error(ErrorCode::kValidation,
                    fmt::format("method {} filed under class {}", m.ref.str(), cls.name));
      }
      if (!m.body_span.contains(m.ref.decl_line)) {
        throw Error(ErrorCode::kValidation,
                    fmt::format("span of {} does not contain its declaration", m.ref.str()));
      }
      if (!seen.emplace(m.ref.method_name, m.ref.decl_line).second) {
        throw Error(ErrorCode::kValidation, fmt::format("duplicate method {}", m.ref.str()));
      }
    }
    if (!by_name_.emplace(cls.name, i).second) {
      throw Error(ErrorCode::kValidation, fmt::format("duplicate class {}", cls.name));
    }
  }
}

std::size_t ProjectSnapshot::method_count() const {
  std::size_t n = 0;
  for (const auto& c : classes_) n += c.methods.size();
  return n;
}

const ClassRecord* ProjectSnapshot::find_class(std::string_view name) const {
  const auto it = by_name_.find(name);
  return it == by_name_.end() ? nullptr : &classes_[it->second];
}

const ClassRecord* ProjectSnapshot::find_class_lenient(std::string_view name) const {
  if (const auto* exact = find_class(name)) return exact;
  const ClassRecord* found = nullptr;
  for (const auto& c : classes_) {
    if (c.simple_name() == name) {
      if (found) return nullptr;
      found = &c;
    }
  }
  return found;
}

const MethodRecord* ProjectSnapshot::find_exact(const MethodRef& ref) const {
  const auto* cls = find_class(ref.class_name);
  if (!cls) return nullptr;
  for (const auto& m : cls->methods) {
    if (m.ref == ref) return &m;
  }
  return nullptr;
}

namespace {

const MethodRecord* nearest(const std::vector<const MethodRecord*>& same_name, int line) {
  const MethodRecord* best = nullptr;
  for (const auto* m : same_name) {
    if (!best) {
      best = m;
      continue;
    }
    const int d = std::abs(m->ref.decl_line - line);
    const int best_d = std::abs(best->ref.decl_line - line);
    if (d < best_d || (d == best_d && m->ref.decl_line < best->ref.decl_line)) best = m;
  }
  return best;
}

}  // namespace

const MethodRecord& resolve_ref(const ProjectSnapshot& snapshot, const MethodRef& ref,
                                bool fuzzy) {
  const auto* cls = fuzzy ? snapshot.find_class_lenient(ref.class_name)
                          : snapshot.find_class(ref.class_name);
  if (!cls) {
    throw Error(ErrorCode::kNotFound, fmt::format("no class for {}", ref.str()));
  }
  std::vector<const MethodRecord*> same_name;
  for (const auto& m : cls->methods) {
    if (m.ref.method_name != ref.method_name) continue;
    if (m.ref.decl_line == ref.decl_line) return m;
    same_name.push_back(&m);
  }
  if (same_name.empty()) {
    throw Error(ErrorCode::kNotFound, fmt::format("no method for {}", ref.str()));
  }
  if (!fuzzy) {
    if (same_name.size() > 1) {
      throw Error(ErrorCode::kAmbiguous,
                  fmt::format("{} matches {} overloads by name but none by line", ref.str(),
                              same_name.size()));
    }
    throw Error(ErrorCode::kNotFound, fmt::format("no method at {}", ref.str()));
  }
  return *nearest(same_name, ref.decl_line);
}

const MethodRecord* resolve_among(const std::vector<const MethodRecord*>& candidates,
                                  const MethodRef& ref, bool fuzzy) {
  std::vector<const MethodRecord*> same_name;
  for (const auto* m : candidates) {
    if (m->ref.method_name != ref.method_name) continue;
    const bool class_match = m->ref.class_name == ref.class_name;
    if (class_match && m->ref.decl_line == ref.decl_line) return m;
    if (class_match) same_name.push_back(m);
  }
  if (same_name.empty() && fuzzy) {
    // Model may drop the package prefix; accept a matching simple class name.
    for (const auto* m : candidates) {
      if (m->ref.method_name != ref.method_name) continue;
      const auto& cn = m->ref.class_name;
      const auto dot = cn.rfind('.');
      if (dot != std::string::npos && std::string_view(cn).substr(dot + 1) == ref.class_name) {
        same_name.push_back(m);
      }
    }
    std::set<std::string> classes;
    for (const auto* m : same_name) classes.insert(m->ref.class_name);
    if (classes.size() > 1) return nullptr;
  }
  if (same_name.empty() || !fuzzy) return nullptr;
  return nearest(same_name, ref.decl_line);
}

int CoverageProfile::failing_test_count() const {
  return static_cast<int>(
      std::count_if(tests.begin(), tests.end(), [](const auto& t) { return !t.passed; }));
}

int CoverageProfile::passing_test_count() const {
  return static_cast<int>(tests.size()) - failing_test_count();
}

const FailingTest& BugCase::primary_test() const {
  if (failing_tests.empty()) {
    throw Error(ErrorCode::kValidation, fmt::format("bug {} has no failing test", bug_id));
  }
  return *std::min_element(failing_tests.begin(), failing_tests.end(),
                           [](const auto& a, const auto& b) { return a.name < b.name; });
}

std::string_view step_name(PipelineStep step) {
  switch (step) {
    case PipelineStep::kReview: return "review";
    case PipelineStep::kCondense1: return "condense1";
    case PipelineStep::kCondense2: return "condense2";
    case PipelineStep::kCondense3: return "condense3";
    case PipelineStep::kConfirm: return "confirm";
  }
  return "unknown";
}

PipelineStep parse_step(std::string_view name) {
  for (auto s : kAllSteps) {
    if (step_name(s) == name) return s;
  }
  throw Error(ErrorCode::kInvalidInput, fmt::format("unknown pipeline step '{}'", name));
}

TokenUsage& TokenUsage::operator+=(const TokenUsage& o) {
  calls += o.calls;
  prompt_tokens += o.prompt_tokens;
  completion_tokens += o.completion_tokens;
  cost_micros += o.cost_micros;
  latency += o.latency;
  return *this;
}

std::vector<std::string> split_lines(std::string_view text) {
  std::vector<std::string> lines;
  std::size_t start = 0;
  while (start < text.size()) {
    const auto nl = text.find('\n', start);
    if (nl == std::string_view::npos) {
      lines.emplace_back(text.substr(start));
      break;
    }
    lines.emplace_back(text.substr(start, nl - start));
    start = nl + 1;
  }
  return lines;
}

std::string join_lines(const std::vector<std::string>& lines, std::size_t first,
                       std::size_t count) {
  std::string out;
  for (std::size_t i = first; i < first + count && i < lines.size(); ++i) {
    if (i != first) out += '\n';
    out += lines[i];
  }
  return out;
}

std::string trim(std::string_view s) {
  const auto* ws = " \t\r\n";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(ws);
  return std::string(s.substr(b, e - b + 1));
}

}  // namespace memfl
