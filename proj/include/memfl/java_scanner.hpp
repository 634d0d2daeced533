#pragma once

#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace memfl {

/// A method found by the builtin scanner. Lines are 1-based and inclusive.
struct ScannedMethod {
  std::string name;
  int decl_line = 0;
  int last_line = 0;
  std::optional<std::string> doc;
};

struct ScannedType {
  std::string qualified_name;  // package.Outer$Inner
  int decl_line = 0;
  std::vector<ScannedMethod> methods;
};

struct ScanResult {
  std::string package_name;
  std::vector<ScannedType> types;  // in order of appearance
  int brace_anomalies = 0;  // unmatched '}' plus frames left open at EOF
};

/// Maximum brace anomalies per file before indexing gives up.
inline constexpr int kBraceRecoveryLimit = 2;

/// Scans brace-delimited Java-like source. Handles nested braces, comments,
/// string/char/text-block literals and annotations without bodies. Methods
/// without a body (abstract, interface) are skipped; anonymous and local
/// classes are not reported.
ScanResult scan_java_like(std::string_view source);

/// Replaces comments and literal contents with spaces, preserving newlines
/// and offsets.
std::string blank_comments_and_literals(std::string_view source);

/// Identifiers used as call targets (`name(`) in `code`, excluding keywords
/// and constructor calls after `new`.
std::set<std::string> called_identifiers(std::string_view code);

}  // namespace memfl
