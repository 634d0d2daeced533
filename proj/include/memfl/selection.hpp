#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace memfl {

/// Pulls a JSON array of strings out of a model reply. Tries, in order: a
/// ```json fenced block, the first bracketed array that parses as JSON, and
/// finally the quoted strings inside the first [...] span. Non-string
/// elements are skipped. Returns nullopt when no array is present.
std::optional<std::vector<std::string>> extract_string_array(std::string_view reply);

/// Reads a `CAP: <n>` directive (case-insensitive, one per line) from guidance text.
std::optional<int> guidance_cap(std::string_view guidance);

inline constexpr std::string_view kNoUpdateSentinel = "NO_UPDATE";

/// True when the reply starts with the NO_UPDATE sentinel (after whitespace
/// and optional backticks).
bool is_no_update(std::string_view reply);

}  // namespace memfl
