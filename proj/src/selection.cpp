#include "memfl/selection.hpp"

#include <regex>

#include "json.hpp"
#include "memfl/core.hpp"

namespace memfl {

using nlohmann::json;

namespace {

std::optional<std::vector<std::string>> parse_array(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error&) {
    return std::nullopt;
  }
  if (!j.is_array()) return std::nullopt;
  std::vector<std::string> out;
  for (const auto& e : j) {
    if (e.is_string()) out.push_back(trim(e.get<std::string>()));
  }
  return out;
}

// Index of the bracket closing the one at `open`, ignoring brackets in strings.
std::size_t matching_bracket(std::string_view s, std::size_t open) {
  int depth = 0;
  bool in_str = false;
  for (std::size_t i = open; i < s.size(); ++i) {
    const char c = s[i];
    if (in_str) {
      if (c == '\\') ++i;
      else if (c == '"') in_str = false;
      continue;
    }
    if (c == '"') in_str = true;
    else if (c == '[') ++depth;
    else if (c == ']' && --depth == 0) return i;
  }
  return std::string_view::npos;
}

}  // namespace

std::optional<std::vector<std::string>> extract_string_array(std::string_view reply) {
  static const std::regex fence(R"(```[ \t]*(?:json|JSON)?[ \t]*\r?\n([\s\S]*?)```)");
  const std::string text(reply);
  for (std::sregex_iterator it(text.begin(), text.end(), fence), end; it != end; ++it) {
    if (auto arr = parse_array(trim((*it)[1].str()))) return arr;
  }
  for (auto open = text.find('['); open != std::string::npos; open = text.find('[', open + 1)) {
    const auto close = matching_bracket(text, open);
    if (close == std::string::npos) break;
    if (auto arr = parse_array(std::string_view(text).substr(open, close - open + 1))) return arr;
  }
  // Lenient: quoted tokens inside the first [...] even if the JSON is broken.
  const auto open = text.find('[');
  if (open == std::string::npos) return std::nullopt;
  auto close = text.find(']', open);
  if (close == std::string::npos) close = text.size();
  static const std::regex quoted(R"re("([^"\n]+)"|'([^'\n]+)')re");
  const std::string inner = text.substr(open + 1, close - open - 1);
  std::vector<std::string> out;
  for (std::sregex_iterator it(inner.begin(), inner.end(), quoted), end; it != end; ++it) {
    out.push_back(trim((*it)[1].matched ? (*it)[1].str() : (*it)[2].str()));
  }
  if (out.empty() && trim(inner).size() > 0) return std::nullopt;
  return out;
}

std::optional<int> guidance_cap(std::string_view guidance) {
  static const std::regex cap(R"((?:^|\n)[ \t*-]*[Cc][Aa][Pp][ \t]*[:=][ \t]*(\d{1,4}))");
  const std::string text(guidance);
  std::smatch m;
  if (std::regex_search(text, m, cap)) {
    const int v = std::stoi(m[1].str());
    if (v > 0) return v;
  }
  return std::nullopt;
}

bool is_no_update(std::string_view reply) {
  const auto t = trim(reply);
  std::string_view s(t);
  while (!s.empty() && (s.front() == '`' || s.front() == '*')) s.remove_prefix(1);
  return s.substr(0, kNoUpdateSentinel.size()) == kNoUpdateSentinel;
}

}  // namespace memfl
