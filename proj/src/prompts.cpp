#include "memfl/prompts.hpp"

#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "memfl/error.hpp"

namespace memfl {

namespace detail {
const std::map<std::string, std::string>& builtin_prompt_templates();
}

namespace {

enum class NodeKind { kText, kVar, kOpen, kInverted, kClose };

struct Node {
  NodeKind kind;
  std::string text;  // literal text or variable name
};

bool all_space(std::string_view s) {
  return s.find_first_not_of(" \t\r") == std::string_view::npos;
}

std::vector<Node> lex(std::string_view t) {
  std::vector<Node> nodes;
  std::size_t pos = 0;
  auto push_text = [&](std::string_view s) {
    if (s.empty()) return;
    if (!nodes.empty() && nodes.back().kind == NodeKind::kText) {
      nodes.back().text += s;
    } else {
      nodes.push_back({NodeKind::kText, std::string(s)});
    }
  };
  while (pos < t.size()) {
    const auto open = t.find("{{", pos);
    if (open == std::string_view::npos) {
      push_text(t.substr(pos));
      break;
    }
    const auto close = t.find("}}", open + 2);
    if (close == std::string_view::npos) {
      throw Error(ErrorCode::kInvalidInput, "unterminated '{{' in prompt template");
    }
    std::string_view tag = t.substr(open + 2, close - open - 2);
    NodeKind kind = NodeKind::kVar;
    if (!tag.empty() && (tag[0] == '#' || tag[0] == '^' || tag[0] == '/')) {
      kind = tag[0] == '#' ? NodeKind::kOpen : tag[0] == '^' ? NodeKind::kInverted : NodeKind::kClose;
      tag.remove_prefix(1);
    }
    std::size_t after = close + 2;
    std::string_view before = t.substr(pos, open - pos);
    if (kind != NodeKind::kVar) {
      // Standalone section tag: drop its whole line, including the newline.
      const auto nl = open == 0 ? std::string_view::npos : t.rfind('\n', open - 1);
      const std::size_t ls = nl == std::string_view::npos ? 0 : nl + 1;
      const auto line_end = t.find('\n', after);
      const std::size_t le = line_end == std::string_view::npos ? t.size() : line_end;
      if (pos <= ls && all_space(t.substr(ls, open - ls)) &&
          all_space(t.substr(after, le - after))) {
        before = t.substr(pos, ls - pos);
        after = line_end == std::string_view::npos ? t.size() : line_end + 1;
      }
    }
    push_text(before);
    nodes.push_back({kind, std::string(tag)});
    pos = after;
  }
  return nodes;
}

void render_range(const std::vector<Node>& nodes, std::size_t& i, const PromptVars& vars,
                  std::string* out, const std::string& closing) {
  auto lookup = [&](const std::string& name) -> const std::string& {
    const auto it = vars.find(name);
    if (it == vars.end()) {
      throw Error(ErrorCode::kInvalidInput,
                  fmt::format("prompt template references unknown placeholder '{}'", name));
    }
    return it->second;
  };
  while (i < nodes.size()) {
    const auto& n = nodes[i++];
    switch (n.kind) {
      case NodeKind::kText:
        if (out) *out += n.text;
        break;
      case NodeKind::kVar:
        if (out) *out += lookup(n.text);
        break;
      case NodeKind::kOpen:
      case NodeKind::kInverted: {
        const bool has = !lookup(n.text).empty();
        const bool keep = (n.kind == NodeKind::kOpen) == has;
        render_range(nodes, i, vars, keep ? out : nullptr, n.text);
        break;
      }
      case NodeKind::kClose:
        if (n.text != closing) {
          throw Error(ErrorCode::kInvalidInput,
                      fmt::format("prompt template closes '{}' but '{}' is open", n.text, closing));
        }
        return;
    }
  }
  if (!closing.empty()) {
    throw Error(ErrorCode::kInvalidInput,
                fmt::format("prompt template section '{}' is never closed", closing));
  }
}

}  // namespace

std::string render_template(std::string_view tmpl, const PromptVars& vars) {
  const auto nodes = lex(tmpl);
  std::string out;
  std::size_t i = 0;
  render_range(nodes, i, vars, &out, "");
  return out;
}

PromptLibrary PromptLibrary::builtin() {
  PromptLibrary lib;
  for (const auto& [k, v] : detail::builtin_prompt_templates()) lib.templates_.emplace(k, v);
  return lib;
}

PromptLibrary PromptLibrary::with_overrides(const std::filesystem::path& dir) {
  auto lib = builtin();
  if (!std::filesystem::is_directory(dir)) {
    throw Error(ErrorCode::kConfig, fmt::format("prompt directory {} not found", dir.string()));
  }
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.path().extension() != ".txt") continue;
    std::ifstream in(entry.path(), std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    lib.templates_[entry.path().stem().string()] = ss.str();
  }
  return lib;
}

const std::string& PromptLibrary::raw(std::string_view name) const {
  const auto it = templates_.find(name);
  if (it == templates_.end()) {
    throw Error(ErrorCode::kConfig, fmt::format("no prompt template named '{}'", name));
  }
  return it->second;
}

std::string PromptLibrary::render(std::string_view name, const PromptVars& vars) const {
  return render_template(raw(name), vars);
}

std::vector<std::string> PromptLibrary::names() const {
  std::vector<std::string> out;
  for (const auto& [k, v] : templates_) out.push_back(k);
  return out;
}

}  // namespace memfl
