#include "memfl/java_scanner.hpp"

#include <cctype>
#include <unordered_set>

namespace memfl {

namespace {

bool is_ident_start(char c) {
  return std::isalpha(static_cast<unsigned char>(c)) || c == '_' || c == '$';
}
bool is_ident_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '$';
}

const std::unordered_set<std::string_view>& non_method_words() {
  static const std::unordered_set<std::string_view> words = {
      "if", "for", "while", "switch", "catch", "synchronized", "try", "do", "else",
      "return", "new", "throw", "finally", "case", "assert", "super", "this"};
  return words;
}

bool is_type_keyword(std::string_view w) {
  return w == "class" || w == "interface" || w == "enum" || w == "record";
}

struct Token {
  std::string text;
  int line = 0;
  std::size_t offset = 0;
};

struct Javadoc {
  std::size_t end = 0;
  std::string text;
};

// Walks the raw source once, emitting blanked code and javadoc comments.
std::string blank(std::string_view src, std::vector<Javadoc>* docs) {
  std::string out(src);
  std::size_t i = 0;
  auto blank_range = [&](std::size_t from, std::size_t to) {
    for (std::size_t k = from; k < to && k < out.size(); ++k) {
      if (out[k] != '\n') out[k] = ' ';
    }
  };
  while (i < src.size()) {
    const char c = src[i];
    if (c == '/' && i + 1 < src.size() && src[i + 1] == '/') {
      auto end = src.find('\n', i);
      if (end == std::string_view::npos) end = src.size();
      blank_range(i, end);
      i = end;
    } else if (c == '/' && i + 1 < src.size() && src[i + 1] == '*') {
      auto end = src.find("*/", i + 2);
      end = end == std::string_view::npos ? src.size() : end + 2;
      if (docs && i + 2 < src.size() && src[i + 2] == '*' && end - i > 4) {
        docs->push_back({end, std::string(src.substr(i, end - i))});
      }
      blank_range(i, end);
      i = end;
    } else if (c == '"' && src.substr(i, 3) == "\"\"\"") {
      auto end = src.find("\"\"\"", i + 3);
      end = end == std::string_view::npos ? src.size() : end + 3;
      blank_range(i + 1, end - 1);
      i = end;
    } else if (c == '"' || c == '\'') {
      std::size_t j = i + 1;
      while (j < src.size() && src[j] != c && src[j] != '\n') {
        j += src[j] == '\\' ? 2 : 1;
      }
      blank_range(i + 1, j);
      i = j + 1;
    } else {
      ++i;
    }
  }
  return out;
}

enum class FrameKind { kType, kMethod, kBlock };

struct Frame {
  FrameKind kind;
  std::size_t type_index = 0;  // kType: index into result types
  ScannedMethod method;        // kMethod
};

// Drops `@Name` and `@Name(...)` annotation tokens (but not `@interface`).
std::vector<Token> strip_annotations(const std::vector<Token>& toks) {
  std::vector<Token> out;
  for (std::size_t i = 0; i < toks.size(); ++i) {
    if (toks[i].text == "@" && i + 1 < toks.size() && toks[i + 1].text != "interface") {
      ++i;
      while (i + 2 < toks.size() && toks[i + 1].text == ".") i += 2;
      if (i + 1 < toks.size() && toks[i + 1].text == "(") {
        int depth = 0;
        for (++i; i < toks.size(); ++i) {
          if (toks[i].text == "(") ++depth;
          if (toks[i].text == ")" && --depth == 0) break;
        }
      }
      continue;
    }
    out.push_back(toks[i]);
  }
  return out;
}

std::optional<Token> type_declaration(const std::vector<Token>& toks) {
  for (std::size_t i = 0; i + 1 < toks.size(); ++i) {
    if (!is_type_keyword(toks[i].text)) continue;
    if (i > 0 && toks[i - 1].text == ".") continue;  // Foo.class
    if (is_ident_start(toks[i + 1].text[0])) return toks[i + 1];
  }
  return std::nullopt;
}

std::optional<Token> method_declaration(const std::vector<Token>& raw) {
  const auto toks = strip_annotations(raw);
  if (toks.empty() || toks.front().text == "new") return std::nullopt;
  for (std::size_t i = 0; i < toks.size(); ++i) {
    const auto& t = toks[i].text;
    if (t == "=" || t == "->") return std::nullopt;
    if (t != "(") continue;
    if (i == 0 || !is_ident_start(toks[i - 1].text[0])) return std::nullopt;
    const auto& name = toks[i - 1];
    if (non_method_words().contains(name.text)) return std::nullopt;
    if (i >= 2 && toks[i - 2].text == ".") return std::nullopt;
    return name;
  }
  return std::nullopt;
}

}  // namespace

std::string blank_comments_and_literals(std::string_view source) {
  return blank(source, nullptr);
}

ScanResult scan_java_like(std::string_view source) {
  std::vector<Javadoc> docs;
  const std::string code = blank(source, &docs);
  ScanResult result;

  std::vector<Frame> stack;
  std::vector<Token> pending;
  std::vector<std::string> type_names;  // simple names of open types
  int line = 1;
  std::size_t boundary = 0;  // offset just past the last ; { }
  int last_line = 1;

  auto attach_doc = [&](std::size_t decl_offset) -> std::optional<std::string> {
    for (auto it = docs.rbegin(); it != docs.rend(); ++it) {
      if (it->end <= decl_offset) {
        if (it->end >= boundary) return it->text;
        return std::nullopt;
      }
    }
    return std::nullopt;
  };

  auto open_brace = [&](std::size_t offset) {
    const bool in_type = !stack.empty() && stack.back().kind == FrameKind::kType;
    if (auto t = type_declaration(pending); t && (stack.empty() || in_type)) {
      std::string qualified;
      if (type_names.empty()) {
        qualified = result.package_name.empty() ? t->text
                                                : result.package_name + "." + t->text;
      } else {
        qualified = result.types[stack.back().type_index].qualified_name + "$" + t->text;
      }
      result.types.push_back({qualified, t->line, {}});
      type_names.push_back(t->text);
      stack.push_back({FrameKind::kType, result.types.size() - 1, {}});
    } else if (in_type) {
      if (auto m = method_declaration(pending)) {
        ScannedMethod method{m->text, m->line, 0, attach_doc(pending.front().offset)};
        stack.push_back({FrameKind::kMethod, 0, std::move(method)});
      } else {
        stack.push_back({FrameKind::kBlock, 0, {}});
      }
    } else {
      stack.push_back({FrameKind::kBlock, 0, {}});
    }
    pending.clear();
    boundary = offset + 1;
  };

  auto close_frame = [&](int at_line) {
    Frame frame = std::move(stack.back());
    stack.pop_back();
    if (frame.kind == FrameKind::kMethod) {
      // Method belongs to the nearest enclosing type frame.
      for (auto it = stack.rbegin(); it != stack.rend(); ++it) {
        if (it->kind == FrameKind::kType) {
          frame.method.last_line = at_line;
          result.types[it->type_index].methods.push_back(std::move(frame.method));
          break;
        }
      }
    } else if (frame.kind == FrameKind::kType) {
      type_names.pop_back();
    }
  };

  std::size_t i = 0;
  while (i < code.size()) {
    const char c = code[i];
    if (c == '\n') {
      ++line;
      ++i;
      continue;
    }
    if (std::isspace(static_cast<unsigned char>(c))) {
      ++i;
      continue;
    }
    last_line = line;
    if (is_ident_start(c)) {
      std::size_t j = i;
      while (j < code.size() && is_ident_char(code[j])) ++j;
      std::string word = code.substr(i, j - i);
      if (word == "package" && stack.empty() && result.package_name.empty()) {
        std::size_t k = j;
        std::string pkg;
        while (k < code.size() && code[k] != ';') {
          if (!std::isspace(static_cast<unsigned char>(code[k]))) pkg += code[k];
          if (code[k] == '\n') ++line;
          ++k;
        }
        result.package_name = pkg;
        i = k;
        continue;
      }
      pending.push_back({std::move(word), line, i});
      i = j;
      continue;
    }
    if (c == '{') {
      open_brace(i);
    } else if (c == '}') {
      if (stack.empty()) {
        ++result.brace_anomalies;
      } else {
        close_frame(line);
      }
      pending.clear();
      boundary = i + 1;
    } else if (c == ';') {
      pending.clear();
      boundary = i + 1;
    } else {
      pending.push_back({std::string(1, c), line, i});
    }
    ++i;
  }
  while (!stack.empty()) {
    ++result.brace_anomalies;
    close_frame(last_line);
  }
  return result;
}

std::set<std::string> called_identifiers(std::string_view code) {
  const std::string blanked = blank(code, nullptr);
  std::set<std::string> out;
  std::string prev;
  std::size_t i = 0;
  while (i < blanked.size()) {
    if (!is_ident_start(blanked[i]) || (i > 0 && is_ident_char(blanked[i - 1]))) {
      if (!std::isspace(static_cast<unsigned char>(blanked[i]))) prev.clear();
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < blanked.size() && is_ident_char(blanked[j])) ++j;
    std::string word(blanked.substr(i, j - i));
    std::size_t k = j;
    while (k < blanked.size() && std::isspace(static_cast<unsigned char>(blanked[k]))) ++k;
    if (k < blanked.size() && blanked[k] == '(' && prev != "new" &&
        !non_method_words().contains(word)) {
      out.insert(word);
    }
    prev = std::move(word);
    i = j;
  }
  return out;
}

}  // namespace memfl
