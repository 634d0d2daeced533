#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace memfl {

using PromptVars = std::map<std::string, std::string, std::less<>>;

/// Renders a template. `{{name}}` substitutes a variable; `{{#name}}...{{/name}}`
/// keeps its body only when the variable is non-empty and `{{^name}}...{{/name}}`
/// only when it is empty. A section tag alone on its line removes that line.
/// Unknown variables throw Error(kInvalidInput).
std::string render_template(std::string_view tmpl, const PromptVars& vars);

/// Named prompt templates: the built-in set, optionally overridden by the
/// `<name>.txt` files of a directory.
class PromptLibrary {
 public:
  static PromptLibrary builtin();
  static PromptLibrary with_overrides(const std::filesystem::path& dir);

  const std::string& raw(std::string_view name) const;
  std::string render(std::string_view name, const PromptVars& vars) const;
  std::vector<std::string> names() const;

 private:
  std::map<std::string, std::string, std::less<>> templates_;
};

}  // namespace memfl
