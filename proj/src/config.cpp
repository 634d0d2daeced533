#include "memfl/config.hpp"

#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "toml.hpp"

namespace memfl {

namespace fs = std::filesystem;

std::optional<std::string> system_env(const std::string& name) {
  const char* v = std::getenv(name.c_str());
  if (!v || !*v) return std::nullopt;
  return std::string(v);
}

namespace {

Error config_error(const std::string& where, const std::string& what) {
  return Error(ErrorCode::kConfig, fmt::format("config {}: {}", where, what));
}

class Section {
 public:
  Section(const toml::table& table, std::string name) : table_(table), name_(std::move(name)) {}

  /// Rejects keys that no get() asked for.
  void done() const {
    for (const auto& [key, _] : table_) {
      if (!used_.contains(std::string(key.str()))) {
        throw config_error(fmt::format("[{}]", name_), fmt::format("unknown key {}", key.str()));
      }
    }
  }

  template <typename T>
  void get(std::string_view key, T& out) {
    used_.insert(std::string(key));
    const auto* node = table_.get(key);
    if (!node) return;
    if constexpr (std::is_same_v<T, bool>) {
      if (!node->is_boolean()) throw type_error(key, "a boolean");
      out = node->as_boolean()->get();
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!node->is_string()) throw type_error(key, "a string");
      out = node->as_string()->get();
    } else if constexpr (std::is_same_v<T, double>) {
      if (!node->is_number()) throw type_error(key, "a number");
      out = node->value<double>().value();
    } else {
      if (!node->is_integer()) throw type_error(key, "an integer");
      const auto v = node->as_integer()->get();
      if (v < 0) throw config_error(fmt::format("[{}].{}", name_, key), "must not be negative");
      out = static_cast<T>(v);
    }
  }

  void get_path(std::string_view key, fs::path& out, const fs::path& base) {
    std::string s;
    get(key, s);
    if (!s.empty()) out = fs::path(s).is_absolute() ? fs::path(s) : base / s;
  }

 private:
  Error type_error(std::string_view key, const char* expected) const {
    return config_error(fmt::format("[{}].{}", name_, key), fmt::format("expected {}", expected));
  }

  const toml::table& table_;
  std::string name_;
  std::set<std::string> used_;
};

std::string dollars_text(const toml::node& node, const std::string& where) {
  if (node.is_string()) return node.as_string()->get();
  if (node.is_integer()) return std::to_string(node.as_integer()->get());
  if (node.is_floating_point()) return fmt::format("{}", node.as_floating_point()->get());
  throw config_error(where, "prices must be numbers or decimal strings");
}

}  // namespace

void apply_config_text(Config& config, std::string_view text, const fs::path& base_dir) {
  toml::table doc;
  try {
    doc = toml::parse(text);
  } catch (const toml::parse_error& e) {
    throw config_error(fmt::format("line {}", e.source().begin.line), std::string(e.description()));
  }
  static const std::set<std::string> known = {"provider", "prices", "pipeline", "memgen", "eval", "summary"};
  for (const auto& [key, node] : doc) {
    if (!known.contains(std::string(key.str())) || !node.is_table()) {
      throw config_error(std::string(key.str()), "unknown section");
    }
  }
  if (const auto* t = doc["provider"].as_table()) {
    Section s(*t, "provider");
    auto& p = config.provider;
    s.get("kind", p.kind);
    s.get("model", config.pipeline.model);
    s.get("base_url", p.base_url);
    s.get("temperature", config.pipeline.temperature);
    s.get("max_output_tokens", config.pipeline.max_output_tokens);
    s.get_path("script", p.script, base_dir);
    s.get_path("cassette", p.cassette, base_dir);
    s.get("timeout_s", p.timeout_s);
    s.get("max_retries", p.max_retries);
    s.get("max_in_flight", p.max_in_flight);
    s.get("cache", p.cache);
    s.done();
  }
  if (const auto* t = doc["prices"].as_table()) {
    for (const auto& [model, node] : *t) {
      const auto where = fmt::format("[prices].{}", model.str());
      const auto* arr = node.as_array();
      if (!arr || arr->size() != 2) throw config_error(where, "expected [input, output] dollars per 1M tokens");
      try {
        config.prices.set(std::string(model.str()),
                          {parse_dollars_to_micros(dollars_text(*arr->get(0), where)),
                           parse_dollars_to_micros(dollars_text(*arr->get(1), where))});
      } catch (const Error& e) {
        if (e.code() == ErrorCode::kConfig) throw;
        throw config_error(where, e.what());
      }
    }
  }
  if (const auto* t = doc["pipeline"].as_table()) {
    Section s(*t, "pipeline");
    auto& p = config.pipeline;
    s.get("prefilter_cap", p.prefilter_cap);
    s.get("stage1_cap", p.stage1_cap);
    s.get("stage2_cap", p.stage2_cap);
    s.get("methods_per_class", p.methods_per_class);
    s.get("ranking_cap", p.ranking_cap);
    s.get("prompt_token_budget", p.prompt_token_budget);
    s.get("workers", p.workers);
    s.get("review", p.toggles.review);
    s.get("condensation", p.toggles.condensation);
    s.get("dynamic_memory", p.toggles.dynamic_memory);
    s.done();
  }
  if (const auto* t = doc["memgen"].as_table()) {
    Section s(*t, "memgen");
    auto& m = config.memgen;
    s.get("batch", m.batch_size);
    s.get("iterations", m.iterations);
    s.get("seed", m.seed);
    s.get("resample", m.resample_each_iteration);
    s.done();
  }
  if (const auto* t = doc["eval"].as_table()) {
    Section s(*t, "eval");
    s.get("folds", config.folds);
    s.get("seed", config.eval_seed);
    s.get("line_tolerance", config.line_tolerance);
    s.done();
  }
  if (const auto* t = doc["summary"].as_table()) {
    Section s(*t, "summary");
    auto& m = config.summary;
    s.get("chunk_token_budget", m.chunk_token_budget);
    s.get("project_token_budget", m.project_token_budget);
    s.get("group_size", m.group_size);
    s.get("max_output_tokens", m.max_output_tokens);
    s.done();
  }
  config.summary.model = config.pipeline.model;
  config.summary.temperature = config.pipeline.temperature;
}

void apply_config_file(Config& config, const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kNotFound, fmt::format("config file {} not found", path.string()));
  std::ostringstream ss;
  ss << in.rdbuf();
  apply_config_text(config, ss.str(), path.parent_path());
}

void apply_environment(Config& config, const EnvLookup& env) {
  if (auto v = env("MEMFL_API_KEY")) config.provider.api_key = *v;
  if (auto v = env("MEMFL_BASE_URL")) config.provider.base_url = *v;
  if (auto v = env("MEMFL_PROVIDER")) config.provider.kind = *v;
}

Config load_config(const std::optional<fs::path>& explicit_path, const fs::path& project_dir,
                   const EnvLookup& env) {
  Config config;
  config.pipeline.workers = config.provider.max_in_flight;
  if (explicit_path) {
    apply_config_file(config, *explicit_path);
  } else if (const auto p = project_dir / kConfigFileName; fs::exists(p)) {
    apply_config_file(config, p);
  }
  apply_environment(config, env);
  config.summary.workers = config.pipeline.workers;
  return config;
}

}  // namespace memfl
