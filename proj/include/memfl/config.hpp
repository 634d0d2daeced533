#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>

#include "memfl/gateway.hpp"
#include "memfl/memgen.hpp"
#include "memfl/memory_store.hpp"
#include "memfl/pipeline.hpp"

namespace memfl {

inline constexpr std::string_view kConfigFileName = "memfl.toml";

struct ProviderConfig {
  std::string kind = "live";  // live | replay | scripted
  std::string base_url = "https://api.openai.com/v1";
  std::string api_key;
  std::filesystem::path script;
  std::filesystem::path cassette;
  int timeout_s = 120;
  int max_retries = 5;
  int max_in_flight = 4;
  bool cache = false;
};

struct Config {
  ProviderConfig provider;
  PriceTable prices = PriceTable::defaults();
  PipelineOptions pipeline;
  SummaryOptions summary;
  MemgenOptions memgen;
  int folds = 5;
  std::uint64_t eval_seed = 0;
  int line_tolerance = 2;
  std::filesystem::path prompts_dir;
};

using EnvLookup = std::function<std::optional<std::string>(const std::string&)>;

/// Process environment lookup.
std::optional<std::string> system_env(const std::string& name);

/// Applies a memfl.toml document on top of `config`. Relative paths resolve
/// against `base_dir`. Unknown sections or keys throw Error(kConfig).
void apply_config_text(Config& config, std::string_view text, const std::filesystem::path& base_dir);
void apply_config_file(Config& config, const std::filesystem::path& path);

/// MEMFL_API_KEY, MEMFL_BASE_URL and MEMFL_PROVIDER.
void apply_environment(Config& config, const EnvLookup& env);

/// Defaults, then the config file (explicit path, else <project>/memfl.toml
/// when present), then the environment. Flags are applied by the caller.
Config load_config(const std::optional<std::filesystem::path>& explicit_path,
                   const std::filesystem::path& project_dir, const EnvLookup& env);

}  // namespace memfl
