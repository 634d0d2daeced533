#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <ostream>
#include <semaphore>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "memfl/core.hpp"

namespace memfl {

class SeededRng;

struct ChatMessage {
  std::string role;
  std::string content;
};

struct ChatRequest {
  std::string model;
  std::vector<ChatMessage> messages;
  double temperature = 0.0;
  int max_output_tokens = 2048;
  std::string tag;  // unique within a run, e.g. "ev/review/Bug-3"
  // Accounting metadata; not part of the prompt hash.
  std::string step;
  std::string bug_id;
};

/// Hash of everything that determines the reply: model, temperature, messages.
std::string prompt_hash(const ChatRequest& request);

struct ProviderReply {
  std::string text;
  std::int64_t prompt_tokens = 0;
  std::int64_t completion_tokens = 0;
  std::chrono::microseconds latency{0};
  int retries = 0;
};

class Provider {
 public:
  virtual ~Provider() = default;
  virtual ProviderReply complete(const ChatRequest& request, const std::string& hash) = 0;
  virtual std::string_view kind() const = 0;
};

// ---------------------------------------------------------------------------
// Scripted provider: replies are queued rules matched against request tags.

struct ScriptRule {
  std::string pattern;  // ECMAScript regex searched in the tag
  std::string reply;
  bool sticky = false;  // sticky rules are never consumed
  std::optional<std::int64_t> prompt_tokens;
  std::optional<std::int64_t> completion_tokens;
  std::optional<std::chrono::microseconds> latency;
  bool expand = false;  // substitute $1.. from the tag match into the reply
};

class ScriptedProvider : public Provider {
 public:
  explicit ScriptedProvider(std::vector<ScriptRule> rules,
                            std::chrono::microseconds default_latency = {});
  /// Reads `{"default_latency_ms": n, "rules": [{match, reply, sticky, ...}]}`.
  static std::shared_ptr<ScriptedProvider> from_file(const std::filesystem::path& path);
  /// Plain FIFO queue of replies matching any tag.
  static std::shared_ptr<ScriptedProvider> queue(const std::vector<std::string>& replies);

  ProviderReply complete(const ChatRequest& request, const std::string& hash) override;
  std::string_view kind() const override { return "scripted"; }
  std::size_t remaining() const;

 private:
  struct Rule;
  mutable std::mutex mu_;
  std::vector<std::shared_ptr<Rule>> rules_;
  std::chrono::microseconds default_latency_;
};

// ---------------------------------------------------------------------------
// Replay provider: cassette entries keyed by tag + prompt hash.

struct CassetteEntry {
  std::string tag;
  std::string prompt_hash;
  std::string reply;
  std::int64_t prompt_tokens = 0;
  std::int64_t completion_tokens = 0;
  std::chrono::microseconds latency{0};
};

std::vector<CassetteEntry> read_cassette(const std::filesystem::path& path);
void write_cassette(const std::filesystem::path& path, std::vector<CassetteEntry> entries);

class ReplayProvider : public Provider {
 public:
  explicit ReplayProvider(std::vector<CassetteEntry> entries);
  static std::shared_ptr<ReplayProvider> from_file(const std::filesystem::path& path);

  ProviderReply complete(const ChatRequest& request, const std::string& hash) override;
  std::string_view kind() const override { return "replay"; }

 private:
  std::map<std::string, CassetteEntry> entries_;
};

// ---------------------------------------------------------------------------
// Dry-run provider: prints each prompt and answers with an empty reply.

class DryRunProvider : public Provider {
 public:
  explicit DryRunProvider(std::ostream& out) : out_(out) {}
  ProviderReply complete(const ChatRequest& request, const std::string& hash) override;
  std::string_view kind() const override { return "dry-run"; }

 private:
  std::mutex mu_;
  std::ostream& out_;
};

// ---------------------------------------------------------------------------
// Live provider: chat-completion HTTP API with bounded exponential backoff.

struct RetryPolicy {
  int max_retries = 5;
  std::chrono::milliseconds base_delay{1000};
  double jitter = 0.25;  // extra delay up to this fraction of the backoff
};

struct LiveOptions {
  std::string base_url = "https://api.openai.com/v1";
  std::string api_key;
  std::chrono::seconds timeout{120};
  RetryPolicy retry;
};

class LiveProvider : public Provider {
 public:
  using Sleeper = std::function<void(std::chrono::milliseconds)>;

  LiveProvider(LiveOptions options, std::shared_ptr<SeededRng> rng, Sleeper sleeper = {});
  ProviderReply complete(const ChatRequest& request, const std::string& hash) override;
  std::string_view kind() const override { return "live"; }

 private:
  LiveOptions options_;
  std::shared_ptr<SeededRng> rng_;
  Sleeper sleeper_;
};

// ---------------------------------------------------------------------------

/// Prices in integer micro-dollars per million tokens (i.e. dollars per token
/// scaled by 1e12), so per-exchange cost is exact up to micro-dollar rounding.
struct Price {
  std::int64_t input_per_mtok_micros = 0;
  std::int64_t output_per_mtok_micros = 0;
};

/// Parses a non-negative decimal dollar amount ("0.15") into micro-dollars.
std::int64_t parse_dollars_to_micros(std::string_view text);
/// Renders micro-dollars as dollars with six decimals.
std::string format_dollars(std::int64_t micros);

class PriceTable {
 public:
  static PriceTable defaults();

  void set(const std::string& model, Price price);
  /// Cost in micro-dollars, rounded half up. Unknown models cost 0.
  std::int64_t cost_micros(const std::string& model, std::int64_t prompt_tokens,
                           std::int64_t completion_tokens) const;
  bool knows(const std::string& model) const { return prices_.contains(model); }

 private:
  std::map<std::string, Price> prices_;
};

struct ChatExchange {
  ChatRequest request;
  std::string prompt_hash;
  std::string reply_text;
  std::int64_t prompt_tokens = 0;
  std::int64_t completion_tokens = 0;
  std::chrono::microseconds latency{0};
  std::int64_t cost_micros = 0;
  int retries = 0;
  bool cache_hit = false;
};

struct GatewayOptions {
  int max_in_flight = 4;
  bool cache = false;
};

/// The only path to a model. Thread-safe: concurrent callers share the
/// in-flight limit and the ledger.
class Gateway {
 public:
  Gateway(std::shared_ptr<Provider> provider, PriceTable prices, GatewayOptions options = {});

  ChatExchange complete(const ChatRequest& request);

  std::vector<ChatExchange> ledger() const;
  std::size_t provider_calls() const;
  std::string_view provider_kind() const { return provider_->kind(); }

  /// Cassette entries for every non-cached exchange so far, sorted by tag.
  std::vector<CassetteEntry> recording() const;

 private:
  std::shared_ptr<Provider> provider_;
  PriceTable prices_;
  GatewayOptions options_;
  std::counting_semaphore<1024> in_flight_;
  mutable std::mutex mu_;
  std::vector<ChatExchange> ledger_;
  std::set<std::string> tags_;
  std::map<std::string, ProviderReply> cache_;
  std::size_t provider_calls_ = 0;
};

struct CostRow {
  std::string key;
  std::int64_t calls = 0;
  std::int64_t prompt_tokens = 0;
  std::int64_t completion_tokens = 0;
  std::int64_t cost_micros = 0;
  std::chrono::microseconds latency{0};
};

struct CostReport {
  std::vector<CostRow> per_step;  // sorted by step name
  std::vector<CostRow> per_bug;   // sorted by bug id
  CostRow total;
  double mean_cost_micros_per_bug = 0;
  double mean_latency_us_per_bug = 0;
};

/// Aggregates a ledger. Totals are exact integer sums. Throws on an empty ledger.
CostReport run_cost_report(const std::vector<ChatExchange>& ledger);

}  // namespace memfl
