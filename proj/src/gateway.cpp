#include "memfl/gateway.hpp"

#include <algorithm>
#include <fstream>
#include <regex>
#include <sstream>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "json.hpp"
#include "memfl/hashing.hpp"

namespace memfl {

namespace fs = std::filesystem;
using nlohmann::json;
using std::chrono::microseconds;

std::string prompt_hash(const ChatRequest& request) {
  Sha256 h;
  h.feed_field(request.model);
  h.feed_field(fmt::format("{:.4f}", request.temperature));
  for (const auto& m : request.messages) {
    h.feed_field(m.role);
    h.feed_field(m.content);
  }
  return h.hex_digest();
}

namespace {

std::int64_t estimate_prompt_tokens(const ChatRequest& request) {
  std::int64_t n = 0;
  for (const auto& m : request.messages) n += estimate_tokens(m.content);
  return n;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, fmt::format("cannot read {}", path.string()));
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

// ---------------------------------------------------------------------------

struct ScriptedProvider::Rule {
  ScriptRule spec;
  std::regex re;
  bool consumed = false;
};

ScriptedProvider::ScriptedProvider(std::vector<ScriptRule> rules, microseconds default_latency)
    : default_latency_(default_latency) {
  for (auto& r : rules) {
    auto rule = std::make_shared<Rule>();
    try {
      rule->re = std::regex(r.pattern, std::regex::ECMAScript);
    } catch (const std::regex_error& e) {
      throw Error(ErrorCode::kInvalidInput,
                  fmt::format("bad script pattern '{}': {}", r.pattern, e.what()));
    }
    rule->spec = std::move(r);
    rules_.push_back(std::move(rule));
  }
}

std::shared_ptr<ScriptedProvider> ScriptedProvider::from_file(const fs::path& path) {
  json doc;
  try {
    doc = json::parse(slurp(path));
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::kInvalidInput, fmt::format("{}: {}", path.string(), e.what()));
  }
  std::vector<ScriptRule> rules;
  for (const auto& rj : doc.at("rules")) {
    ScriptRule r;
    r.pattern = rj.value("match", std::string(".*"));
    if (rj.contains("reply_lines")) {
      std::string text;
      for (const auto& line : rj.at("reply_lines")) text += line.get<std::string>() + "\n";
      r.reply = text;
    } else {
      r.reply = rj.at("reply").get<std::string>();
    }
    r.sticky = rj.value("sticky", false);
    r.expand = rj.value("expand", false);
    if (rj.contains("prompt_tokens")) r.prompt_tokens = rj.at("prompt_tokens").get<std::int64_t>();
    if (rj.contains("completion_tokens")) {
      r.completion_tokens = rj.at("completion_tokens").get<std::int64_t>();
    }
    if (rj.contains("latency_ms")) r.latency = microseconds(rj.at("latency_ms").get<std::int64_t>() * 1000);
    rules.push_back(std::move(r));
  }
  const auto latency = microseconds(doc.value("default_latency_ms", std::int64_t{0}) * 1000);
  return std::make_shared<ScriptedProvider>(std::move(rules), latency);
}

std::shared_ptr<ScriptedProvider> ScriptedProvider::queue(const std::vector<std::string>& replies) {
  std::vector<ScriptRule> rules;
  for (const auto& r : replies) rules.push_back({".*", r, false, {}, {}, {}, false});
  return std::make_shared<ScriptedProvider>(std::move(rules));
}

ProviderReply ScriptedProvider::complete(const ChatRequest& request, const std::string&) {
  std::lock_guard lock(mu_);
  for (auto& rule : rules_) {
    std::smatch match;
    if (rule->consumed || !std::regex_search(request.tag, match, rule->re)) continue;
    if (!rule->spec.sticky) rule->consumed = true;
    ProviderReply reply;
    reply.text = rule->spec.expand ? match.format(rule->spec.reply) : rule->spec.reply;
    reply.prompt_tokens = rule->spec.prompt_tokens.value_or(estimate_prompt_tokens(request));
    reply.completion_tokens = rule->spec.completion_tokens.value_or(estimate_tokens(reply.text));
    reply.latency = rule->spec.latency.value_or(default_latency_);
    return reply;
  }
  throw Error(ErrorCode::kScriptExhausted,
              fmt::format("no scripted reply left for tag '{}'", request.tag));
}

std::size_t ScriptedProvider::remaining() const {
  std::lock_guard lock(mu_);
  return static_cast<std::size_t>(std::count_if(
      rules_.begin(), rules_.end(), [](const auto& r) { return !r->consumed && !r->spec.sticky; }));
}

// ---------------------------------------------------------------------------

std::vector<CassetteEntry> read_cassette(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kNotFound, fmt::format("cassette {} not found", path.string()));
  std::vector<CassetteEntry> entries;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    try {
      const auto j = json::parse(line);
      CassetteEntry e;
      e.tag = j.at("tag").get<std::string>();
      e.prompt_hash = j.at("prompt_hash").get<std::string>();
      e.reply = j.at("reply").get<std::string>();
      e.prompt_tokens = j.value("prompt_tokens", std::int64_t{0});
      e.completion_tokens = j.value("completion_tokens", std::int64_t{0});
      e.latency = microseconds(j.value("latency_us", std::int64_t{0}));
      entries.push_back(std::move(e));
    } catch (const json::exception& e) {
      throw Error(ErrorCode::kInvalidInput,
                  fmt::format("{}:{}: bad cassette line: {}", path.string(), line_no, e.what()));
    }
  }
  return entries;
}

void write_cassette(const fs::path& path, std::vector<CassetteEntry> entries) {
  std::sort(entries.begin(), entries.end(),
            [](const auto& a, const auto& b) { return a.tag < b.tag; });
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, fmt::format("cannot write {}", path.string()));
  for (const auto& e : entries) {
    json j = {{"tag", e.tag},
              {"prompt_hash", e.prompt_hash},
              {"reply", e.reply},
              {"prompt_tokens", e.prompt_tokens},
              {"completion_tokens", e.completion_tokens},
              {"latency_us", e.latency.count()}};
    out << j.dump() << '\n';
  }
}

ReplayProvider::ReplayProvider(std::vector<CassetteEntry> entries) {
  for (auto& e : entries) {
    auto key = e.tag + "|" + e.prompt_hash;
    entries_.emplace(std::move(key), std::move(e));
  }
}

std::shared_ptr<ReplayProvider> ReplayProvider::from_file(const fs::path& path) {
  return std::make_shared<ReplayProvider>(read_cassette(path));
}

ProviderReply ReplayProvider::complete(const ChatRequest& request, const std::string& hash) {
  const auto it = entries_.find(request.tag + "|" + hash);
  if (it == entries_.end()) {
    throw Error(ErrorCode::kCassetteMiss,
                fmt::format("no cassette entry for tag '{}' with prompt hash {}", request.tag,
                            hash));
  }
  const auto& e = it->second;
  return {e.reply, e.prompt_tokens, e.completion_tokens, e.latency, 0};
}

ProviderReply DryRunProvider::complete(const ChatRequest& request, const std::string& hash) {
  std::lock_guard lock(mu_);
  out_ << "===== " << request.tag << " (" << hash.substr(0, 12) << ") =====\n";
  for (const auto& m : request.messages) {
    out_ << "--- " << m.role << " ---\n" << m.content << "\n";
  }
  return {"", estimate_prompt_tokens(request), 0, microseconds(0), 0};
}

// ---------------------------------------------------------------------------

std::int64_t parse_dollars_to_micros(std::string_view text) {
  const auto s = trim(text);
  auto bad = [&] {
    return Error(ErrorCode::kConfig, fmt::format("invalid dollar amount '{}'", text));
  };
  if (s.empty()) throw bad();
  std::int64_t whole = 0;
  std::int64_t frac = 0;
  int frac_digits = 0;
  bool dot = false;
  bool round_up = false;
  for (char c : s) {
    if (c == '.') {
      if (dot) throw bad();
      dot = true;
    } else if (c >= '0' && c <= '9') {
      if (!dot) {
        whole = whole * 10 + (c - '0');
      } else if (frac_digits < 6) {
        frac = frac * 10 + (c - '0');
        ++frac_digits;
      } else if (frac_digits == 6) {
        round_up = c >= '5';
        ++frac_digits;
      }
    } else {
      throw bad();
    }
  }
  for (int i = std::min(frac_digits, 6); i < 6; ++i) frac *= 10;
  return whole * 1'000'000 + frac + (round_up ? 1 : 0);
}

std::string format_dollars(std::int64_t micros) {
  const char* sign = micros < 0 ? "-" : "";
  const auto a = micros < 0 ? -micros : micros;
  return fmt::format("{}{}.{:06d}", sign, a / 1'000'000, a % 1'000'000);
}

PriceTable PriceTable::defaults() {
  PriceTable t;
  t.set("gpt-4o-mini", {parse_dollars_to_micros("0.15"), parse_dollars_to_micros("0.60")});
  t.set("gpt-4.1-mini", {parse_dollars_to_micros("0.40"), parse_dollars_to_micros("1.60")});
  return t;
}

void PriceTable::set(const std::string& model, Price price) {
  if (price.input_per_mtok_micros < 0 || price.output_per_mtok_micros < 0) {
    throw Error(ErrorCode::kConfig, fmt::format("negative price for {}", model));
  }
  prices_[model] = price;
}

std::int64_t PriceTable::cost_micros(const std::string& model, std::int64_t prompt_tokens,
                                     std::int64_t completion_tokens) const {
  const auto it = prices_.find(model);
  if (it == prices_.end()) return 0;
  // tokens * (micro-dollars per 1e6 tokens) / 1e6 = micro-dollars
  const std::int64_t scaled = prompt_tokens * it->second.input_per_mtok_micros +
                              completion_tokens * it->second.output_per_mtok_micros;
  return (scaled + 500'000) / 1'000'000;
}

// ---------------------------------------------------------------------------

Gateway::Gateway(std::shared_ptr<Provider> provider, PriceTable prices, GatewayOptions options)
    : provider_(std::move(provider)),
      prices_(std::move(prices)),
      options_(options),
      in_flight_(std::clamp(options.max_in_flight, 1, 1024)) {}

ChatExchange Gateway::complete(const ChatRequest& request) {
  if (request.messages.empty()) {
    throw Error(ErrorCode::kInvalidInput, fmt::format("request '{}' has no messages", request.tag));
  }
  if (request.temperature < 0.0 || request.temperature > 2.0) {
    throw Error(ErrorCode::kInvalidInput, "temperature must be in [0, 2]");
  }
  ChatExchange ex;
  ex.request = request;
  ex.prompt_hash = prompt_hash(request);
  {
    std::lock_guard lock(mu_);
    if (!tags_.insert(request.tag).second) {
      throw Error(ErrorCode::kInvalidInput,
                  fmt::format("request tag '{}' used twice in one run", request.tag));
    }
    if (options_.cache) {
      if (const auto it = cache_.find(ex.prompt_hash); it != cache_.end()) {
        ex.reply_text = it->second.text;
        ex.cache_hit = true;
        ledger_.push_back(ex);
        return ex;
      }
    }
  }

  in_flight_.acquire();
  ProviderReply reply;
  try {
    reply = provider_->complete(request, ex.prompt_hash);
  } catch (...) {
    in_flight_.release();
    throw;
  }
  in_flight_.release();

  ex.reply_text = reply.text;
  ex.prompt_tokens = reply.prompt_tokens;
  ex.completion_tokens = reply.completion_tokens;
  ex.latency = reply.latency;
  ex.retries = reply.retries;
  ex.cost_micros = prices_.cost_micros(request.model, reply.prompt_tokens, reply.completion_tokens);
  std::lock_guard lock(mu_);
  ++provider_calls_;
  if (options_.cache) cache_.emplace(ex.prompt_hash, reply);
  ledger_.push_back(ex);
  return ex;
}

std::vector<ChatExchange> Gateway::ledger() const {
  std::lock_guard lock(mu_);
  return ledger_;
}

std::size_t Gateway::provider_calls() const {
  std::lock_guard lock(mu_);
  return provider_calls_;
}

std::vector<CassetteEntry> Gateway::recording() const {
  std::vector<CassetteEntry> out;
  for (const auto& ex : ledger()) {
    if (ex.cache_hit) continue;
    out.push_back({ex.request.tag, ex.prompt_hash, ex.reply_text, ex.prompt_tokens,
                   ex.completion_tokens, ex.latency});
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.tag < b.tag; });
  return out;
}

CostReport run_cost_report(const std::vector<ChatExchange>& ledger) {
  if (ledger.empty()) throw Error(ErrorCode::kInvalidInput, "cost report needs a non-empty ledger");
  std::map<std::string, CostRow> steps;
  std::map<std::string, CostRow> bugs;
  CostReport report;
  report.total.key = "total";
  auto add = [](CostRow& row, const ChatExchange& ex) {
    ++row.calls;
    row.prompt_tokens += ex.prompt_tokens;
    row.completion_tokens += ex.completion_tokens;
    row.cost_micros += ex.cost_micros;
    row.latency += ex.latency;
  };
  for (const auto& ex : ledger) {
    add(report.total, ex);
    const auto step = ex.request.step.empty() ? std::string("other") : ex.request.step;
    auto& s = steps[step];
    s.key = step;
    add(s, ex);
    if (!ex.request.bug_id.empty()) {
      auto& b = bugs[ex.request.bug_id];
      b.key = ex.request.bug_id;
      add(b, ex);
    }
  }
  for (auto& [k, row] : steps) report.per_step.push_back(row);
  std::int64_t bug_cost = 0;
  std::int64_t bug_latency = 0;
  for (auto& [k, row] : bugs) {
    bug_cost += row.cost_micros;
    bug_latency += row.latency.count();
    report.per_bug.push_back(row);
  }
  if (!bugs.empty()) {
    report.mean_cost_micros_per_bug = static_cast<double>(bug_cost) / static_cast<double>(bugs.size());
    report.mean_latency_us_per_bug =
        static_cast<double>(bug_latency) / static_cast<double>(bugs.size());
  }
  return report;
}

}  // namespace memfl
