#include <chrono>
#include <thread>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "httplib.h"
#include "json.hpp"
#include "memfl/gateway.hpp"
#include "memfl/rng.hpp"

namespace memfl {

using nlohmann::json;

namespace {

struct Endpoint {
  std::string origin;  // scheme://host[:port]
  std::string path_prefix;
};

Endpoint split_base_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) {
    throw Error(ErrorCode::kConfig, fmt::format("base URL '{}' has no scheme", url));
  }
  const auto path_start = url.find('/', scheme_end + 3);
  Endpoint ep;
  ep.origin = url.substr(0, path_start);
  ep.path_prefix = path_start == std::string::npos ? "" : url.substr(path_start);
  while (!ep.path_prefix.empty() && ep.path_prefix.back() == '/') ep.path_prefix.pop_back();
  return ep;
}

bool transient_status(int status) { return status == 429 || status >= 500; }

}  // namespace

LiveProvider::LiveProvider(LiveOptions options, std::shared_ptr<SeededRng> rng, Sleeper sleeper)
    : options_(std::move(options)), rng_(std::move(rng)), sleeper_(std::move(sleeper)) {
  if (!sleeper_) sleeper_ = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
}

ProviderReply LiveProvider::complete(const ChatRequest& request, const std::string&) {
  const auto ep = split_base_url(options_.base_url);
  httplib::Client client(ep.origin);
  client.set_connection_timeout(options_.timeout);
  client.set_read_timeout(options_.timeout);
  client.set_write_timeout(options_.timeout);
  httplib::Headers headers;
  if (!options_.api_key.empty()) {
    headers.emplace("Authorization", "Bearer " + options_.api_key);
  }

  json messages = json::array();
  for (const auto& m : request.messages) {
    messages.push_back({{"role", m.role}, {"content", m.content}});
  }
  const json body = {{"model", request.model},
                     {"messages", std::move(messages)},
                     {"temperature", request.temperature},
                     {"max_tokens", request.max_output_tokens}};
  const auto payload = body.dump();
  const auto path = ep.path_prefix + "/chat/completions";

  const auto started = std::chrono::steady_clock::now();
  std::string last_failure;
  for (int attempt = 0; attempt <= options_.retry.max_retries; ++attempt) {
    if (attempt > 0) {
      const auto backoff = options_.retry.base_delay * (1LL << (attempt - 1));
      const auto extra = std::chrono::milliseconds(static_cast<long long>(
          static_cast<double>(backoff.count()) * options_.retry.jitter * (rng_ ? rng_->unit() : 0.0)));
      spdlog::debug("{}: retry {} after {} ms ({})", request.tag, attempt, (backoff + extra).count(),
                    last_failure);
      sleeper_(backoff + extra);
    }
    auto res = client.Post(path, headers, payload, "application/json");
    if (!res) {
      last_failure = httplib::to_string(res.error());
      continue;
    }
    if (transient_status(res->status)) {
      last_failure = fmt::format("HTTP {}", res->status);
      continue;
    }
    if (res->status != 200) {
      throw Error(ErrorCode::kProviderUnavailable,
                  fmt::format("{}: HTTP {}: {}", request.tag, res->status,
                              res->body.substr(0, 300)));
    }
    try {
      const auto j = json::parse(res->body);
      ProviderReply reply;
      const auto& content = j.at("choices").at(0).at("message").at("content");
      reply.text = content.is_string() ? content.get<std::string>() : std::string{};
      if (j.contains("usage")) {
        reply.prompt_tokens = j["usage"].value("prompt_tokens", std::int64_t{0});
        reply.completion_tokens = j["usage"].value("completion_tokens", std::int64_t{0});
      }
      reply.latency = std::chrono::duration_cast<std::chrono::microseconds>(
          std::chrono::steady_clock::now() - started);
      reply.retries = attempt;
      return reply;
    } catch (const json::exception& e) {
      throw Error(ErrorCode::kProviderUnavailable,
                  fmt::format("{}: malformed completion response: {}", request.tag, e.what()));
    }
  }
  throw Error(ErrorCode::kProviderUnavailable,
              fmt::format("{}: giving up after {} retries (last failure: {})", request.tag,
                          options_.retry.max_retries, last_failure));
}

}  // namespace memfl
