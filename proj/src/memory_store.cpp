#include "memfl/memory_store.hpp"

#include <fstream>
#include <mutex>
#include <sstream>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "json.hpp"
#include "memfl/hashing.hpp"
#include "memfl/parallel.hpp"

namespace memfl {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string ask(Gateway& gateway, const PromptLibrary& prompts, const SummaryOptions& options,
                std::string tag, std::string step, const std::string& content) {
  ChatRequest req;
  req.model = options.model;
  req.temperature = options.temperature;
  req.max_output_tokens = options.max_output_tokens;
  req.messages = {{"system", prompts.raw("system")}, {"user", content}};
  req.tag = std::move(tag);
  req.step = std::move(step);
  return trim(gateway.complete(req).reply_text);
}

struct ClassOutcome {
  std::string summary;
  std::size_t calls = 0;
  std::vector<std::string> flagged;
};

ClassOutcome summarize_class(const ProjectSnapshot& snapshot, const ClassRecord& cls,
                             const std::string& hash, Gateway& gateway,
                             const PromptLibrary& prompts, const SummaryOptions& options) {
  const auto tag_base = fmt::format("summary/class/{}/{}", cls.name, hash.substr(0, 12));
  PromptVars vars{{"project_name", snapshot.project_name()},
                  {"class_name", cls.name},
                  {"file", cls.file},
                  {"part", ""},
                  {"source", cls.source_text}};
  const auto whole = prompts.render("summarize_class", vars);
  ClassOutcome out;
  if (estimate_tokens(whole) <= options.chunk_token_budget) {
    out.summary = ask(gateway, prompts, options, tag_base, "summary", whole);
    out.calls = 1;
    return out;
  }

  vars["source"] = "";
  vars["part"] = "999 of 999";
  const long long overhead = estimate_tokens(prompts.render("summarize_class", vars));
  const long long available = std::max<long long>(1, options.chunk_token_budget - overhead);
  std::vector<std::string> chunks;
  std::string current;
  for (const auto& m : cls.methods) {
    std::string piece = m.body_text;
    if (estimate_tokens(piece) > available) {
      piece = m.doc_text ? *m.doc_text + "\n" + m.signature() + " ... }" : m.signature() + " ... }";
      out.flagged.push_back(m.ref.str());
      spdlog::warn("{} is too large to summarize; using its signature only", m.ref.str());
    }
    if (!current.empty() && estimate_tokens(current) + estimate_tokens(piece) + 1 > available) {
      chunks.push_back(std::move(current));
      current.clear();
    }
    if (!current.empty()) current += "\n\n";
    current += piece;
  }
  if (!current.empty()) chunks.push_back(std::move(current));

  std::vector<std::string> parts;
  for (std::size_t i = 0; i < chunks.size(); ++i) {
    vars["source"] = chunks[i];
    vars["part"] = chunks.size() > 1 ? fmt::format("{} of {}", i + 1, chunks.size()) : "";
    parts.push_back(ask(gateway, prompts, options, fmt::format("{}/part{}", tag_base, i + 1),
                        "summary", prompts.render("summarize_class", vars)));
    ++out.calls;
  }
  if (parts.size() == 1) {
    out.summary = parts.front();
    return out;
  }
  std::string joined;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    joined += fmt::format("## Part {}\n{}\n\n", i + 1, parts[i]);
  }
  out.summary = ask(gateway, prompts, options, tag_base + "/merge", "summary",
                    prompts.render("summarize_class_merge",
                                   {{"project_name", snapshot.project_name()},
                                    {"class_name", cls.name},
                                    {"part_count", std::to_string(parts.size())},
                                    {"parts", trim(joined)}}));
  ++out.calls;
  return out;
}

std::string summaries_block(const std::vector<std::pair<std::string, std::string>>& items) {
  std::string out;
  for (const auto& [name, summary] : items) out += fmt::format("### {}\n{}\n\n", name, summary);
  return trim(out);
}

}  // namespace

std::string class_content_hash(const ClassRecord& cls) {
  Sha256 h;
  h.feed_field(cls.name);
  h.feed_field(cls.file);
  h.feed_field(cls.source_text);
  for (const auto& m : cls.methods) {
    h.feed_field(m.ref.str());
    h.feed_field(fmt::format("{}-{}", m.body_span.first, m.body_span.last));
  }
  return h.hex_digest();
}

ClassSummaryResult generate_class_summaries(const ProjectSnapshot& snapshot, Gateway& gateway,
                                            const PromptLibrary& prompts,
                                            const SummaryOptions& options,
                                            const StaticMemory* previous) {
  if (snapshot.classes().empty()) {
    throw Error(ErrorCode::kInvalidInput, "cannot summarize an empty snapshot");
  }
  const auto& classes = snapshot.classes();
  std::vector<ClassOutcome> outcomes(classes.size());
  std::vector<std::string> hashes(classes.size());
  std::vector<bool> reused(classes.size(), false);
  for (std::size_t i = 0; i < classes.size(); ++i) {
    hashes[i] = class_content_hash(classes[i]);
    if (!previous) continue;
    const auto h = previous->class_hashes.find(classes[i].name);
    const auto s = previous->class_summaries.find(classes[i].name);
    if (h != previous->class_hashes.end() && s != previous->class_summaries.end() &&
        h->second == hashes[i]) {
      outcomes[i].summary = s->second;
      reused[i] = true;
    }
  }
  parallel_for(classes.size(), options.workers, [&](std::size_t i) {
    if (!reused[i]) {
      outcomes[i] = summarize_class(snapshot, classes[i], hashes[i], gateway, prompts, options);
    }
  });
  ClassSummaryResult result;
  for (std::size_t i = 0; i < classes.size(); ++i) {
    result.summaries[classes[i].name] = outcomes[i].summary;
    result.hashes[classes[i].name] = hashes[i];
    result.calls += outcomes[i].calls;
    result.flagged.insert(result.flagged.end(), outcomes[i].flagged.begin(),
                          outcomes[i].flagged.end());
  }
  return result;
}

std::string generate_project_summary(const std::string& project_name,
                                     const std::map<std::string, std::string>& class_summaries,
                                     Gateway& gateway, const PromptLibrary& prompts,
                                     const SummaryOptions& options) {
  if (class_summaries.empty()) {
    throw Error(ErrorCode::kInvalidInput, "project summary needs at least one class summary");
  }
  const std::vector<std::pair<std::string, std::string>> items(class_summaries.begin(),
                                                               class_summaries.end());
  const auto single = prompts.render(
      "summarize_project",
      {{"project_name", project_name}, {"group", ""}, {"class_summaries", summaries_block(items)}});
  if (estimate_tokens(single) <= options.project_token_budget || items.size() <= 1) {
    return ask(gateway, prompts, options, "summary/project", "summary", single);
  }

  const std::size_t group = std::max<std::size_t>(1, options.group_size);
  std::vector<std::pair<std::string, std::string>> groups;
  for (std::size_t start = 0, g = 1; start < items.size(); start += group, ++g) {
    const auto end = std::min(items.size(), start + group);
    const std::vector<std::pair<std::string, std::string>> slice(items.begin() + start,
                                                                 items.begin() + end);
    const auto label = fmt::format("classes {}-{} of {}", start + 1, end, items.size());
    const auto prompt = prompts.render(
        "summarize_project",
        {{"project_name", project_name}, {"group", label}, {"class_summaries", summaries_block(slice)}});
    groups.emplace_back(label, ask(gateway, prompts, options,
                                   fmt::format("summary/project/group{}", g), "summary", prompt));
  }
  return ask(gateway, prompts, options, "summary/project/merge", "summary",
             prompts.render("summarize_project_merge",
                            {{"project_name", project_name},
                             {"group_count", std::to_string(groups.size())},
                             {"group_summaries", summaries_block(groups)}}));
}

ExternalMemory apply_refinement(const ExternalMemory& memory, PipelineStep step,
                                const std::optional<std::string>& new_guidance,
                                const RefinementMeta& meta) {
  if (!new_guidance) return memory;
  ExternalMemory next = memory;
  next.dynamic_part[static_cast<std::size_t>(step)] = *new_guidance;
  next.version = memory.version + 1;
  next.provenance.push_back({step, next.version, meta.iteration, meta.bug_ids, meta.note});
  return next;
}

namespace {

json memory_body(const ExternalMemory& m) {
  json classes = json::object();
  for (const auto& [name, summary] : m.static_part.class_summaries) {
    json c = {{"summary", summary}};
    if (const auto it = m.static_part.class_hashes.find(name); it != m.static_part.class_hashes.end()) {
      c["content_hash"] = it->second;
    }
    classes[name] = std::move(c);
  }
  json dynamic = json::object();
  for (auto s : kAllSteps) dynamic[std::string(step_name(s))] = m.guidance(s);
  json provenance = json::array();
  for (const auto& e : m.provenance) {
    provenance.push_back({{"step", std::string(step_name(e.step))},
                          {"version", e.version},
                          {"iteration", e.iteration},
                          {"bug_ids", e.bug_ids},
                          {"note", e.note}});
  }
  return {{"format", "memfl-memory/1"},
          {"static", {{"project_summary", m.static_part.project_summary}, {"classes", classes}}},
          {"dynamic", dynamic},
          {"version", m.version},
          {"provenance", provenance},
          {"snapshot_fingerprint", m.snapshot_fingerprint}};
}

}  // namespace

std::string memory_fingerprint(const ExternalMemory& memory) {
  return sha256_hex(memory_body(memory).dump());
}

std::string memory_to_json(const ExternalMemory& memory) {
  auto doc = memory_body(memory);
  doc["fingerprint"] = sha256_hex(doc.dump());
  return doc.dump(1) + "\n";
}

ExternalMemory memory_from_json(std::string_view text) {
  auto corrupt = [](const std::string& why) {
    return Error(ErrorCode::kCorruptMemoryFile, fmt::format("memory file is corrupt: {}", why));
  };
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw corrupt(e.what());
  }
  if (!doc.is_object() || !doc.contains("fingerprint")) throw corrupt("missing fingerprint");
  const auto stored = doc["fingerprint"].get<std::string>();
  doc.erase("fingerprint");
  if (sha256_hex(doc.dump()) != stored) throw corrupt("fingerprint mismatch");
  try {
    ExternalMemory m;
    m.static_part.project_summary = doc.at("static").at("project_summary").get<std::string>();
    for (const auto& [name, c] : doc.at("static").at("classes").items()) {
      m.static_part.class_summaries[name] = c.at("summary").get<std::string>();
      if (c.contains("content_hash")) {
        m.static_part.class_hashes[name] = c.at("content_hash").get<std::string>();
      }
    }
    for (auto s : kAllSteps) {
      m.dynamic_part[static_cast<std::size_t>(s)] =
          doc.at("dynamic").at(std::string(step_name(s))).get<std::string>();
    }
    m.version = doc.at("version").get<int>();
    for (const auto& e : doc.at("provenance")) {
      m.provenance.push_back({parse_step(e.at("step").get<std::string>()),
                              e.at("version").get<int>(), e.at("iteration").get<int>(),
                              e.at("bug_ids").get<std::vector<std::string>>(),
                              e.at("note").get<std::string>()});
    }
    m.snapshot_fingerprint = doc.at("snapshot_fingerprint").get<std::string>();
    return m;
  } catch (const json::exception& e) {
    throw corrupt(e.what());
  }
}

void save_memory(const fs::path& path, const ExternalMemory& memory) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  const auto tmp = fs::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw Error(ErrorCode::kIo, fmt::format("cannot write {}", tmp.string()));
    out << memory_to_json(memory);
  }
  fs::rename(tmp, path);
}

ExternalMemory load_memory(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kNotFound, fmt::format("memory file {} not found", path.string()));
  std::ostringstream ss;
  ss << in.rdbuf();
  return memory_from_json(ss.str());
}

bool check_snapshot(const ExternalMemory& memory, const ProjectSnapshot& snapshot) {
  if (memory.snapshot_fingerprint == snapshot.fingerprint()) return true;
  spdlog::warn("memory was built for snapshot {} but the project is now {}; static summaries may be stale",
               memory.snapshot_fingerprint.substr(0, 12), snapshot.fingerprint().substr(0, 12));
  return false;
}

}  // namespace memfl
