#include "memfl/pipeline.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "json.hpp"
#include "memfl/hashing.hpp"
#include "memfl/parallel.hpp"
#include "memfl/selection.hpp"

namespace memfl {

namespace fs = std::filesystem;
using nlohmann::json;

CoverageRate coverage_rate(const ClassRecord& cls, const CoverageProfile& coverage) {
  if (cls.methods.empty()) {
    throw Error(ErrorCode::kInvalidInput, fmt::format("class {} has no methods", cls.name));
  }
  int covered = 0;
  for (const auto& m : cls.methods) covered += coverage.is_covered(m.ref) ? 1 : 0;
  return {covered, static_cast<int>(cls.methods.size())};
}

std::vector<std::string> prefilter_classes(const ProjectSnapshot& snapshot,
                                           const CoverageProfile& coverage, std::size_t cap) {
  std::vector<std::pair<CoverageRate, const std::string*>> rated;
  for (const auto& c : snapshot.classes()) {
    const auto r = coverage_rate(c, coverage);
    if (r.covered > 0) rated.emplace_back(r, &c.name);
  }
  std::stable_sort(rated.begin(), rated.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return *a.second < *b.second;
  });
  std::vector<std::string> out;
  for (std::size_t i = 0; i < rated.size() && i < cap; ++i) out.push_back(*rated[i].second);
  return out;
}

std::string number_lines(std::string_view text, int first_line) {
  const auto lines = split_lines(text);
  const auto width = std::to_string(first_line + static_cast<int>(lines.size())).size();
  std::string out;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    out += fmt::format("{:>{}}  {}\n", first_line + static_cast<int>(i), width, lines[i]);
  }
  if (!out.empty()) out.pop_back();
  return out;
}

std::string render_bug_info(const BugCase& bug, const PromptLibrary& prompts, bool with_helpers) {
  const auto& test = bug.primary_test();
  std::string helpers;
  if (with_helpers) {
    for (const auto& h : test.helpers) {
      if (!helpers.empty()) helpers += "\n\n";
      helpers += fmt::format("// {}\n{}", h.name, h.source);
    }
  }
  std::string trace;
  for (const auto& f : bug.stack_trace) {
    if (!trace.empty()) trace += '\n';
    trace += f.line > 0 ? fmt::format("    at {}.{}(line {})", f.class_name, f.method_name, f.line)
                        : fmt::format("    at {}.{}(unknown line)", f.class_name, f.method_name);
  }
  return prompts.render("bug_info", {{"test_name", test.name},
                                     {"test_source", test.source},
                                     {"helper_sources", helpers},
                                     {"error_message", bug.error_message},
                                     {"stack_trace", trace.empty() ? "(none)" : trace}});
}

namespace {

const std::string& guidance_for(const StepContext& ctx, PipelineStep step) {
  static const std::string empty;
  return ctx.options.toggles.dynamic_memory ? ctx.memory.guidance(step) : empty;
}

int cap_for(const StepContext& ctx, PipelineStep step, int fallback) {
  const auto cap = guidance_cap(guidance_for(ctx, step));
  return cap && *cap > 0 ? *cap : fallback;
}

std::string call(const StepContext& ctx, PipelineStep step, std::string tag,
                 const std::string& content, RankedSuspects& result) {
  ChatRequest req;
  req.model = ctx.options.model;
  req.temperature = ctx.options.temperature;
  req.max_output_tokens = ctx.options.max_output_tokens;
  req.messages = {{"system", ctx.prompts.raw("system")}, {"user", content}};
  req.tag = std::move(tag);
  req.step = std::string(step_name(step));
  req.bug_id = ctx.bug.bug_id;
  const auto ex = ctx.gateway.complete(req);
  result.usage += TokenUsage{1, ex.prompt_tokens, ex.completion_tokens, ex.cost_micros, ex.latency};
  return ex.reply_text;
}

std::string step_tag(const StepContext& ctx, PipelineStep step) {
  return fmt::format("{}/{}/{}", ctx.options.scope, step_name(step), ctx.bug.bug_id);
}

void warn(RankedSuspects& result, std::string message) {
  spdlog::warn("{}: {}", result.bug_id, message);
  result.warnings.push_back(std::move(message));
}

bool over_budget(const StepContext& ctx, const std::string& prompt) {
  return estimate_tokens(prompt) > ctx.options.prompt_token_budget;
}

const std::string& class_summary(const StepContext& ctx, const std::string& name) {
  static const std::string none = "(no summary available)";
  const auto& sums = ctx.memory.static_part.class_summaries;
  const auto it = sums.find(name);
  return it == sums.end() ? none : it->second;
}

// Candidates by r_c descending, name ascending.
std::vector<std::string> by_rate(const StepContext& ctx, std::vector<std::string> names) {
  std::vector<std::pair<CoverageRate, std::string>> rated;
  for (auto& n : names) {
    const auto* c = ctx.snapshot.find_class(n);
    rated.emplace_back(c ? coverage_rate(*c, ctx.bug.coverage) : CoverageRate{0, 1}, std::move(n));
  }
  std::stable_sort(rated.begin(), rated.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });
  std::vector<std::string> out;
  for (auto& r : rated) out.push_back(std::move(r.second));
  return out;
}

std::vector<MethodRef> covered_methods(const StepContext& ctx, const ClassRecord& cls) {
  std::vector<MethodRef> out;
  for (const auto& m : cls.methods) {
    if (ctx.bug.coverage.is_covered(m.ref)) out.push_back(m.ref);
  }
  return out;
}

std::string method_block(const MethodRecord& m, std::string_view body) {
  return fmt::format("### {}\n```java\n{}\n```", m.ref.str(), number_lines(body, m.body_span.first));
}

}  // namespace

std::string bug_review(const StepContext& ctx, RankedSuspects& result) {
  const auto prompt = ctx.prompts.render(
      "review", {{"project_summary", ctx.memory.static_part.project_summary},
                 {"bug_info", render_bug_info(ctx.bug, ctx.prompts, true)},
                 {"guidance", guidance_for(ctx, PipelineStep::kReview)}});
  if (over_budget(ctx, prompt)) warn(result, "review prompt exceeds the token budget");
  auto review = call(ctx, PipelineStep::kReview, step_tag(ctx, PipelineStep::kReview), prompt, result);
  result.intermediates.bug_review = review;
  return review;
}

std::vector<std::string> condense_classes(const StepContext& ctx, int stage,
                                          const std::vector<std::string>& candidates,
                                          const std::string& review, RankedSuspects& result) {
  if (stage != 1 && stage != 2) {
    throw Error(ErrorCode::kInvalidInput, fmt::format("condensation stage {} is not 1 or 2", stage));
  }
  if (candidates.empty()) throw Error(ErrorCode::kInvalidInput, "no candidate classes");
  const auto step = stage == 1 ? PipelineStep::kCondense1 : PipelineStep::kCondense2;
  const int cap = cap_for(ctx, step, stage == 1 ? ctx.options.stage1_cap : ctx.options.stage2_cap);

  auto render = [&](const std::vector<std::string>& shown) {
    std::string listing;
    for (const auto& name : shown) {
      const auto* c = ctx.snapshot.find_class(name);
      const auto r = c ? coverage_rate(*c, ctx.bug.coverage) : CoverageRate{0, 1};
      listing += fmt::format("## {} ({} of {} methods covered)\n{}\n\n", name, r.covered, r.total,
                             class_summary(ctx, name));
    }
    return ctx.prompts.render(
        "condense_classes",
        {{"project_summary", ctx.memory.static_part.project_summary},
         {"bug_info", render_bug_info(ctx.bug, ctx.prompts, false)},
         {"bug_review", review},
         {"candidate_count", std::to_string(shown.size())},
         {"candidates", trim(listing)},
         {"guidance", guidance_for(ctx, step)},
         {"strictness", stage == 1 ? "Remove the classes that are clearly unrelated to the failure and "
                                     "keep every class that may plausibly be involved."
                                   : "Keep only the classes most likely to contain the fault."},
         {"cap", std::to_string(cap)}});
  };

  auto shown = candidates;
  auto prompt = render(shown);
  if (over_budget(ctx, prompt)) {
    auto ranked = by_rate(ctx, shown);
    while (over_budget(ctx, prompt) && ranked.size() > 1) {
      const auto dropped = ranked.back();
      ranked.pop_back();
      shown.erase(std::find(shown.begin(), shown.end(), dropped));
      warn(result, fmt::format("{}: dropped candidate {} to fit the token budget",
                               step_name(step), dropped));
      prompt = render(shown);
    }
  }

  const auto reply = call(ctx, step, step_tag(ctx, step), prompt, result);
  std::vector<std::string> kept;
  if (const auto names = extract_string_array(reply)) {
    for (const auto& n : *names) {
      std::string resolved;
      if (std::find(shown.begin(), shown.end(), n) != shown.end()) {
        resolved = n;
      } else if (const auto* c = ctx.snapshot.find_class_lenient(n);
                 c && std::find(shown.begin(), shown.end(), c->name) != shown.end()) {
        resolved = c->name;
      } else {
        warn(result, fmt::format("{}: unknown class {} dropped", step_name(step), n));
        continue;
      }
      if (std::find(kept.begin(), kept.end(), resolved) == kept.end()) kept.push_back(resolved);
    }
    if (kept.size() > static_cast<std::size_t>(cap)) kept.resize(cap);
    if (!kept.empty()) return kept;
    warn(result, fmt::format("{}: reply selected no known class", step_name(step)));
  } else {
    warn(result, fmt::format("{}: unparseable selection", step_name(step)));
  }
  result.degraded_steps.insert(std::string(step_name(step)));
  kept = by_rate(ctx, candidates);
  if (kept.size() > static_cast<std::size_t>(cap)) kept.resize(cap);
  return kept;
}

namespace {

std::optional<MethodRef> parse_method_token(const ClassRecord& cls, const std::string& token) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  for (;;) {
    const auto at = token.find('@', start);
    parts.push_back(trim(token.substr(start, at - start)));
    if (at == std::string::npos) break;
    start = at + 1;
  }
  if (parts.size() > 3 || parts.empty()) return std::nullopt;
  MethodRef ref{cls.name, parts.size() == 3 ? parts[1] : parts[0], 0};
  if (parts.size() >= 2) {
    const auto& line = parts.back();
    if (line.empty() || !std::all_of(line.begin(), line.end(), ::isdigit) || line.size() > 9) {
      return std::nullopt;
    }
    ref.decl_line = std::stoi(line);
  }
  if (ref.method_name.empty()) return std::nullopt;
  return ref;
}

}  // namespace

std::vector<MethodRef> condense_methods(const StepContext& ctx, const ClassRecord& cls,
                                        const std::string& review, RankedSuspects& result) {
  const auto step = PipelineStep::kCondense3;
  const int cap = cap_for(ctx, step, ctx.options.methods_per_class);
  auto render = [&](const std::string& window, const std::string& source) {
    return ctx.prompts.render("condense_methods",
                              {{"project_summary", ctx.memory.static_part.project_summary},
                               {"bug_info", render_bug_info(ctx.bug, ctx.prompts, false)},
                               {"bug_review", review},
                               {"class_name", cls.name},
                               {"class_summary", class_summary(ctx, cls.name)},
                               {"window", window},
                               {"class_source", source},
                               {"guidance", guidance_for(ctx, step)},
                               {"cap", std::to_string(cap)}});
  };
  const auto base_tag = fmt::format("{}/{}", step_tag(ctx, step), cls.name);

  // Whole class when it fits, otherwise windows of consecutive methods.
  std::vector<std::pair<std::string, std::string>> prompts;  // (tag, prompt)
  const auto whole = render("", number_lines(cls.source_text, 1));
  if (!over_budget(ctx, whole)) {
    prompts.emplace_back(base_tag, whole);
  } else {
    const long long overhead = estimate_tokens(render("lines 99999-99999", ""));
    const long long available = std::max<long long>(1, ctx.options.prompt_token_budget - overhead);
    std::vector<std::pair<LineSpan, std::string>> windows;
    for (const auto& m : cls.methods) {
      auto lines = split_lines(m.body_text);
      auto piece = number_lines(m.body_text, m.body_span.first);
      while (estimate_tokens(piece) > available && lines.size() > 1) {
        lines.pop_back();
        piece = number_lines(join_lines(lines, 0, lines.size()), m.body_span.first) +
                "\n    ... (truncated)";
      }
      if (lines.size() < split_lines(m.body_text).size()) {
        warn(result, fmt::format("condense3: body of {} truncated to {} lines", m.ref.str(), lines.size()));
      }
      if (!windows.empty() &&
          estimate_tokens(windows.back().second) + estimate_tokens(piece) + 1 <= available) {
        windows.back().first.last = m.body_span.last;
        windows.back().second += "\n...\n" + piece;
      } else {
        windows.push_back({m.body_span, piece});
      }
    }
    warn(result, fmt::format("condense3: {} shown in {} windows to fit the token budget", cls.name,
                             windows.size()));
    for (std::size_t i = 0; i < windows.size(); ++i) {
      prompts.emplace_back(
          fmt::format("{}#w{}", base_tag, i + 1),
          render(fmt::format("lines {}-{}", windows[i].first.first, windows[i].first.last),
                 windows[i].second));
    }
  }

  std::vector<const MethodRecord*> records;
  for (const auto& m : cls.methods) records.push_back(&m);
  std::vector<MethodRef> selected;
  for (const auto& [tag, prompt] : prompts) {
    const auto tokens = extract_string_array(call(ctx, step, tag, prompt, result));
    if (!tokens) {
      warn(result, fmt::format("condense3: unparseable selection for {}", cls.name));
      result.degraded_steps.insert(std::string(step_name(step)));
      return covered_methods(ctx, cls);
    }
    for (const auto& t : *tokens) {
      const auto ref = parse_method_token(cls, t);
      const auto* rec = ref ? resolve_among(records, *ref, true) : nullptr;
      if (!rec) {
        warn(result, fmt::format("condense3: {} does not name a method of {}", t, cls.name));
        continue;
      }
      if (std::find(selected.begin(), selected.end(), rec->ref) == selected.end()) {
        selected.push_back(rec->ref);
      }
    }
  }
  if (selected.size() > static_cast<std::size_t>(cap)) selected.resize(cap);
  return selected;
}

std::vector<MethodRef> confirm_faults(const StepContext& ctx, const std::vector<MethodRef>& selected,
                                      const std::string& review, RankedSuspects& result) {
  if (selected.empty()) throw Error(ErrorCode::kInvalidInput, "no methods to confirm");
  const auto step = PipelineStep::kConfirm;
  const int cap = cap_for(ctx, step, ctx.options.ranking_cap);

  std::vector<const MethodRecord*> records;
  for (const auto& ref : selected) records.push_back(&resolve_ref(ctx.snapshot, ref, false));

  // Fallback order: class r_c descending, class name, decl_line.
  auto fallback_order = records;
  std::stable_sort(fallback_order.begin(), fallback_order.end(),
                   [&](const MethodRecord* a, const MethodRecord* b) {
                     if (a->ref.class_name != b->ref.class_name) {
                       const auto ra = coverage_rate(*ctx.snapshot.find_class(a->ref.class_name), ctx.bug.coverage);
                       const auto rb = coverage_rate(*ctx.snapshot.find_class(b->ref.class_name), ctx.bug.coverage);
                       if (ra != rb) return ra > rb;
                       return a->ref.class_name < b->ref.class_name;
                     }
                     return a->ref.decl_line < b->ref.decl_line;
                   });

  auto shown = records;
  std::map<const MethodRecord*, std::string> bodies;
  for (const auto* r : records) bodies[r] = r->body_text;
  auto render = [&] {
    std::string listing;
    for (const auto* r : shown) listing += method_block(*r, bodies[r]) + "\n\n";
    return ctx.prompts.render("confirm",
                              {{"project_summary", ctx.memory.static_part.project_summary},
                               {"bug_info", render_bug_info(ctx.bug, ctx.prompts, false)},
                               {"bug_review", review},
                               {"method_count", std::to_string(shown.size())},
                               {"methods", trim(listing)},
                               {"guidance", guidance_for(ctx, step)},
                               {"cap", std::to_string(cap)}});
  };
  auto prompt = render();
  if (over_budget(ctx, prompt)) {
    auto drop_order = fallback_order;
    while (over_budget(ctx, prompt) && shown.size() > 1) {
      const auto* dropped = drop_order.back();
      drop_order.pop_back();
      shown.erase(std::find(shown.begin(), shown.end(), dropped));
      warn(result, fmt::format("confirm: dropped {} to fit the token budget", dropped->ref.str()));
      prompt = render();
    }
    auto& body = bodies[shown.front()];
    auto lines = split_lines(body);
    while (over_budget(ctx, prompt) && lines.size() > 1) {
      lines.pop_back();
      body = join_lines(lines, 0, lines.size()) + "\n// ... (truncated)";
      prompt = render();
    }
    if (lines.size() < split_lines(shown.front()->body_text).size()) {
      warn(result, fmt::format("confirm: body of {} truncated to {} lines", shown.front()->ref.str(),
                               lines.size()));
    }
  }

  const auto tokens = extract_string_array(call(ctx, step, step_tag(ctx, step), prompt, result));
  std::vector<MethodRef> ranking;
  if (tokens) {
    for (const auto& t : *tokens) {
      MethodRef ref;
      try {
        ref = parse_method_ref(t);
      } catch (const Error&) {
        warn(result, fmt::format("confirm: malformed reference {} dropped", t));
        continue;
      }
      if (const auto* c = ctx.snapshot.find_class_lenient(ref.class_name)) ref.class_name = c->name;
      const MethodRecord* rec = resolve_among(records, ref, true);
      if (!rec) {
        try {
          rec = &resolve_ref(ctx.snapshot, ref, true);
        } catch (const Error&) {
          warn(result, fmt::format("confirm: {} is not in the project, dropped", t));
          continue;
        }
      }
      if (std::find(ranking.begin(), ranking.end(), rec->ref) == ranking.end()) {
        ranking.push_back(rec->ref);
      }
    }
    if (ranking.empty()) warn(result, "confirm: reply ranked no known method");
  } else {
    warn(result, "confirm: unparseable ranking");
  }
  if (ranking.empty()) {
    result.degraded_steps.insert(std::string(step_name(step)));
    for (const auto* r : fallback_order) ranking.push_back(r->ref);
  }
  if (ranking.size() > static_cast<std::size_t>(cap)) ranking.resize(cap);
  return ranking;
}

RankedSuspects localize(const StepContext& ctx) {
  const auto started = std::chrono::steady_clock::now();
  RankedSuspects result;
  result.bug_id = ctx.bug.bug_id;
  const auto& toggles = ctx.options.toggles;
  auto& im = result.intermediates;

  const std::string review = toggles.review ? bug_review(ctx, result) : std::string();
  im.prefiltered_classes = prefilter_classes(ctx.snapshot, ctx.bug.coverage, ctx.options.prefilter_cap);
  if (im.prefiltered_classes.empty()) {
    warn(result, "the failing test covers no method of the project");
    result.degraded_steps.insert("prefilter");
    return result;
  }

  std::vector<MethodRef> methods;
  if (toggles.condensation) {
    im.kept_classes_1 = condense_classes(ctx, 1, im.prefiltered_classes, review, result);
    im.kept_classes_2 = condense_classes(ctx, 2, im.kept_classes_1, review, result);
    for (const auto& name : im.kept_classes_2) {
      const auto part = condense_methods(ctx, *ctx.snapshot.find_class(name), review, result);
      methods.insert(methods.end(), part.begin(), part.end());
    }
    if (methods.empty()) {
      warn(result, "condense3: no method selected; using the covered methods of the kept classes");
      result.degraded_steps.insert(std::string(step_name(PipelineStep::kCondense3)));
      for (const auto& name : im.kept_classes_2) {
        const auto part = covered_methods(ctx, *ctx.snapshot.find_class(name));
        methods.insert(methods.end(), part.begin(), part.end());
      }
    }
  } else {
    for (const auto& name : im.prefiltered_classes) {
      const auto part = covered_methods(ctx, *ctx.snapshot.find_class(name));
      methods.insert(methods.end(), part.begin(), part.end());
    }
  }
  im.kept_methods = methods;
  if (!methods.empty()) result.ranking = confirm_faults(ctx, methods, review, result);
  result.wall_time = std::chrono::duration_cast<std::chrono::microseconds>(
      std::chrono::steady_clock::now() - started);
  return result;
}

std::vector<RankedSuspects> localize_all(const ProjectSnapshot& snapshot,
                                         const std::vector<const BugCase*>& bugs,
                                         const ExternalMemory& memory, Gateway& gateway,
                                         const PromptLibrary& prompts,
                                         const PipelineOptions& options) {
  std::vector<RankedSuspects> results(bugs.size());
  parallel_for(bugs.size(), options.workers, [&](std::size_t i) {
    results[i] = localize({snapshot, *bugs[i], memory, gateway, prompts, options});
  });
  return results;
}

std::vector<std::string> check_result_invariants(const ProjectSnapshot& snapshot,
                                                 const RankedSuspects& result,
                                                 const PipelineOptions& options) {
  std::vector<std::string> violations;
  std::set<MethodRef> seen;
  for (const auto& r : result.ranking) {
    if (!seen.insert(r).second) violations.push_back("duplicate ranking entry " + r.str());
    if (!snapshot.find_exact(r)) violations.push_back("unresolved ranking entry " + r.str());
  }
  const auto& im = result.intermediates;
  if (im.prefiltered_classes.size() > options.prefilter_cap) {
    violations.push_back("prefilter exceeds its cap");
  }
  if (!options.toggles.condensation || result.degraded()) return violations;
  auto subset = [](const std::vector<std::string>& a, const std::vector<std::string>& b) {
    return std::all_of(a.begin(), a.end(),
                       [&](const auto& x) { return std::find(b.begin(), b.end(), x) != b.end(); });
  };
  if (im.kept_classes_1.size() > im.prefiltered_classes.size() ||
      !subset(im.kept_classes_1, im.prefiltered_classes)) {
    violations.push_back("stage 1 classes are not a subset of the prefiltered classes");
  }
  if (im.kept_classes_2.size() > im.kept_classes_1.size() ||
      !subset(im.kept_classes_2, im.kept_classes_1)) {
    violations.push_back("stage 2 classes are not a subset of the stage 1 classes");
  }
  for (const auto& m : im.kept_methods) {
    if (std::find(im.kept_classes_2.begin(), im.kept_classes_2.end(), m.class_name) ==
        im.kept_classes_2.end()) {
      violations.push_back("selected method outside the kept classes: " + m.str());
    }
  }
  return violations;
}

namespace {

json refs_json(const std::vector<MethodRef>& refs) {
  json out = json::array();
  for (const auto& r : refs) out.push_back(r.str());
  return out;
}

std::vector<MethodRef> refs_from(const json& j) {
  std::vector<MethodRef> out;
  for (const auto& e : j) out.push_back(parse_method_ref(e.get<std::string>()));
  return out;
}

}  // namespace

std::string result_to_json(const RankedSuspects& r) {
  const auto& im = r.intermediates;
  json doc = {
      {"bug_id", r.bug_id},
      {"ranking", refs_json(r.ranking)},
      {"intermediates",
       {{"bug_review", im.bug_review},
        {"prefiltered_classes", im.prefiltered_classes},
        {"kept_classes_1", im.kept_classes_1},
        {"kept_classes_2", im.kept_classes_2},
        {"kept_methods", refs_json(im.kept_methods)}}},
      // Time is the sum of step latencies so replayed runs stay byte-identical.
      {"telemetry",
       {{"calls", r.usage.calls},
        {"prompt_tokens", r.usage.prompt_tokens},
        {"completion_tokens", r.usage.completion_tokens},
        {"cost_micros", r.usage.cost_micros},
        {"cost_usd", format_dollars(r.usage.cost_micros)},
        {"time_us", r.usage.latency.count()}}},
      {"degraded", r.degraded()},
      {"degraded_steps", r.degraded_steps},
      {"warnings", r.warnings}};
  return doc.dump(2) + "\n";
}

RankedSuspects result_from_json(std::string_view text) {
  try {
    const auto doc = json::parse(text);
    RankedSuspects r;
    r.bug_id = doc.at("bug_id").get<std::string>();
    r.ranking = refs_from(doc.at("ranking"));
    const auto& im = doc.at("intermediates");
    r.intermediates.bug_review = im.at("bug_review").get<std::string>();
    r.intermediates.prefiltered_classes = im.at("prefiltered_classes").get<std::vector<std::string>>();
    r.intermediates.kept_classes_1 = im.at("kept_classes_1").get<std::vector<std::string>>();
    r.intermediates.kept_classes_2 = im.at("kept_classes_2").get<std::vector<std::string>>();
    r.intermediates.kept_methods = refs_from(im.at("kept_methods"));
    const auto& t = doc.at("telemetry");
    r.usage.calls = t.at("calls").get<std::int64_t>();
    r.usage.prompt_tokens = t.at("prompt_tokens").get<std::int64_t>();
    r.usage.completion_tokens = t.at("completion_tokens").get<std::int64_t>();
    r.usage.cost_micros = t.at("cost_micros").get<std::int64_t>();
    r.usage.latency = std::chrono::microseconds(t.at("time_us").get<std::int64_t>());
    r.degraded_steps = doc.at("degraded_steps").get<std::set<std::string>>();
    r.warnings = doc.at("warnings").get<std::vector<std::string>>();
    return r;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kInvalidInput, fmt::format("invalid result file: {}", e.what()));
  }
}

void write_result(const fs::path& dir, const RankedSuspects& result) {
  fs::create_directories(dir);
  auto name = result.bug_id;
  std::replace_if(name.begin(), name.end(), [](char c) { return c == '/' || c == '\\'; }, '_');
  std::ofstream out(dir / (name + ".json"), std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, fmt::format("cannot write results to {}", dir.string()));
  out << result_to_json(result);
}

}  // namespace memfl
