#include "memfl/memgen.hpp"

#include <algorithm>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "json.hpp"
#include "memfl/parallel.hpp"
#include "memfl/rng.hpp"
#include "memfl/selection.hpp"

namespace memfl {

using nlohmann::json;

std::vector<std::string> training_order(const std::vector<std::string>& bug_ids, std::uint64_t seed) {
  auto ids = bug_ids;
  std::sort(ids.begin(), ids.end());
  SeededRng rng(seed);
  rng.shuffle(ids);
  return ids;
}

std::vector<const BugCase*> select_training_batch(const std::vector<BugCase>& bugs,
                                                  std::size_t batch_size, std::uint64_t seed) {
  if (batch_size == 0 || batch_size > bugs.size()) {
    throw Error(ErrorCode::kInvalidBatch,
                fmt::format("batch size {} is outside 1..{}", batch_size, bugs.size()));
  }
  std::map<std::string, const BugCase*> by_id;
  for (const auto& b : bugs) by_id[b.bug_id] = &b;
  std::vector<std::string> ids;
  for (const auto& [id, _] : by_id) ids.push_back(id);
  const auto order = training_order(ids, seed);
  std::vector<const BugCase*> out;
  for (std::size_t i = 0; i < batch_size; ++i) out.push_back(by_id.at(order[i]));
  return out;
}

std::map<std::string, std::string> split_report_sections(std::string_view text) {
  std::map<std::string, std::string> out;
  std::string heading;
  std::string body;
  auto flush = [&] {
    if (!heading.empty()) out[heading] = trim(body);
    body.clear();
  };
  for (const auto& line : split_lines(text)) {
    if (line.rfind("## ", 0) == 0) {
      flush();
      heading = trim(std::string_view(line).substr(3));
    } else {
      body += line + "\n";
    }
  }
  flush();
  return out;
}

namespace {

std::string ask(Gateway& gateway, const PromptLibrary& prompts, const LlmSettings& llm,
                const std::string& tag, PipelineStep step, const std::string& bug_id,
                std::string content, std::string step_label = {}) {
  ChatRequest req;
  req.model = llm.model;
  req.temperature = llm.temperature;
  req.max_output_tokens = llm.max_output_tokens;
  req.messages = {{"system", prompts.raw("system")}, {"user", std::move(content)}};
  req.tag = tag;
  req.step = step_label.empty() ? std::string(step_name(step)) : step_label;
  req.bug_id = bug_id;
  return gateway.complete(req).reply_text;
}

LlmSettings llm_of(const PipelineOptions& p) {
  return {p.model, p.temperature, p.max_output_tokens};
}

}  // namespace

BugReport generate_bug_report(const BugCase& bug, const ProjectSnapshot& snapshot,
                              const StaticMemory& memory, Gateway& gateway,
                              const PromptLibrary& prompts, const LlmSettings& llm,
                              const std::string& tag) {
  if (bug.patched_bodies.empty()) {
    throw Error(ErrorCode::kMissingPatch, fmt::format("bug {} has no patched methods", bug.bug_id));
  }
  std::string patches;
  std::set<std::string> classes;
  for (const auto& ref : bug.ground_truth) {
    const auto& rec = resolve_ref(snapshot, ref, false);
    classes.insert(ref.class_name);
    const auto fixed = bug.patched_bodies.find(ref);
    patches += fmt::format("## {}\nBuggy version:\n```java\n{}\n```\nFixed version:\n", ref.str(),
                           number_lines(rec.body_text, rec.body_span.first));
    patches += fixed == bug.patched_bodies.end()
                   ? std::string("(not available)\n\n")
                   : fmt::format("```java\n{}\n```\n\n", fixed->second);
  }
  std::string summaries;
  for (const auto& c : classes) {
    const auto it = memory.class_summaries.find(c);
    summaries += fmt::format("## {}\n{}\n\n", c,
                             it == memory.class_summaries.end() ? "(no summary available)" : it->second);
  }
  const auto prompt = prompts.render("bug_report", {{"project_summary", memory.project_summary},
                                                    {"bug_info", render_bug_info(bug, prompts, true)},
                                                    {"patches", trim(patches)},
                                                    {"class_summaries", trim(summaries)}});
  BugReport report;
  report.bug_id = bug.bug_id;
  report.raw = ask(gateway, prompts, llm, tag, PipelineStep::kReview, bug.bug_id, prompt, "report");
  report.sections = split_report_sections(report.raw);
  return report;
}

const StageMetrics& CondenseMetrics::at(PipelineStep step) const {
  switch (step) {
    case PipelineStep::kCondense1: return stage1;
    case PipelineStep::kCondense2: return stage2;
    case PipelineStep::kCondense3: return stage3;
    default: throw Error(ErrorCode::kInvalidInput, "metrics exist only for condensation steps");
  }
}

namespace {

void finish(StageMetrics& m) {
  m.recall = m.truth == 0 ? 1.0 : static_cast<double>(m.retained) / m.truth;
  m.precision = m.selected == 0 ? 0.0 : static_cast<double>(m.relevant) / m.selected;
}

StageMetrics class_metrics(const std::vector<std::string>& kept, const std::set<std::string>& truth) {
  StageMetrics m;
  const std::set<std::string> unique(kept.begin(), kept.end());
  m.selected = unique.size();
  m.truth = truth.size();
  for (const auto& c : unique) m.relevant += truth.contains(c) ? 1 : 0;
  m.retained = m.relevant;
  finish(m);
  return m;
}

}  // namespace

CondenseMetrics compute_condense_metrics(const Intermediates& state,
                                         const std::set<MethodRef>& ground_truth) {
  std::set<std::string> truth_classes;
  for (const auto& r : ground_truth) truth_classes.insert(r.class_name);
  CondenseMetrics out;
  out.stage1 = class_metrics(state.kept_classes_1, truth_classes);
  out.stage2 = class_metrics(state.kept_classes_2, truth_classes);
  const std::set<MethodRef> kept(state.kept_methods.begin(), state.kept_methods.end());
  out.stage3.selected = kept.size();
  out.stage3.truth = ground_truth.size();
  for (const auto& m : kept) out.stage3.relevant += ground_truth.contains(m) ? 1 : 0;
  out.stage3.retained = out.stage3.relevant;
  finish(out.stage3);
  return out;
}

std::string describe_metrics(PipelineStep step, const StageMetrics& m) {
  const char* unit = step == PipelineStep::kCondense3 ? "methods" : "classes";
  return fmt::format(
      "Selected {} {}. Recall {:.2f} ({} of {} buggy {} kept). Precision {:.2f} ({} of {} "
      "selected {} are or contain buggy code).",
      m.selected, unit, m.recall, m.retained, m.truth, unit, m.precision, m.relevant, m.selected,
      unit);
}

std::string describe_step_output(PipelineStep step, const RankedSuspects& result) {
  const auto& im = result.intermediates;
  std::string out;
  auto list = [&](const auto& items, bool numbered) {
    std::size_t i = 0;
    for (const auto& item : items) {
      ++i;
      if constexpr (std::is_same_v<std::decay_t<decltype(item)>, MethodRef>) {
        out += numbered ? fmt::format("{}. {}\n", i, item.str()) : fmt::format("- {}\n", item.str());
      } else {
        out += numbered ? fmt::format("{}. {}\n", i, item) : fmt::format("- {}\n", item);
      }
    }
  };
  switch (step) {
    case PipelineStep::kReview:
      out = im.bug_review.empty() ? "(no review)" : im.bug_review;
      break;
    case PipelineStep::kCondense1:
      out = fmt::format("Kept {} of {} candidate classes:\n", im.kept_classes_1.size(),
                        im.prefiltered_classes.size());
      list(im.kept_classes_1, false);
      break;
    case PipelineStep::kCondense2:
      out = fmt::format("Kept {} of {} classes:\n", im.kept_classes_2.size(), im.kept_classes_1.size());
      list(im.kept_classes_2, false);
      break;
    case PipelineStep::kCondense3:
      out = fmt::format("Selected {} methods:\n", im.kept_methods.size());
      list(im.kept_methods, false);
      break;
    case PipelineStep::kConfirm:
      out = "Ranking, most suspicious first:\n";
      list(result.ranking, true);
      break;
  }
  if (result.degraded_steps.contains(std::string(step_name(step)))) {
    out += "\n(The reply for this step could not be used; a fallback selection was applied.)";
  }
  return trim(out);
}

namespace {

struct StepText {
  const char* title;
  const char* description;
};

StepText step_text(PipelineStep step) {
  switch (step) {
    case PipelineStep::kReview:
      return {"bug review",
              "Given the failing test, error message and stack trace, the model writes a review of "
              "what the test checks and the likely root cause."};
    case PipelineStep::kCondense1:
      return {"class selection, first pass",
              "From the classes executed by the failing test, ranked by method coverage, the model "
              "removes the classes unrelated to the failure using their summaries."};
    case PipelineStep::kCondense2:
      return {"class selection, second pass",
              "From the classes kept by the first pass, the model keeps only the few most likely "
              "to contain the fault."};
    case PipelineStep::kCondense3:
      return {"method selection",
              "For each kept class, the model reads the source code and selects the methods that "
              "may be involved in the failure."};
    case PipelineStep::kConfirm:
      return {"fault confirmation",
              "The model reads the bodies of the selected methods and ranks them by their "
              "likelihood of containing the fault."};
  }
  return {"", ""};
}

}  // namespace

std::optional<std::string> refine_step_memory(PipelineStep step, const std::string& step_output,
                                              const BugCase& bug, const BugReport& report,
                                              const ExternalMemory& memory,
                                              const std::string& current_guidance,
                                              const std::optional<StageMetrics>& metrics,
                                              Gateway& gateway, const PromptLibrary& prompts,
                                              const LlmSettings& llm, const std::string& tag) {
  if (is_condense_step(step) && !metrics) {
    throw Error(ErrorCode::kInvalidInput,
                fmt::format("refining {} requires condensation metrics", step_name(step)));
  }
  if (!is_condense_step(step) && report.raw.empty()) {
    throw Error(ErrorCode::kInvalidInput,
                fmt::format("refining {} requires a bug report", step_name(step)));
  }
  const auto text = step_text(step);
  const auto prompt = prompts.render(
      "refine",
      {{"project_summary", memory.static_part.project_summary},
       {"step_title", text.title},
       {"step_description", text.description},
       {"guidance", current_guidance},
       {"bug_info", render_bug_info(bug, prompts, step == PipelineStep::kReview)},
       {"bug_report", report.raw},
       {"metrics", metrics ? describe_metrics(step, *metrics) : ""},
       {"step_output", step_output},
       {"cap_hint", step == PipelineStep::kReview
                        ? ""
                        : "To change how many items this step keeps, add a line `CAP: <n>` to the guidance."}});
  const auto reply = ask(gateway, prompts, llm, tag, step, bug.bug_id, prompt, "refine");
  if (is_no_update(reply)) return std::nullopt;
  return trim(reply);
}

ExternalMemory build_dynamic_memory(const std::vector<BugCase>& training_bugs,
                                    const ProjectSnapshot& snapshot, const ExternalMemory& memory,
                                    Gateway& gateway, const PromptLibrary& prompts,
                                    const MemgenOptions& options, MemgenLog* log) {
  std::map<std::string, const BugCase*> by_id;
  for (const auto& b : training_bugs) {
    if (options.evaluation_ids.contains(b.bug_id)) {
      throw Error(ErrorCode::kLeakage,
                  fmt::format("bug {} is in both the training and the evaluation set", b.bug_id));
    }
    by_id[b.bug_id] = &b;
  }
  if (options.batch_size == 0 || options.batch_size > by_id.size()) {
    throw Error(ErrorCode::kInvalidBatch, fmt::format("batch size {} is outside 1..{}",
                                                      options.batch_size, by_id.size()));
  }
  if (options.iterations < 1) throw Error(ErrorCode::kInvalidInput, "iterations must be at least 1");
  std::vector<std::string> ids;
  for (const auto& [id, _] : by_id) ids.push_back(id);

  MemgenLog local_log;
  MemgenLog& out_log = log ? *log : local_log;
  out_log = {};
  out_log.seed = options.seed;
  out_log.batch_size = options.batch_size;

  const auto llm = llm_of(options.pipeline);
  std::map<std::string, BugReport> reports;
  std::set<std::string> missing;

  // Walks the seeded order, skipping bugs without patches, until the batch is full.
  auto pick_batch = [&](std::uint64_t seed) {
    std::vector<std::string> batch;
    for (const auto& id : training_order(ids, seed)) {
      if (batch.size() == options.batch_size) break;
      const auto& bug = *by_id.at(id);
      if (bug.ground_truth.empty() || bug.patched_bodies.empty()) {
        if (missing.insert(id).second) {
          spdlog::warn("{}: MissingPatch, excluded from the training batch", id);
          out_log.missing_patch.push_back(id);
        }
        continue;
      }
      batch.push_back(id);
    }
    if (batch.empty()) throw Error(ErrorCode::kInvalidBatch, "no training bug has a patch");
    if (batch.size() < options.batch_size) {
      spdlog::warn("only {} training bugs have patches; batch is smaller than {}", batch.size(),
                   options.batch_size);
    }
    std::sort(batch.begin(), batch.end());
    for (const auto& id : batch) {
      if (!reports.contains(id)) {
        reports[id] = generate_bug_report(*by_id.at(id), snapshot, memory.static_part, gateway,
                                          prompts, llm, fmt::format("{}/report/{}", options.scope, id));
      }
    }
    return batch;
  };

  const auto& toggles = options.pipeline.toggles;
  auto step_enabled = [&](PipelineStep s) {
    if (s == PipelineStep::kReview) return toggles.review;
    if (is_condense_step(s)) return toggles.condensation;
    return true;
  };

  ExternalMemory current = memory;
  auto batch = pick_batch(options.seed);
  for (int n = 0; n < options.iterations; ++n) {
    const int it = options.first_iteration + n;
    if (n > 0 && options.resample_each_iteration) {
      batch = pick_batch(options.seed + static_cast<std::uint64_t>(n));
    }
    IterationLog itlog;
    itlog.iteration = it;
    itlog.batch = batch;
    itlog.version_before = current.version;

    auto pipeline = options.pipeline;
    pipeline.toggles.dynamic_memory = true;
    pipeline.scope = fmt::format("{}/i{}", options.scope, it);
    std::vector<std::optional<RankedSuspects>> results(batch.size());
    parallel_for(batch.size(), pipeline.workers, [&](std::size_t i) {
      try {
        results[i] = localize({snapshot, *by_id.at(batch[i]), current, gateway, prompts, pipeline});
      } catch (const Error& e) {
        spdlog::warn("{}: localization failed in iteration {}, skipped: {}", batch[i], it, e.what());
      }
    });
    for (std::size_t i = 0; i < batch.size(); ++i) {
      if (!results[i]) {
        itlog.skipped.push_back(batch[i]);
        continue;
      }
      std::vector<std::string> ranking;
      for (const auto& r : results[i]->ranking) ranking.push_back(r.str());
      itlog.rankings[batch[i]] = ranking;
    }

    // Refinement is sequential in step order, then bug id order, so memory
    // evolution does not depend on worker scheduling.
    bool any_update = false;
    const ExternalMemory start = current;
    for (auto step : kAllSteps) {
      if (!step_enabled(step)) continue;
      std::string guidance = start.guidance(step);
      std::vector<std::string> contributors;
      for (std::size_t i = 0; i < batch.size(); ++i) {
        if (!results[i]) continue;
        const auto& bug = *by_id.at(batch[i]);
        std::optional<StageMetrics> metrics;
        if (is_condense_step(step)) {
          metrics = compute_condense_metrics(results[i]->intermediates, bug.ground_truth).at(step);
        }
        const auto updated = refine_step_memory(
            step, describe_step_output(step, *results[i]), bug, reports.at(batch[i]), start,
            guidance, metrics, gateway, prompts, llm,
            fmt::format("{}/i{}/refine/{}/{}", options.scope, it, step_name(step), batch[i]));
        itlog.refinements.push_back({step, batch[i], updated.has_value(), metrics});
        if (updated) {
          guidance = *updated;
          contributors.push_back(batch[i]);
        }
      }
      if (!contributors.empty()) {
        any_update = true;
        current = apply_refinement(current, step, guidance,
                                   {it, contributors,
                                    fmt::format("{} refined from {} bug(s)", step_name(step),
                                                contributors.size())});
        out_log.events.push_back(current.provenance.back());
      }
    }
    itlog.version_after = current.version;
    out_log.iterations.push_back(std::move(itlog));
    if (!any_update) {
      spdlog::info("dynamic memory converged after iteration {}", it);
      out_log.converged = true;
      break;
    }
  }
  return current;
}

namespace {

json stage_json(const StageMetrics& m) {
  return {{"selected", m.selected}, {"relevant", m.relevant}, {"truth", m.truth},
          {"retained", m.retained}, {"recall", m.recall},     {"precision", m.precision}};
}

}  // namespace

std::string memgen_log_to_json(const MemgenLog& log) {
  json iterations = json::array();
  for (const auto& it : log.iterations) {
    json refinements = json::array();
    for (const auto& r : it.refinements) {
      json e = {{"step", std::string(step_name(r.step))}, {"bug_id", r.bug_id}, {"updated", r.updated}};
      if (r.metrics) e["metrics"] = stage_json(*r.metrics);
      refinements.push_back(std::move(e));
    }
    iterations.push_back({{"iteration", it.iteration},
                          {"batch", it.batch},
                          {"skipped", it.skipped},
                          {"rankings", it.rankings},
                          {"refinements", refinements},
                          {"version_before", it.version_before},
                          {"version_after", it.version_after}});
  }
  json events = json::array();
  for (const auto& e : log.events) {
    events.push_back({{"step", std::string(step_name(e.step))},
                      {"version", e.version},
                      {"iteration", e.iteration},
                      {"bug_ids", e.bug_ids},
                      {"note", e.note}});
  }
  return json{{"seed", log.seed},
              {"batch_size", log.batch_size},
              {"missing_patch", log.missing_patch},
              {"converged", log.converged},
              {"iterations", iterations},
              {"events", events}}
             .dump(2) +
         "\n";
}

}  // namespace memfl
