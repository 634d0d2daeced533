#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "memfl/core.hpp"
#include "memfl/gateway.hpp"
#include "memfl/memory_store.hpp"
#include "memfl/pipeline.hpp"
#include "memfl/prompts.hpp"

namespace memfl {

/// Bug ids in a seeded random order (ids are sorted first, so the input order
/// does not matter).
std::vector<std::string> training_order(const std::vector<std::string>& bug_ids, std::uint64_t seed);

/// Uniform sample without replacement. Throws Error(kInvalidBatch).
std::vector<const BugCase*> select_training_batch(const std::vector<BugCase>& bugs,
                                                  std::size_t batch_size, std::uint64_t seed);

struct BugReport {
  std::string bug_id;
  std::map<std::string, std::string> sections;  // heading -> body
  std::string raw;
};

/// Sections are the `## ` headings of the reply.
std::map<std::string, std::string> split_report_sections(std::string_view text);

struct LlmSettings {
  std::string model = "gpt-4o-mini";
  double temperature = 0.0;
  int max_output_tokens = 2048;
};

/// Throws Error(kMissingPatch) when the bug has no patched bodies.
BugReport generate_bug_report(const BugCase& bug, const ProjectSnapshot& snapshot,
                              const StaticMemory& memory, Gateway& gateway,
                              const PromptLibrary& prompts, const LlmSettings& llm,
                              const std::string& tag);

struct StageMetrics {
  std::size_t selected = 0;
  std::size_t relevant = 0;  // selections that are or contain ground truth
  std::size_t truth = 0;     // ground-truth classes (or methods)
  std::size_t retained = 0;  // ground-truth items kept
  double recall = 0;
  double precision = 0;
};

struct CondenseMetrics {
  StageMetrics stage1;  // classes
  StageMetrics stage2;  // classes
  StageMetrics stage3;  // methods

  const StageMetrics& at(PipelineStep step) const;
};

CondenseMetrics compute_condense_metrics(const Intermediates& state,
                                         const std::set<MethodRef>& ground_truth);

std::string describe_metrics(PipelineStep step, const StageMetrics& m);

/// What a step produced in the last attempt, as shown to the refiner.
std::string describe_step_output(PipelineStep step, const RankedSuspects& result);

/// Asks for improved guidance for one step. nullopt means NO_UPDATE.
/// Condensation steps require metrics; Review and Confirm require the report.
std::optional<std::string> refine_step_memory(PipelineStep step, const std::string& step_output,
                                              const BugCase& bug, const BugReport& report,
                                              const ExternalMemory& memory,
                                              const std::string& current_guidance,
                                              const std::optional<StageMetrics>& metrics,
                                              Gateway& gateway, const PromptLibrary& prompts,
                                              const LlmSettings& llm, const std::string& tag);

struct MemgenOptions {
  std::size_t batch_size = 5;
  int iterations = 3;
  int first_iteration = 1;  // to continue a saved run
  std::uint64_t seed = 0;
  bool resample_each_iteration = false;
  PipelineOptions pipeline;
  std::set<std::string> evaluation_ids;  // must not meet the training set
  std::string scope = "mg";
};

struct RefineRecord {
  PipelineStep step = PipelineStep::kReview;
  std::string bug_id;
  bool updated = false;
  std::optional<StageMetrics> metrics;
};

struct IterationLog {
  int iteration = 0;
  std::vector<std::string> batch;
  std::vector<std::string> skipped;  // bugs whose localization failed
  std::map<std::string, std::vector<std::string>> rankings;
  std::vector<RefineRecord> refinements;
  int version_before = 0;
  int version_after = 0;
};

struct MemgenLog {
  std::uint64_t seed = 0;
  std::size_t batch_size = 0;
  std::vector<std::string> missing_patch;  // excluded from the batch
  std::vector<IterationLog> iterations;
  bool converged = false;
  std::vector<RefinementEvent> events;
};

/// Runs localization on a training batch and refines each step's guidance
/// from the outcome, for up to `iterations` passes or until a pass produces
/// no update. Refinements for a step are chained over the batch in bug id
/// order and committed as one event per (iteration, step).
ExternalMemory build_dynamic_memory(const std::vector<BugCase>& training_bugs,
                                    const ProjectSnapshot& snapshot, const ExternalMemory& memory,
                                    Gateway& gateway, const PromptLibrary& prompts,
                                    const MemgenOptions& options, MemgenLog* log = nullptr);

std::string memgen_log_to_json(const MemgenLog& log);

}  // namespace memfl
