#pragma once

#include <compare>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "memfl/core.hpp"
#include "memfl/gateway.hpp"
#include "memfl/prompts.hpp"

namespace memfl {

/// Exact fraction covered/total of a class's methods.
struct CoverageRate {
  int covered = 0;
  int total = 1;

  double value() const { return static_cast<double>(covered) / total; }
  std::strong_ordering operator<=>(const CoverageRate& o) const {
    return static_cast<std::int64_t>(covered) * o.total <=>
           static_cast<std::int64_t>(o.covered) * total;
  }
  bool operator==(const CoverageRate& o) const { return (*this <=> o) == 0; }
};

CoverageRate coverage_rate(const ClassRecord& cls, const CoverageProfile& coverage);

inline constexpr std::size_t kPrefilterCap = 60;

/// Classes with r_c > 0, by r_c descending then name ascending, at most `cap`.
std::vector<std::string> prefilter_classes(const ProjectSnapshot& snapshot,
                                           const CoverageProfile& coverage,
                                           std::size_t cap = kPrefilterCap);

struct PipelineToggles {
  bool review = true;
  bool condensation = true;
  bool dynamic_memory = true;
};

struct PipelineOptions {
  std::string model = "gpt-4o-mini";
  double temperature = 0.0;
  int max_output_tokens = 2048;
  std::size_t prefilter_cap = kPrefilterCap;
  int stage1_cap = 20;
  int stage2_cap = 5;
  int methods_per_class = 10;
  int ranking_cap = 10;
  long long prompt_token_budget = 24000;
  PipelineToggles toggles;
  int workers = 4;
  std::string scope = "fl";  // request tag prefix
};

/// Everything one bug's localization reads. The referenced objects must
/// outlive the context.
struct StepContext {
  const ProjectSnapshot& snapshot;
  const BugCase& bug;
  const ExternalMemory& memory;
  Gateway& gateway;
  const PromptLibrary& prompts;
  const PipelineOptions& options;
};

/// Bug information block. Helper test methods are included only when asked;
/// the condensation and confirmation prompts show just the triggering test.
std::string render_bug_info(const BugCase& bug, const PromptLibrary& prompts, bool with_helpers);

/// Source lines prefixed with their 1-based line numbers.
std::string number_lines(std::string_view text, int first_line);

std::string bug_review(const StepContext& ctx, RankedSuspects& result);

/// Stage 1 or 2 of class selection. Falls back to the top-cap candidates by
/// r_c (degraded) when the reply cannot be parsed.
std::vector<std::string> condense_classes(const StepContext& ctx, int stage,
                                          const std::vector<std::string>& candidates,
                                          const std::string& review, RankedSuspects& result);

/// Method selection within one class. Falls back to the covered methods of
/// the class (degraded) when the reply cannot be parsed.
std::vector<MethodRef> condense_methods(const StepContext& ctx, const ClassRecord& cls,
                                        const std::string& review, RankedSuspects& result);

/// Final ranking over the selected methods.
std::vector<MethodRef> confirm_faults(const StepContext& ctx, const std::vector<MethodRef>& selected,
                                      const std::string& review, RankedSuspects& result);

RankedSuspects localize(const StepContext& ctx);

/// Localizes every bug on a worker pool; results are in input order.
std::vector<RankedSuspects> localize_all(const ProjectSnapshot& snapshot,
                                         const std::vector<const BugCase*>& bugs,
                                         const ExternalMemory& memory, Gateway& gateway,
                                         const PromptLibrary& prompts,
                                         const PipelineOptions& options);

/// Checks ranking uniqueness/resolution and, for non-degraded runs, monotone
/// narrowing. Returns the violated properties (empty when all hold).
std::vector<std::string> check_result_invariants(const ProjectSnapshot& snapshot,
                                                 const RankedSuspects& result,
                                                 const PipelineOptions& options);

std::string result_to_json(const RankedSuspects& result);
RankedSuspects result_from_json(std::string_view text);
void write_result(const std::filesystem::path& dir, const RankedSuspects& result);

}  // namespace memfl
