#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "memfl/core.hpp"
#include "memfl/gateway.hpp"
#include "memfl/prompts.hpp"

namespace memfl {

struct SummaryOptions {
  std::string model = "gpt-4o-mini";
  double temperature = 0.0;
  int max_output_tokens = 1024;
  long long chunk_token_budget = 6000;    // per summarization prompt
  long long project_token_budget = 6000;  // for the aggregated project prompt
  std::size_t group_size = 20;            // summaries per hierarchical group
  int workers = 4;
};

struct ClassSummaryResult {
  std::map<std::string, std::string> summaries;
  std::map<std::string, std::string> hashes;
  std::size_t calls = 0;
  std::vector<std::string> flagged;  // methods summarized from signature only
};

std::string class_content_hash(const ClassRecord& cls);

/// One summary per class. Classes whose content hash matches `previous` reuse
/// the stored summary without a call. Oversized classes are summarized per
/// method group and then merged.
ClassSummaryResult generate_class_summaries(const ProjectSnapshot& snapshot, Gateway& gateway,
                                            const PromptLibrary& prompts,
                                            const SummaryOptions& options,
                                            const StaticMemory* previous = nullptr);

/// Project overview from the class summaries; groups of `group_size` are
/// summarized first when the aggregate does not fit the budget.
std::string generate_project_summary(const std::string& project_name,
                                     const std::map<std::string, std::string>& class_summaries,
                                     Gateway& gateway, const PromptLibrary& prompts,
                                     const SummaryOptions& options);

struct RefinementMeta {
  int iteration = 0;
  std::vector<std::string> bug_ids;
  std::string note;
};

/// Replaces one step's guidance and bumps the version; nullopt (NoUpdate)
/// returns the memory unchanged.
ExternalMemory apply_refinement(const ExternalMemory& memory, PipelineStep step,
                                const std::optional<std::string>& new_guidance,
                                const RefinementMeta& meta);

/// Content hash over static part, dynamic part, version, provenance and
/// snapshot fingerprint.
std::string memory_fingerprint(const ExternalMemory& memory);

std::string memory_to_json(const ExternalMemory& memory);
/// Throws Error(kCorruptMemoryFile) when the embedded fingerprint does not match.
ExternalMemory memory_from_json(std::string_view text);

void save_memory(const std::filesystem::path& path, const ExternalMemory& memory);
/// Throws Error(kNotFound) for a missing file, Error(kCorruptMemoryFile) on tampering.
ExternalMemory load_memory(const std::filesystem::path& path);

/// Warns (and returns false) when the memory was built for a different snapshot.
bool check_snapshot(const ExternalMemory& memory, const ProjectSnapshot& snapshot);

}  // namespace memfl
