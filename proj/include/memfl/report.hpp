#pragma once

#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "memfl/eval.hpp"
#include "memfl/gateway.hpp"

namespace memfl {

struct AccRow {
  std::string project;
  int bugs = 0;
  std::map<std::string, TopK> results;  // tool -> counts
};

/// Per-project rows plus an overall row, one Top1/Top3/Top5 triple per tool.
struct AccTable {
  std::vector<std::string> tools;
  std::vector<AccRow> rows;
  AccRow overall;
};

/// `Project,Bugs,<tool>_Top1,<tool>_Top3,<tool>_Top5,...`
std::string acc_csv(const AccTable& table);
std::string acc_text(const AccTable& table);
/// One block of Top1/Top3/Top5 rows per tool, projects as columns.
std::string acc_transposed_csv(const AccTable& table);
std::string acc_transposed_text(const AccTable& table);

struct VariantRow {
  std::string variant;
  TopK acc;
};
std::string variant_csv(const std::vector<VariantRow>& rows);

/// Localization cost by step and bug, then the total and per-bug means.
std::string cost_csv(const CostReport& report);

std::string overlap_json(const std::map<std::string, std::set<std::string>>& solved, int k);

struct ReferenceCost {
  std::string tool;
  std::string dollars;
  std::string seconds;
};

/// Published comparison figures shipped as a data file.
struct ReferenceData {
  std::string benchmark;
  AccTable llm_baselines;
  AccTable other_baselines;
  std::map<std::string, std::string> notes;
  std::vector<ReferenceCost> costs;
  std::vector<VariantRow> ablation;
  std::vector<VariantRow> cross_validation;
};

ReferenceData load_reference(const std::filesystem::path& path);

/// acc.csv/.txt, baselines.csv/.txt, cost_reference.csv, ablation.csv, cv.csv
void write_reference_reports(const ReferenceData& data, const std::filesystem::path& dir);

struct EvalReportInput {
  std::string project;
  std::string tool = "MemFL";
  const EvalRun* run = nullptr;
  std::vector<ChatExchange> localization_ledger;
  std::vector<ChatExchange> memgen_ledger;
};

/// acc.csv/.txt, acc_by_model.csv, cost.csv, overlap.json, summary.json
void write_eval_reports(const EvalReportInput& input, const std::filesystem::path& dir);

/// Variant rows from the summary.json files of earlier eval runs.
std::vector<VariantRow> load_eval_summaries(const std::vector<std::filesystem::path>& dirs);

void write_text_file(const std::filesystem::path& path, const std::string& content);

}  // namespace memfl
