#include "memfl/report.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "json.hpp"

namespace memfl {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const TopK& lookup(const AccRow& row, const std::string& tool) {
  static const TopK zero;
  const auto it = row.results.find(tool);
  return it == row.results.end() ? zero : it->second;
}

int metric(const TopK& t, int i) { return i == 0 ? t.top1 : i == 1 ? t.top3 : t.top5; }

constexpr const char* kMetricNames[] = {"Top1", "Top3", "Top5"};

std::string csv_cell(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string join_csv(const std::vector<std::string>& cells) {
  std::string out;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i) out += ',';
    out += csv_cell(cells[i]);
  }
  return out + "\n";
}

std::string align(const std::vector<std::vector<std::string>>& rows, std::size_t rule_after = 1) {
  std::vector<std::size_t> width;
  for (const auto& r : rows) {
    width.resize(std::max(width.size(), r.size()), 0);
    for (std::size_t i = 0; i < r.size(); ++i) width[i] = std::max(width[i], r[i].size());
  }
  std::string out;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    std::string line;
    for (std::size_t i = 0; i < rows[r].size(); ++i) {
      line += i == 0 ? fmt::format("{:<{}}", rows[r][i], width[i])
                     : fmt::format("  {:>{}}", rows[r][i], width[i]);
    }
    out += line + "\n";
    if (r + 1 == rule_after) out += std::string(line.size(), '-') + "\n";
  }
  return out;
}

std::vector<std::vector<std::string>> acc_grid(const AccTable& t) {
  std::vector<std::vector<std::string>> grid;
  std::vector<std::string> header{"Project", "Bugs"};
  for (const auto& tool : t.tools) {
    for (const auto* m : kMetricNames) header.push_back(fmt::format("{}_{}", tool, m));
  }
  grid.push_back(header);
  auto add = [&](const AccRow& row) {
    std::vector<std::string> cells{row.project, std::to_string(row.bugs)};
    for (const auto& tool : t.tools) {
      for (int i = 0; i < 3; ++i) cells.push_back(std::to_string(metric(lookup(row, tool), i)));
    }
    grid.push_back(cells);
  };
  for (const auto& r : t.rows) add(r);
  add(t.overall);
  return grid;
}

std::vector<std::vector<std::string>> transposed_grid(const AccTable& t) {
  std::vector<std::vector<std::string>> grid;
  std::vector<std::string> header{"Model", "Metric"};
  std::vector<std::string> bugs{"# Bugs", ""};
  for (const auto& r : t.rows) {
    header.push_back(r.project);
    bugs.push_back(std::to_string(r.bugs));
  }
  header.push_back(t.overall.project);
  bugs.push_back(std::to_string(t.overall.bugs));
  grid.push_back(header);
  grid.push_back(bugs);
  for (const auto& tool : t.tools) {
    for (int i = 0; i < 3; ++i) {
      std::vector<std::string> cells{tool, kMetricNames[i]};
      for (const auto& r : t.rows) cells.push_back(std::to_string(metric(lookup(r, tool), i)));
      cells.push_back(std::to_string(metric(lookup(t.overall, tool), i)));
      grid.push_back(cells);
    }
  }
  return grid;
}

std::string grid_csv(const std::vector<std::vector<std::string>>& grid) {
  std::string out;
  for (const auto& r : grid) out += join_csv(r);
  return out;
}

std::string seconds(std::int64_t micros) {
  return fmt::format("{}.{:06}", micros / 1000000, micros % 1000000);
}

std::string cost_row(const std::string& scope, const CostRow& r) {
  return join_csv({scope, r.key, std::to_string(r.calls), std::to_string(r.prompt_tokens),
                   std::to_string(r.completion_tokens), format_dollars(r.cost_micros),
                   seconds(r.latency.count())});
}

TopK topk_from(const json& j) {
  return {j.at(0).get<int>(), j.at(1).get<int>(), j.at(2).get<int>()};
}

AccTable table_from(const json& j) {
  AccTable t;
  t.tools = j.at("tools").get<std::vector<std::string>>();
  auto row = [&](const json& r) {
    AccRow out{r.at("project").get<std::string>(), r.at("bugs").get<int>(), {}};
    for (const auto& [tool, v] : r.at("results").items()) out.results[tool] = topk_from(v);
    return out;
  };
  for (const auto& r : j.at("rows")) t.rows.push_back(row(r));
  t.overall = row(j.at("overall"));
  return t;
}

std::vector<VariantRow> variants_from(const json& j) {
  std::vector<VariantRow> out;
  for (const auto& v : j) out.push_back({v.at("variant").get<std::string>(), topk_from(v.at("top"))});
  return out;
}

json topk_json(const TopK& t) { return {{"top1", t.top1}, {"top3", t.top3}, {"top5", t.top5}}; }

}  // namespace

std::string acc_csv(const AccTable& table) { return grid_csv(acc_grid(table)); }
std::string acc_text(const AccTable& table) { return align(acc_grid(table)); }
std::string acc_transposed_csv(const AccTable& table) { return grid_csv(transposed_grid(table)); }
std::string acc_transposed_text(const AccTable& table) { return align(transposed_grid(table), 2); }

std::string variant_csv(const std::vector<VariantRow>& rows) {
  std::string out = join_csv({"Technique", "Top1", "Top3", "Top5"});
  for (const auto& r : rows) {
    out += join_csv({r.variant, std::to_string(r.acc.top1), std::to_string(r.acc.top3),
                     std::to_string(r.acc.top5)});
  }
  return out;
}

std::string cost_csv(const CostReport& report) {
  std::string out = join_csv(
      {"scope", "key", "calls", "prompt_tokens", "completion_tokens", "cost_usd", "time_s"});
  for (const auto& r : report.per_step) out += cost_row("step", r);
  for (const auto& r : report.per_bug) out += cost_row("bug", r);
  out += cost_row("total", report.total);
  out += join_csv({"mean_per_bug", "", "", "", "",
                   fmt::format("{:.6f}", report.mean_cost_micros_per_bug / 1e6),
                   fmt::format("{:.6f}", report.mean_latency_us_per_bug / 1e6)});
  return out;
}

std::string overlap_json(const std::map<std::string, std::set<std::string>>& solved, int k) {
  json regions = json::array();
  std::size_t total = 0;
  for (const auto& r : overlap_analysis(solved)) {
    regions.push_back({{"members", r.members}, {"count", r.bug_ids.size()}, {"bug_ids", r.bug_ids}});
    total += r.bug_ids.size();
  }
  json sets = json::object();
  for (const auto& [tool, ids] : solved) sets[tool] = ids;
  return json{{"k", k}, {"solved", sets}, {"regions", regions}, {"union", total}}.dump(2) + "\n";
}

ReferenceData load_reference(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kNotFound, fmt::format("reference file {} not found", path.string()));
  try {
    const auto doc = json::parse(in);
    ReferenceData d;
    d.benchmark = doc.value("benchmark", "");
    d.llm_baselines = table_from(doc.at("llm_baselines"));
    d.other_baselines = table_from(doc.at("other_baselines"));
    if (doc.at("other_baselines").contains("notes")) {
      d.notes = doc.at("other_baselines").at("notes").get<std::map<std::string, std::string>>();
    }
    for (const auto& c : doc.at("cost_per_bug")) {
      d.costs.push_back({c.at("tool").get<std::string>(), c.at("dollars").get<std::string>(),
                         c.at("seconds").get<std::string>()});
    }
    d.ablation = variants_from(doc.at("ablation"));
    d.cross_validation = variants_from(doc.at("cross_validation"));
    return d;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kInvalidInput, fmt::format("invalid reference file: {}", e.what()));
  }
}

void write_text_file(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, fmt::format("cannot write {}", path.string()));
  out << content;
}

void write_reference_reports(const ReferenceData& data, const fs::path& dir) {
  write_text_file(dir / "acc.csv", acc_csv(data.llm_baselines));
  write_text_file(dir / "acc.txt", acc_text(data.llm_baselines));
  std::string notes;
  for (const auto& [tool, note] : data.notes) notes += fmt::format("* {}: {}\n", tool, note);
  write_text_file(dir / "baselines.csv", acc_transposed_csv(data.other_baselines));
  write_text_file(dir / "baselines.txt", acc_transposed_text(data.other_baselines) +
                                             (notes.empty() ? "" : "\n" + notes));
  std::string cost = join_csv({"tool", "cost_per_bug_usd", "time_per_bug_s"});
  for (const auto& c : data.costs) cost += join_csv({c.tool, c.dollars, c.seconds});
  write_text_file(dir / "cost_reference.csv", cost);
  write_text_file(dir / "ablation.csv", variant_csv(data.ablation));
  write_text_file(dir / "cv.csv", variant_csv(data.cross_validation));
}

void write_eval_reports(const EvalReportInput& input, const fs::path& dir) {
  if (!input.run) throw Error(ErrorCode::kInvalidInput, "no evaluation run to report");
  const auto& run = *input.run;
  AccTable table;
  table.tools = {input.tool, "Ochiai"};
  AccRow row{input.project, static_cast<int>(run.results.size()),
             {{input.tool, run.acc}, {"Ochiai", run.sbfl_acc}}};
  table.rows.push_back(row);
  table.overall = row;
  table.overall.project = "Overall";
  write_text_file(dir / "acc.csv", acc_csv(table));
  write_text_file(dir / "acc.txt", acc_text(table));
  write_text_file(dir / "acc_by_model.csv", acc_transposed_csv(table));

  std::string cost;
  if (!input.localization_ledger.empty()) {
    cost = cost_csv(run_cost_report(input.localization_ledger));
  } else {
    cost = join_csv({"scope", "key", "calls", "prompt_tokens", "completion_tokens", "cost_usd", "time_s"});
  }
  if (!input.memgen_ledger.empty()) {
    auto mg = run_cost_report(input.memgen_ledger).total;
    mg.key = "memgen";
    cost += cost_row("total", mg);
  }
  write_text_file(dir / "cost.csv", cost);

  write_text_file(dir / "overlap.json",
                  overlap_json({{input.tool, solved_at_k(run.results, run.truths, 1, run.tolerance)},
                                {"Ochiai", solved_at_k(run.sbfl, run.truths, 1, run.tolerance)}},
                               1));

  json per_bug = json::array();
  for (const auto& f : run.folds) {
    for (const auto& r : f.results) {
      json ranking = json::array();
      for (const auto& m : r.ranking) ranking.push_back(m.str());
      per_bug.push_back({{"bug_id", r.bug_id}, {"fold", f.fold}, {"ranking", ranking},
                         {"degraded", r.degraded()}});
    }
  }
  std::sort(per_bug.begin(), per_bug.end(),
            [](const json& a, const json& b) { return a.at("bug_id") < b.at("bug_id"); });
  json folds = json::array();
  for (const auto& f : run.folds) {
    folds.push_back({{"fold", f.fold},
                     {"training", f.training_ids},
                     {"test", f.test_ids},
                     {"acc", topk_json(f.acc)},
                     {"memory_version", f.memory.version}});
  }
  json summary = {{"project", input.project},
                  {"tool", input.tool},
                  {"bugs", run.results.size()},
                  {"acc", topk_json(run.acc)},
                  {"ochiai", topk_json(run.sbfl_acc)},
                  {"prefilter_survivors", run.prefilter_survivors},
                  {"folds", folds},
                  {"results", per_bug}};
  write_text_file(dir / "summary.json", summary.dump(2) + "\n");
}

std::vector<VariantRow> load_eval_summaries(const std::vector<fs::path>& dirs) {
  std::vector<VariantRow> out;
  for (const auto& d : dirs) {
    std::ifstream in(d / "summary.json", std::ios::binary);
    if (!in) throw Error(ErrorCode::kNotFound, fmt::format("{} has no summary.json", d.string()));
    try {
      const auto doc = json::parse(in);
      const auto& a = doc.at("acc");
      out.push_back({doc.at("tool").get<std::string>(),
                     {a.at("top1").get<int>(), a.at("top3").get<int>(), a.at("top5").get<int>()}});
    } catch (const json::exception& e) {
      throw Error(ErrorCode::kInvalidInput, fmt::format("invalid summary in {}: {}", d.string(), e.what()));
    }
  }
  return out;
}

}  // namespace memfl
