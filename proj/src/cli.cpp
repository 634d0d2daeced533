#include "memfl/cli.hpp"

#include <algorithm>
#include <fstream>
#include <optional>
#include <sstream>

#include <fmt/format.h>
#include <spdlog/sinks/stdout_sinks.h>
#include <spdlog/spdlog.h>

#include "CLI11.hpp"
#include "memfl/eval.hpp"
#include "memfl/memgen.hpp"
#include "memfl/memory_store.hpp"
#include "memfl/report.hpp"
#include "memfl/rng.hpp"
#include "memfl/source_index.hpp"

namespace memfl {

namespace fs = std::filesystem;

namespace {

struct Flags {
  std::string project;
  std::string config;
  std::string index_mode;
  std::vector<std::string> extensions;
  std::string provider;
  std::string model;
  std::string base_url;
  std::string script;
  std::string cassette;
  std::string record;
  std::string prompts;
  bool dry_run = false;
  bool cache = false;
  int workers = 0;
  bool verbose = false;
  std::string memory;
  std::string out;
  std::optional<std::uint64_t> seed;

  // localize / eval
  std::string bugs = "all";
  std::vector<std::string> ablate;
  bool no_review = false;
  bool no_condensation = false;
  bool no_dynamic = false;
  bool no_cv = false;
  bool strict_match = false;
  std::optional<int> folds;
  std::string tool = "MemFL";

  // memgen
  std::string train_bugs = "all";
  std::optional<std::size_t> batch;
  std::optional<int> iterations;
  bool resample = false;
  int start_iteration = 1;
  std::string log;

  // report / sweep
  std::string reference;
  std::vector<std::string> eval_dirs;
  std::vector<std::size_t> sweep_batches{1, 2, 5, 10};
  std::vector<int> sweep_iterations{1, 2, 3};
};

void add_project(CLI::App* sub, Flags& f) {
  sub->add_option("--project", f.project, "Project root (manifest.json or sources)")->required();
  sub->add_option("--config", f.config, "Config file (default <project>/memfl.toml)");
  sub->add_option("--index-mode", f.index_mode, "manifest or builtin (default: manifest if present)")
      ->check(CLI::IsMember({"manifest", "builtin"}));
  sub->add_option("--ext", f.extensions, "Source extensions for builtin indexing");
  sub->add_flag("-v,--verbose", f.verbose, "Log progress");
}

void add_provider(CLI::App* sub, Flags& f) {
  sub->add_option("--provider", f.provider, "live, replay or scripted")
      ->check(CLI::IsMember({"live", "replay", "scripted"}));
  sub->add_option("--model", f.model, "Model name");
  sub->add_option("--base-url", f.base_url, "Chat-completion API base URL");
  sub->add_option("--script", f.script, "Scripted provider rules (JSON)");
  sub->add_option("--cassette", f.cassette, "Replay cassette (JSON lines)");
  sub->add_option("--record", f.record, "Write every exchange of this run to a cassette");
  sub->add_option("--prompts", f.prompts, "Directory of prompt template overrides");
  sub->add_flag("--dry-run", f.dry_run, "Print prompts instead of calling the model");
  sub->add_flag("--cache", f.cache, "Reuse replies for identical prompts within the run");
  sub->add_option("--workers", f.workers, "Concurrent bugs / requests")->check(CLI::PositiveNumber);
}

void add_toggles(CLI::App* sub, Flags& f) {
  sub->add_option("--ablate", f.ablate, "Disable a component: review, condense or dynamic")
      ->check(CLI::IsMember({"review", "condense", "dynamic"}));
  sub->add_flag("--no-review", f.no_review, "Skip bug review generation");
  sub->add_flag("--no-condensation", f.no_condensation, "Skip code condensation");
  sub->add_flag("--no-dynamic-memory", f.no_dynamic, "Ignore dynamic memory");
}

void set_logging(bool verbose) {
  static std::shared_ptr<spdlog::logger> logger = [] {
    auto l = spdlog::stderr_logger_mt("memfl");
    l->set_pattern("[%l] %v");
    return l;
  }();
  spdlog::set_default_logger(logger);
  spdlog::set_level(verbose ? spdlog::level::info : spdlog::level::warn);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

class Session {
 public:
  Session(const Flags& flags, const EnvLookup& env, std::ostream& out)
      : flags_(flags), out_(out), project_(flags.project) {
    if (!fs::is_directory(project_)) {
      throw Error(ErrorCode::kNotFound, fmt::format("project directory {} not found", project_.string()));
    }
    config_ = load_config(flags.config.empty() ? std::nullopt : std::optional<fs::path>(flags.config),
                          project_, env);
    auto& c = config_;
    if (!flags.provider.empty()) c.provider.kind = flags.provider;
    if (!flags.model.empty()) c.pipeline.model = c.summary.model = flags.model;
    if (!flags.base_url.empty()) c.provider.base_url = flags.base_url;
    if (!flags.script.empty()) c.provider.script = flags.script;
    if (!flags.cassette.empty()) c.provider.cassette = flags.cassette;
    if (!flags.prompts.empty()) c.prompts_dir = flags.prompts;
    if (flags.cache) c.provider.cache = true;
    if (flags.workers > 0) c.pipeline.workers = c.summary.workers = flags.workers;
    if (flags.seed) c.memgen.seed = c.eval_seed = *flags.seed;
    if (flags.no_review) c.pipeline.toggles.review = false;
    if (flags.no_condensation) c.pipeline.toggles.condensation = false;
    if (flags.no_dynamic) c.pipeline.toggles.dynamic_memory = false;
    for (const auto& a : flags.ablate) {
      if (a == "review") c.pipeline.toggles.review = false;
      if (a == "condense") c.pipeline.toggles.condensation = false;
      if (a == "dynamic") c.pipeline.toggles.dynamic_memory = false;
    }
    if (c.provider.kind != "live" && c.provider.kind != "replay" && c.provider.kind != "scripted") {
      throw Error(ErrorCode::kConfig, fmt::format("unknown provider kind {}", c.provider.kind));
    }
    prompts_ = c.prompts_dir.empty() ? PromptLibrary::builtin() : PromptLibrary::with_overrides(c.prompts_dir);
  }

  ~Session() {
    if (gateway_ && !flags_.record.empty()) {
      try {
        write_cassette(flags_.record, gateway_->recording());
      } catch (const std::exception& e) {
        spdlog::error("cannot write cassette {}: {}", flags_.record, e.what());
      }
    }
  }

  Config& config() { return config_; }
  const fs::path& project() const { return project_; }
  const PromptLibrary& prompts() const { return prompts_; }

  const ProjectSnapshot& snapshot() {
    if (!snapshot_) {
      IndexOptions opts;
      const bool has_manifest = fs::exists(project_ / kManifestFileName);
      opts.mode = flags_.index_mode.empty() ? (has_manifest ? IndexMode::kManifest : IndexMode::kBuiltin)
                                            : parse_index_mode(flags_.index_mode);
      if (!flags_.extensions.empty()) opts.extensions = flags_.extensions;
      snapshot_ = index_tree(project_, opts);
    }
    return *snapshot_;
  }

  const std::vector<BugCase>& bugs() {
    if (!bugs_) {
      LoadReport report;
      bugs_ = load_bug_cases(snapshot(), project_, &report);
      for (const auto& w : report.warnings) spdlog::warn("{}", w);
    }
    return *bugs_;
  }

  std::vector<const BugCase*> select_bugs(const std::string& spec) {
    std::vector<const BugCase*> out;
    if (spec == "all") {
      for (const auto& b : bugs()) out.push_back(&b);
      return out;
    }
    for (const auto& id : split_list(spec)) {
      const auto it = std::find_if(bugs().begin(), bugs().end(), [&](const auto& b) { return b.bug_id == id; });
      if (it == bugs().end()) throw Error(ErrorCode::kNotFound, fmt::format("unknown bug {}", id));
      out.push_back(&*it);
    }
    return out;
  }

  Gateway& gateway() {
    if (!gateway_) {
      std::shared_ptr<Provider> provider;
      const auto& p = config_.provider;
      if (flags_.dry_run) {
        provider = std::make_shared<DryRunProvider>(out_);
      } else if (p.kind == "replay") {
        if (p.cassette.empty()) throw Error(ErrorCode::kConfig, "replay provider needs --cassette");
        provider = ReplayProvider::from_file(p.cassette);
      } else if (p.kind == "scripted") {
        if (p.script.empty()) throw Error(ErrorCode::kConfig, "scripted provider needs --script");
        provider = ScriptedProvider::from_file(p.script);
      } else {
        if (p.api_key.empty()) {
          throw Error(ErrorCode::kProviderUnavailable, "live provider needs MEMFL_API_KEY");
        }
        LiveOptions live;
        live.base_url = p.base_url;
        live.api_key = p.api_key;
        live.timeout = std::chrono::seconds(p.timeout_s);
        live.retry.max_retries = p.max_retries;
        provider = std::make_shared<LiveProvider>(live, std::make_shared<SeededRng>(config_.memgen.seed));
      }
      gateway_ = std::make_unique<Gateway>(provider, config_.prices,
                                           GatewayOptions{p.max_in_flight, p.cache});
    }
    return *gateway_;
  }

  fs::path memory_path() const {
    return flags_.memory.empty() ? project_ / "memory.json" : fs::path(flags_.memory);
  }

  ExternalMemory load_memory_checked() {
    auto m = load_memory(memory_path());
    check_snapshot(m, snapshot());
    return m;
  }

 private:
  const Flags& flags_;
  std::ostream& out_;
  fs::path project_;
  Config config_;
  PromptLibrary prompts_;
  std::optional<ProjectSnapshot> snapshot_;
  std::optional<std::vector<BugCase>> bugs_;
  std::unique_ptr<Gateway> gateway_;
};

int cmd_index(const Flags& f, const EnvLookup& env, std::ostream& out) {
  Session s(f, env, out);
  const auto& snap = s.snapshot();
  std::size_t bug_count = 0;
  if (fs::exists(s.project() / kManifestFileName) || fs::exists(s.project() / kBugsFileName)) {
    bug_count = s.bugs().size();
  }
  const fs::path dest = f.out.empty() ? s.project() / ".memfl" / "snapshot.json" : fs::path(f.out);
  write_text_file(dest, snapshot_to_json(snap));
  out << fmt::format("{}: {} classes, {} methods, {} bugs\nfingerprint {}\nsnapshot written to {}\n",
                     snap.project_name(), snap.classes().size(), snap.method_count(), bug_count,
                     snap.fingerprint(), dest.string());
  return kExitOk;
}

int cmd_summarize(const Flags& f, const EnvLookup& env, std::ostream& out) {
  Session s(f, env, out);
  const auto& snap = s.snapshot();
  const auto path = s.memory_path();
  std::optional<ExternalMemory> previous;
  if (fs::exists(path)) previous = load_memory(path);

  auto& gw = s.gateway();
  const auto classes = generate_class_summaries(snap, gw, s.prompts(), s.config().summary,
                                                previous ? &previous->static_part : nullptr);
  ExternalMemory memory = previous.value_or(ExternalMemory{});
  const bool unchanged = previous && previous->static_part.class_summaries == classes.summaries &&
                         !previous->static_part.project_summary.empty();
  if (!unchanged) {
    memory.static_part.project_summary =
        generate_project_summary(snap.project_name(), classes.summaries, gw, s.prompts(), s.config().summary);
  }
  memory.static_part.class_summaries = classes.summaries;
  memory.static_part.class_hashes = classes.hashes;
  memory.snapshot_fingerprint = snap.fingerprint();
  if (f.dry_run) {
    out << fmt::format("dry run: {} provider calls would be made\n", gw.ledger().size());
    return kExitOk;
  }
  save_memory(path, memory);
  out << fmt::format("summarized {} classes with {} provider calls; memory written to {}\n",
                     classes.summaries.size(), gw.provider_calls(), path.string());
  return kExitOk;
}

std::vector<BugCase> pick(const std::vector<BugCase>& bugs, const std::set<std::string>& ids) {
  std::vector<BugCase> out;
  for (const auto& b : bugs) {
    if (ids.contains(b.bug_id)) out.push_back(b);
  }
  return out;
}

int cmd_memgen(const Flags& f, const EnvLookup& env, std::ostream& out) {
  Session s(f, env, out);
  auto& cfg = s.config();
  auto memory = s.load_memory_checked();
  const auto& bugs = s.bugs();

  std::set<std::string> training;
  std::set<std::string> held_out;
  if (f.train_bugs.rfind("fold:", 0) == 0) {
    // fold:<i>/<k> trains on every fold except i (1-based) of the seeded plan.
    int index = 0;
    int k = 0;
    if (std::sscanf(f.train_bugs.c_str() + 5, "%d/%d", &index, &k) != 2 || index < 1 || index > k) {
      throw Error(ErrorCode::kValidation, fmt::format("bad fold spec {}", f.train_bugs));
    }
    std::vector<std::string> ids;
    for (const auto& b : bugs) ids.push_back(b.bug_id);
    const auto plan = make_folds(ids, k, cfg.eval_seed);
    for (const auto& id : plan.training(index - 1)) training.insert(id);
    for (const auto& id : plan.fold(index - 1)) held_out.insert(id);
  } else {
    for (const auto* b : s.select_bugs(f.train_bugs)) training.insert(b->bug_id);
  }

  auto opts = cfg.memgen;
  opts.pipeline = cfg.pipeline;
  if (f.batch) opts.batch_size = *f.batch;
  if (f.iterations) opts.iterations = *f.iterations;
  if (f.resample) opts.resample_each_iteration = true;
  opts.first_iteration = f.start_iteration;
  opts.evaluation_ids = held_out;

  MemgenLog log;
  const auto updated = build_dynamic_memory(pick(bugs, training), s.snapshot(), memory, s.gateway(),
                                            s.prompts(), opts, &log);
  if (f.dry_run) return kExitOk;
  const fs::path dest = f.out.empty() ? s.memory_path() : fs::path(f.out);
  const fs::path log_path = f.log.empty() ? dest.parent_path() / "memgen-log.json" : fs::path(f.log);
  save_memory(dest, updated);
  write_text_file(log_path, memgen_log_to_json(log));
  out << fmt::format("memory version {} -> {} after {} iteration(s){}; written to {}\n", memory.version,
                     updated.version, log.iterations.size(), log.converged ? " (converged)" : "",
                     dest.string());
  return kExitOk;
}

void print_ranking(std::ostream& out, const RankedSuspects& r) {
  out << r.bug_id << (r.degraded() ? " (degraded)" : "") << ":\n";
  for (std::size_t i = 0; i < r.ranking.size(); ++i) {
    out << fmt::format("  {:>2}. {}\n", i + 1, r.ranking[i].str());
  }
}

int cmd_localize(const Flags& f, const EnvLookup& env, std::ostream& out) {
  Session s(f, env, out);
  const auto memory = s.load_memory_checked();
  const auto selected = s.select_bugs(f.bugs);
  auto pipeline = s.config().pipeline;
  pipeline.scope = "loc";
  const auto results = localize_all(s.snapshot(), selected, memory, s.gateway(), s.prompts(), pipeline);
  if (f.dry_run) return kExitOk;
  const fs::path dir = f.out.empty() ? s.project() / "results" : fs::path(f.out);
  bool degraded = false;
  for (const auto& r : results) {
    for (const auto& v : check_result_invariants(s.snapshot(), r, pipeline)) {
      spdlog::error("{}: invariant violated: {}", r.bug_id, v);
    }
    write_result(dir, r);
    print_ranking(out, r);
    degraded = degraded || r.degraded();
  }
  return degraded ? kExitDegraded : kExitOk;
}

std::string tool_label(const Flags& f, const PipelineToggles& t) {
  std::vector<std::string> off;
  if (!t.dynamic_memory) off.push_back("dynamic memory");
  if (!t.review) off.push_back("bug review");
  if (!t.condensation) off.push_back("condensation");
  if (off.empty()) return f.tool;
  std::string label = f.tool + " w/o ";
  for (std::size_t i = 0; i < off.size(); ++i) label += (i ? " and " : "") + off[i];
  return label;
}

EvalOptions eval_options(const Flags& f, Config& cfg) {
  EvalOptions opts;
  opts.folds = f.folds.value_or(cfg.folds);
  opts.seed = cfg.eval_seed;
  opts.cross_validation = !f.no_cv;
  opts.tolerance = f.strict_match ? 0 : cfg.line_tolerance;
  opts.memgen = cfg.memgen;
  opts.memgen.pipeline = cfg.pipeline;
  if (f.batch) opts.memgen.batch_size = *f.batch;
  if (f.iterations) opts.memgen.iterations = *f.iterations;
  if (f.resample) opts.memgen.resample_each_iteration = true;
  return opts;
}

void split_ledger(const std::vector<ChatExchange>& ledger, std::vector<ChatExchange>& localization,
                  std::vector<ChatExchange>& memgen) {
  for (const auto& ex : ledger) {
    if (ex.request.tag.find("/ev/") != std::string::npos) localization.push_back(ex);
    else if (ex.request.tag.find("/mg/") != std::string::npos) memgen.push_back(ex);
  }
}

int cmd_eval(const Flags& f, const EnvLookup& env, std::ostream& out) {
  Session s(f, env, out);
  auto& cfg = s.config();
  const auto memory = s.load_memory_checked();
  const fs::path dir = f.out.empty() ? s.project() / "report" : fs::path(f.out);
  auto opts = eval_options(f, cfg);
  if (!f.dry_run) {
    opts.on_fold = [&](const FoldResult& fold) {
      const auto fold_dir = dir / "folds" / fmt::format("fold-{}", fold.fold);
      for (const auto& r : fold.results) write_result(fold_dir / "results", r);
      save_memory(fold_dir / "memory.json", fold.memory);
      write_text_file(fold_dir / "memgen-log.json", memgen_log_to_json(fold.memgen_log));
    };
  }
  const auto run = cross_validate(s.snapshot(), s.bugs(), memory, s.gateway(), s.prompts(), opts);
  if (f.dry_run) return kExitOk;

  EvalReportInput input;
  input.project = s.snapshot().project_name();
  input.tool = tool_label(f, cfg.pipeline.toggles);
  input.run = &run;
  split_ledger(s.gateway().ledger(), input.localization_ledger, input.memgen_ledger);
  write_eval_reports(input, dir);

  bool degraded = false;
  for (const auto& r : run.results) {
    for (const auto& v : check_result_invariants(s.snapshot(), r, cfg.pipeline)) {
      spdlog::error("{}: invariant violated: {}", r.bug_id, v);
    }
    degraded = degraded || r.degraded();
  }
  std::ifstream table(dir / "acc.txt");
  out << table.rdbuf();
  out << fmt::format("ground truth survives the prefilter for {} of {} bugs\nreport written to {}\n",
                     run.prefilter_survivors, run.results.size(), dir.string());
  return degraded ? kExitDegraded : kExitOk;
}

int cmd_sweep(const Flags& f, const EnvLookup& env, std::ostream& out) {
  Session s(f, env, out);
  auto& cfg = s.config();
  const auto memory = s.load_memory_checked();
  std::string csv = "batch,iterations,top1,top3,top5\n";
  for (const auto batch : f.sweep_batches) {
    for (const auto iters : f.sweep_iterations) {
      auto opts = eval_options(f, cfg);
      opts.memgen.batch_size = batch;
      opts.memgen.iterations = iters;
      opts.scope_prefix = fmt::format("b{}i{}/", batch, iters);
      const auto run = cross_validate(s.snapshot(), s.bugs(), memory, s.gateway(), s.prompts(), opts);
      csv += fmt::format("{},{},{},{},{}\n", batch, iters, run.acc.top1, run.acc.top3, run.acc.top5);
    }
  }
  if (f.dry_run) return kExitOk;
  const fs::path dir = f.out.empty() ? s.project() / "report" : fs::path(f.out);
  write_text_file(dir / "sweep.csv", csv);
  out << csv;
  return kExitOk;
}

int cmd_report(const Flags& f, std::ostream& out) {
  if (f.reference.empty() && f.eval_dirs.empty()) {
    throw Error(ErrorCode::kValidation, "report needs --reference or --eval");
  }
  const fs::path dir = f.out.empty() ? fs::path("report") : fs::path(f.out);
  if (!f.reference.empty()) {
    const auto data = load_reference(f.reference);
    write_reference_reports(data, dir);
    out << acc_text(data.llm_baselines) << "\n" << acc_transposed_text(data.other_baselines);
  }
  if (!f.eval_dirs.empty()) {
    std::vector<fs::path> dirs(f.eval_dirs.begin(), f.eval_dirs.end());
    const auto csv = variant_csv(load_eval_summaries(dirs));
    write_text_file(dir / "variants.csv", csv);
    out << csv;
  }
  out << fmt::format("report written to {}\n", dir.string());
  return kExitOk;
}

}  // namespace

int dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err,
             const EnvLookup& env) {
  Flags f;
  CLI::App app{"Fault localization with static and dynamic external memory", "memfl"};
  app.require_subcommand(1);

  auto* index = app.add_subcommand("index", "Index a project and cache its snapshot");
  add_project(index, f);
  index->add_option("--out", f.out, "Snapshot file (default <project>/.memfl/snapshot.json)");

  auto* summarize = app.add_subcommand("summarize", "Generate static memory (class and project summaries)");
  add_project(summarize, f);
  add_provider(summarize, f);
  summarize->add_option("--memory", f.memory, "Memory file (default <project>/memory.json)");

  auto* memgen = app.add_subcommand("memgen", "Refine dynamic memory on training bugs");
  add_project(memgen, f);
  add_provider(memgen, f);
  add_toggles(memgen, f);
  memgen->add_option("--memory", f.memory, "Memory file to start from");
  memgen->add_option("--out", f.out, "Updated memory file (default: overwrite --memory)");
  memgen->add_option("--log", f.log, "Refinement log (default memgen-log.json next to the memory)");
  memgen->add_option("--train-bugs", f.train_bugs, "all, a comma list of ids, or fold:<i>/<k>");
  memgen->add_option("--batch", f.batch, "Training batch size")->check(CLI::PositiveNumber);
  memgen->add_option("--iters", f.iterations, "Maximum refinement iterations")->check(CLI::PositiveNumber);
  memgen->add_option("--seed", f.seed, "Seed for batch sampling and folds");
  memgen->add_option("--start-iteration", f.start_iteration, "Number of the first iteration (to continue a run)")
      ->check(CLI::PositiveNumber);
  memgen->add_flag("--resample", f.resample, "Draw a new batch each iteration");

  auto* localize_cmd = app.add_subcommand("localize", "Rank suspicious methods for bugs");
  add_project(localize_cmd, f);
  add_provider(localize_cmd, f);
  add_toggles(localize_cmd, f);
  localize_cmd->add_option("--memory", f.memory, "Memory file (default <project>/memory.json)");
  localize_cmd->add_option("--bug", f.bugs, "Bug id, comma list, or all");
  localize_cmd->add_option("--out", f.out, "Result directory (default <project>/results)");

  auto* eval_cmd = app.add_subcommand("eval", "Cross-validated evaluation with acc@k, cost and overlap reports");
  add_project(eval_cmd, f);
  add_provider(eval_cmd, f);
  add_toggles(eval_cmd, f);
  eval_cmd->add_option("--memory", f.memory, "Memory file with the static summaries");
  eval_cmd->add_option("--folds", f.folds, "Number of folds")->check(CLI::Range(2, 1000));
  eval_cmd->add_option("--seed", f.seed, "Seed for folds and batches");
  eval_cmd->add_option("--batch", f.batch, "Memgen batch size")->check(CLI::PositiveNumber);
  eval_cmd->add_option("--iters", f.iterations, "Memgen iterations")->check(CLI::PositiveNumber);
  eval_cmd->add_flag("--resample", f.resample, "Draw a new memgen batch each iteration");
  eval_cmd->add_flag("--no-cv", f.no_cv, "Build memory from all bugs and evaluate all of them");
  eval_cmd->add_flag("--strict-match", f.strict_match, "Require exact declaration lines");
  eval_cmd->add_option("--tool", f.tool, "Tool label in reports");
  eval_cmd->add_option("--out", f.out, "Report directory (default <project>/report)");

  auto* sweep = app.add_subcommand("sweep", "Evaluate a grid of memgen batch sizes and iteration counts");
  add_project(sweep, f);
  add_provider(sweep, f);
  add_toggles(sweep, f);
  sweep->add_option("--memory", f.memory, "Memory file with the static summaries");
  sweep->add_option("--folds", f.folds, "Number of folds")->check(CLI::Range(2, 1000));
  sweep->add_option("--seed", f.seed, "Seed for folds and batches");
  sweep->add_option("--batches", f.sweep_batches, "Batch sizes")->delimiter(',');
  sweep->add_option("--iterations", f.sweep_iterations, "Iteration counts")->delimiter(',');
  sweep->add_flag("--no-cv", f.no_cv, "Build memory from all bugs and evaluate all of them");
  sweep->add_flag("--strict-match", f.strict_match, "Require exact declaration lines");
  sweep->add_option("--out", f.out, "Report directory (default <project>/report)");

  auto* report = app.add_subcommand("report", "Render comparison tables");
  report->add_option("--reference", f.reference, "Published results data file");
  report->add_option("--eval", f.eval_dirs, "Eval report directories to compare");
  report->add_option("--out", f.out, "Output directory (default ./report)");
  report->add_flag("-v,--verbose", f.verbose, "Log progress");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err) == 0 ? kExitOk : kExitValidation;
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err) == 0 ? kExitOk : kExitValidation;
  } catch (const CLI::ParseError& e) {
    err << fmt::format("error[{}]: {}\n", error_code_name(ErrorCode::kValidation), e.what());
    const auto subs = app.get_subcommands();
    err << (subs.empty() ? app.help() : subs.front()->help());
    return kExitValidation;
  }

  set_logging(f.verbose);
  try {
    if (index->parsed()) return cmd_index(f, env, out);
    if (summarize->parsed()) return cmd_summarize(f, env, out);
    if (memgen->parsed()) return cmd_memgen(f, env, out);
    if (localize_cmd->parsed()) return cmd_localize(f, env, out);
    if (eval_cmd->parsed()) return cmd_eval(f, env, out);
    if (sweep->parsed()) return cmd_sweep(f, env, out);
    if (report->parsed()) return cmd_report(f, out);
  } catch (const Error& e) {
    err << fmt::format("error[{}]: {}\n", error_code_name(e.code()), e.what());
    return is_provider_error(e.code()) ? kExitProvider : kExitValidation;
  } catch (const std::exception& e) {
    err << fmt::format("error[{}]: {}\n", error_code_name(ErrorCode::kIo), e.what());
    return kExitValidation;
  }
  return kExitValidation;
}

}  // namespace memfl
