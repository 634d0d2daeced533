#include "memfl/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "memfl/rng.hpp"

namespace memfl {

bool refs_match(const MethodRef& a, const MethodRef& b, int tolerance) {
  return a.class_name == b.class_name && a.method_name == b.method_name &&
         std::abs(a.decl_line - b.decl_line) <= tolerance;
}

std::optional<int> first_hit_rank(const std::vector<MethodRef>& ranking,
                                  const std::set<MethodRef>& truth, int tolerance) {
  for (std::size_t i = 0; i < ranking.size(); ++i) {
    for (const auto& t : truth) {
      if (refs_match(ranking[i], t, tolerance)) return static_cast<int>(i) + 1;
    }
  }
  return std::nullopt;
}

TruthMap truths_of(const std::vector<BugCase>& bugs) {
  TruthMap out;
  for (const auto& b : bugs) out[b.bug_id] = b.ground_truth;
  return out;
}

std::set<std::string> solved_at_k(const std::vector<RankedSuspects>& results, const TruthMap& truths,
                                  int k, int tolerance) {
  std::set<std::string> solved;
  for (const auto& r : results) {
    const auto it = truths.find(r.bug_id);
    if (it == truths.end() || it->second.empty()) {
      throw Error(ErrorCode::kMissingTruth, fmt::format("no ground truth for bug {}", r.bug_id));
    }
    const auto rank = first_hit_rank(r.ranking, it->second, tolerance);
    if (rank && *rank <= k) solved.insert(r.bug_id);
  }
  return solved;
}

int acc_at_k(const std::vector<RankedSuspects>& results, const TruthMap& truths, int k, int tolerance) {
  return static_cast<int>(solved_at_k(results, truths, k, tolerance).size());
}

TopK top_k(const std::vector<RankedSuspects>& results, const TruthMap& truths, int tolerance) {
  return {acc_at_k(results, truths, 1, tolerance), acc_at_k(results, truths, 3, tolerance),
          acc_at_k(results, truths, 5, tolerance)};
}

std::vector<std::string> FoldPlan::fold(int index) const {
  std::vector<std::string> out;
  for (const auto& [id, f] : assignment) {
    if (f == index) out.push_back(id);
  }
  return out;
}

std::vector<std::string> FoldPlan::training(int index) const {
  std::vector<std::string> out;
  for (const auto& [id, f] : assignment) {
    if (f != index) out.push_back(id);
  }
  return out;
}

std::vector<std::size_t> FoldPlan::sizes() const {
  std::vector<std::size_t> out(static_cast<std::size_t>(k), 0);
  for (const auto& [_, f] : assignment) ++out[static_cast<std::size_t>(f)];
  return out;
}

FoldPlan make_folds(const std::vector<std::string>& bug_ids, int k, std::uint64_t seed) {
  const std::set<std::string> unique(bug_ids.begin(), bug_ids.end());
  if (unique.size() != bug_ids.size()) throw Error(ErrorCode::kInvalidInput, "duplicate bug ids");
  if (k < 2 || static_cast<std::size_t>(k) > unique.size()) {
    throw Error(ErrorCode::kInvalidInput,
                fmt::format("cannot split {} bugs into {} folds", unique.size(), k));
  }
  std::vector<std::string> ids(unique.begin(), unique.end());
  SeededRng rng(seed);
  rng.shuffle(ids);
  FoldPlan plan;
  plan.k = k;
  plan.seed = seed;
  for (std::size_t i = 0; i < ids.size(); ++i) plan.assignment[ids[i]] = static_cast<int>(i % k);
  return plan;
}

void check_no_leakage(const std::vector<std::string>& training, const std::vector<std::string>& test) {
  const std::set<std::string> train_set(training.begin(), training.end());
  for (const auto& id : test) {
    if (train_set.contains(id)) {
      throw Error(ErrorCode::kLeakage,
                  fmt::format("bug {} is in both the training and the evaluation set", id));
    }
  }
}

double ochiai(const SpectrumCounts& c) {
  if (c.ef == 0) return 0.0;
  const double denom = std::sqrt(static_cast<double>(c.ef + c.nf) * static_cast<double>(c.ef + c.ep));
  return denom == 0.0 ? 0.0 : c.ef / denom;
}

std::map<MethodRef, SpectrumCounts> spectrum_counts(const BugCase& bug, const ProjectSnapshot& snapshot) {
  std::vector<std::pair<bool, std::set<MethodRef>>> runs;  // (failed, covered)
  for (const auto& t : bug.coverage.tests) {
    runs.emplace_back(!t.passed, std::set<MethodRef>(t.covers.begin(), t.covers.end()));
  }
  if (std::none_of(runs.begin(), runs.end(), [](const auto& r) { return r.first; })) {
    runs.emplace_back(true, bug.coverage.covered);
  }
  std::map<MethodRef, SpectrumCounts> out;
  for (const auto& c : snapshot.classes()) {
    for (const auto& m : c.methods) {
      SpectrumCounts s;
      for (const auto& [failed, covered] : runs) {
        const bool hit = covered.contains(m.ref);
        if (failed) ++(hit ? s.ef : s.nf);
        else ++(hit ? s.ep : s.np);
      }
      out[m.ref] = s;
    }
  }
  return out;
}

RankedSuspects sbfl_rank(const BugCase& bug, const ProjectSnapshot& snapshot) {
  std::vector<std::pair<double, MethodRef>> scored;
  for (const auto& [ref, counts] : spectrum_counts(bug, snapshot)) scored.emplace_back(ochiai(counts), ref);
  std::stable_sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    if (a.second.class_name != b.second.class_name) return a.second.class_name < b.second.class_name;
    return a.second.decl_line < b.second.decl_line;
  });
  RankedSuspects r;
  r.bug_id = bug.bug_id;
  for (auto& [_, ref] : scored) r.ranking.push_back(std::move(ref));
  return r;
}

std::vector<OverlapRegion> overlap_analysis(const std::map<std::string, std::set<std::string>>& sets) {
  if (sets.empty() || sets.size() > 3) {
    throw Error(ErrorCode::kInvalidInput,
                fmt::format("overlap analysis takes 1 to 3 sets, got {}", sets.size()));
  }
  std::vector<const std::string*> names;
  std::vector<const std::set<std::string>*> members;
  std::set<std::string> all;
  for (const auto& [name, s] : sets) {
    names.push_back(&name);
    members.push_back(&s);
    all.insert(s.begin(), s.end());
  }
  const unsigned n = static_cast<unsigned>(sets.size());
  std::vector<OverlapRegion> regions(1u << n);
  for (unsigned mask = 1; mask < (1u << n); ++mask) {
    for (unsigned i = 0; i < n; ++i) {
      if (mask & (1u << i)) regions[mask].members.push_back(*names[i]);
    }
  }
  for (const auto& id : all) {
    unsigned mask = 0;
    for (unsigned i = 0; i < n; ++i) {
      if (members[i]->contains(id)) mask |= 1u << i;
    }
    regions[mask].bug_ids.push_back(id);
  }
  regions.erase(regions.begin());
  return regions;
}

namespace {

ExternalMemory static_only(const ExternalMemory& m) {
  ExternalMemory out;
  out.static_part = m.static_part;
  out.snapshot_fingerprint = m.snapshot_fingerprint;
  return out;
}

std::vector<BugCase> subset(const std::vector<BugCase>& bugs, const std::vector<std::string>& ids) {
  const std::set<std::string> wanted(ids.begin(), ids.end());
  std::vector<BugCase> out;
  for (const auto& b : bugs) {
    if (wanted.contains(b.bug_id)) out.push_back(b);
  }
  return out;
}

}  // namespace

EvalRun cross_validate(const ProjectSnapshot& snapshot, const std::vector<BugCase>& bugs,
                       const ExternalMemory& base_memory, Gateway& gateway,
                       const PromptLibrary& prompts, const EvalOptions& options) {
  const auto truths = truths_of(bugs);
  for (const auto& [id, truth] : truths) {
    if (truth.empty()) throw Error(ErrorCode::kMissingTruth, fmt::format("no ground truth for bug {}", id));
  }
  std::vector<std::string> ids;
  for (const auto& [id, _] : truths) ids.push_back(id);

  struct Split {
    std::string scope;
    std::vector<std::string> training;
    std::vector<std::string> test;
  };
  std::vector<Split> splits;
  if (options.cross_validation) {
    const auto plan = make_folds(ids, options.folds, options.seed);
    for (int f = 0; f < plan.k; ++f) {
      splits.push_back({fmt::format("{}f{}", options.scope_prefix, f + 1), plan.training(f), plan.fold(f)});
      check_no_leakage(splits.back().training, splits.back().test);
    }
  } else {
    splits.push_back({options.scope_prefix + "all", ids, ids});
  }

  const auto& pipeline = options.memgen.pipeline;
  EvalRun run;
  run.truths = truths;
  run.tolerance = options.tolerance;
  for (std::size_t f = 0; f < splits.size(); ++f) {
    const auto& split = splits[f];
    FoldResult fold;
    fold.fold = static_cast<int>(f) + 1;
    fold.training_ids = split.training;
    fold.test_ids = split.test;
    fold.memory = static_only(base_memory);
    if (pipeline.toggles.dynamic_memory) {
      auto mg = options.memgen;
      mg.scope = split.scope + "/mg";
      mg.evaluation_ids = options.cross_validation
                              ? std::set<std::string>(split.test.begin(), split.test.end())
                              : std::set<std::string>{};
      const auto training = subset(bugs, split.training);
      if (mg.batch_size > training.size()) {
        spdlog::warn("batch size {} exceeds the {} training bugs of fold {}; using {}", mg.batch_size,
                     training.size(), fold.fold, training.size());
        mg.batch_size = training.size();
      }
      fold.memory = build_dynamic_memory(training, snapshot, fold.memory, gateway, prompts, mg,
                                         &fold.memgen_log);
    }
    const auto test = subset(bugs, split.test);
    std::vector<const BugCase*> ptrs;
    for (const auto& b : test) ptrs.push_back(&b);
    auto eval_pipeline = pipeline;
    eval_pipeline.scope = split.scope + "/ev";
    fold.results = localize_all(snapshot, ptrs, fold.memory, gateway, prompts, eval_pipeline);
    fold.acc = top_k(fold.results, truths, options.tolerance);
    run.acc += fold.acc;
    run.results.insert(run.results.end(), fold.results.begin(), fold.results.end());
    spdlog::info("fold {}: top1 {} top3 {} top5 {} of {}", fold.fold, fold.acc.top1, fold.acc.top3,
                 fold.acc.top5, fold.test_ids.size());
    if (options.on_fold) options.on_fold(fold);
    run.folds.push_back(std::move(fold));
  }
  std::sort(run.results.begin(), run.results.end(),
            [](const auto& a, const auto& b) { return a.bug_id < b.bug_id; });

  for (const auto& b : bugs) {
    run.sbfl.push_back(sbfl_rank(b, snapshot));
    const auto kept = prefilter_classes(snapshot, b.coverage, pipeline.prefilter_cap);
    const bool survives = std::any_of(b.ground_truth.begin(), b.ground_truth.end(), [&](const auto& t) {
      return std::find(kept.begin(), kept.end(), t.class_name) != kept.end();
    });
    run.prefilter_survivors += survives ? 1 : 0;
  }
  std::sort(run.sbfl.begin(), run.sbfl.end(),
            [](const auto& a, const auto& b) { return a.bug_id < b.bug_id; });
  run.sbfl_acc = top_k(run.sbfl, truths, options.tolerance);
  return run;
}

}  // namespace memfl
