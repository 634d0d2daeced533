#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "memfl/core.hpp"
#include "memfl/memgen.hpp"
#include "memfl/pipeline.hpp"

namespace memfl {

inline constexpr int kDefaultLineTolerance = 2;

/// Same class and method, declaration lines within `tolerance`.
bool refs_match(const MethodRef& a, const MethodRef& b, int tolerance);

/// 1-based rank of the first ranking entry matching the truth, if any.
std::optional<int> first_hit_rank(const std::vector<MethodRef>& ranking,
                                  const std::set<MethodRef>& truth, int tolerance);

using TruthMap = std::map<std::string, std::set<MethodRef>>;

TruthMap truths_of(const std::vector<BugCase>& bugs);

/// Bugs whose top-k contains a ground-truth method. Throws Error(kMissingTruth).
int acc_at_k(const std::vector<RankedSuspects>& results, const TruthMap& truths, int k,
             int tolerance = kDefaultLineTolerance);
std::set<std::string> solved_at_k(const std::vector<RankedSuspects>& results, const TruthMap& truths,
                                  int k, int tolerance = kDefaultLineTolerance);

struct TopK {
  int top1 = 0;
  int top3 = 0;
  int top5 = 0;

  TopK& operator+=(const TopK& o) {
    top1 += o.top1;
    top3 += o.top3;
    top5 += o.top5;
    return *this;
  }
  bool operator==(const TopK&) const = default;
};

TopK top_k(const std::vector<RankedSuspects>& results, const TruthMap& truths,
           int tolerance = kDefaultLineTolerance);

struct FoldPlan {
  int k = 5;
  std::uint64_t seed = 0;
  std::map<std::string, int> assignment;  // bug id -> fold index

  std::vector<std::string> fold(int index) const;
  std::vector<std::string> training(int index) const;  // every other fold
  std::vector<std::size_t> sizes() const;
};

/// Seeded partition into k folds whose sizes differ by at most one.
FoldPlan make_folds(const std::vector<std::string>& bug_ids, int k, std::uint64_t seed);

/// Throws Error(kLeakage) when the sets share a bug.
void check_no_leakage(const std::vector<std::string>& training, const std::vector<std::string>& test);

struct SpectrumCounts {
  int ef = 0;
  int nf = 0;
  int ep = 0;
  int np = 0;
};

double ochiai(const SpectrumCounts& c);

/// Method-level spectra from the per-test coverage of a bug. Without per-test
/// outcomes, the failing run's coverage counts as one failing test.
std::map<MethodRef, SpectrumCounts> spectrum_counts(const BugCase& bug, const ProjectSnapshot& snapshot);

/// Every method ranked by Ochiai descending, ties by class then decl_line.
RankedSuspects sbfl_rank(const BugCase& bug, const ProjectSnapshot& snapshot);

struct OverlapRegion {
  std::vector<std::string> members;  // tools whose solved sets contain these bugs
  std::vector<std::string> bug_ids;  // solved by exactly the members
};

/// Venn regions for 1 to 3 named sets, in bitmask order. Throws Error(kInvalidInput).
std::vector<OverlapRegion> overlap_analysis(const std::map<std::string, std::set<std::string>>& sets);

struct FoldResult {
  int fold = 0;
  std::vector<std::string> training_ids;
  std::vector<std::string> test_ids;
  std::vector<RankedSuspects> results;
  TopK acc;
  ExternalMemory memory;
  MemgenLog memgen_log;
};

struct EvalOptions {
  int folds = 5;
  std::uint64_t seed = 0;
  bool cross_validation = true;
  int tolerance = kDefaultLineTolerance;
  MemgenOptions memgen;  // memgen.pipeline also drives evaluation runs
  std::string scope_prefix;  // prepended to request tags, e.g. for sweeps
  std::function<void(const FoldResult&)> on_fold;  // called after each fold completes
};

struct EvalRun {
  std::vector<FoldResult> folds;
  TopK acc;
  std::vector<RankedSuspects> results;  // sorted by bug id
  std::vector<RankedSuspects> sbfl;     // sorted by bug id
  TopK sbfl_acc;
  std::size_t prefilter_survivors = 0;  // bugs with a ground-truth class in the prefilter
  TruthMap truths;
  int tolerance = kDefaultLineTolerance;
};

/// For each fold, builds dynamic memory from the other folds only and
/// localizes the fold. Without cross-validation the memory is built from all
/// bugs and every bug is evaluated with it.
EvalRun cross_validate(const ProjectSnapshot& snapshot, const std::vector<BugCase>& bugs,
                       const ExternalMemory& base_memory, Gateway& gateway,
                       const PromptLibrary& prompts, const EvalOptions& options);

}  // namespace memfl
