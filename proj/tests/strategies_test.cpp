#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "ttc/simulated_backend.hpp"
#include "ttc/strategies.hpp"

using namespace ttc;

namespace {

const Question kQ{"q", "bb", SimilarityLevel::S1, "What is 3+4?", "7", std::nullopt};
const MemoryState kNoMemory = MemoryState::empty(MemoryMethod::none);

SimulatedBackend backend_with(double p, std::uint64_t seed = 1) {
  SimulatedProfile prof;
  prof.base_success = p;
  prof.seed = seed;
  return SimulatedBackend(prof);
}

StrategyConfig config(StrategyKind kind) {
  StrategyConfig c;
  c.kind = kind;
  return c;
}

/// Scripted backend for precise control of tree-search scores: the i-th
/// generated step gets scores[i]; steps listed in `terminal` carry the end
/// marker.
struct ScriptedTree {
  std::vector<double> scores;
  std::vector<bool> terminal;
  mutable std::size_t next = 0;

  Generation generate(const GenerationRequest& req) const {
    std::size_t i = next++;
    std::string text = "step#" + std::to_string(i);
    if (i < terminal.size() && terminal[i]) text += "\nAnswer: 7\nEnd of Answer";
    (void)req;
    return {text + "\n<" + std::to_string(i) + ">", 4, true};
  }
  double score(const Question&, std::string_view content) const {
    auto open = content.rfind('<');
    auto idx = std::stoul(std::string(content.substr(open + 1)));
    return idx < scores.size() ? scores[idx] : 0.0;
  }
  FineTuneStatus fine_tune(std::span<const FineTuneExample>) const {
    return FineTuneStatus::unsupported;
  }
  bool checkpointed_cot() const { return true; }
};

}  // namespace

// ----------------------------------------------------------------- Best-of-N

TEST(BestOfN, CertainSuccessCostsOne) {
  auto out = run_best_of_n(kQ, kNoMemory, config(StrategyKind::best_of_n), backend_with(1.0), 42);
  EXPECT_EQ(out.cost(), 1);
  EXPECT_TRUE(out.satisfied);
  EXPECT_EQ(out.correct, true);
}

TEST(BestOfN, CertainFailureExhaustsBudget) {
  auto out = run_best_of_n(kQ, kNoMemory, config(StrategyKind::best_of_n), backend_with(0.0), 42);
  EXPECT_EQ(out.cost(), 5);
  EXPECT_FALSE(out.satisfied);
  EXPECT_EQ(out.candidates.size(), 5u);
}

TEST(BestOfN, MeanCostMatchesEnumerationOracle) {
  // Oracle: exhaustive enumeration over 2^5 success patterns.
  const double expected = oracle::expected_cost_by_enumeration(0.5, 5);
  ASSERT_NEAR(expected, 1.9375, 1e-15);
  auto backend = backend_with(0.5, 17);
  const int trials = 10000;
  double sum = 0.0;
  for (int t = 0; t < trials; ++t)
    sum += run_best_of_n(kQ, kNoMemory, config(StrategyKind::best_of_n), backend,
                         derive_seed(8, t))
               .cost();
  EXPECT_NEAR(sum / trials, expected, 0.05);
}

TEST(BestOfN, BatchesAreChargedInFull) {
  auto c = config(StrategyKind::best_of_n);
  c.batch_size = 2;
  auto out = run_best_of_n(kQ, kNoMemory, c, backend_with(1.0), 1);
  EXPECT_EQ(out.cost(), 2);
  EXPECT_EQ(out.candidates.size(), 2u);

  auto fail = run_best_of_n(kQ, kNoMemory, c, backend_with(0.0), 1);
  EXPECT_EQ(fail.cost(), 5);  // batches of 2, 2, then the remaining 1
}

TEST(BestOfN, PrefixOfExhaustiveRun) {
  auto backend = backend_with(0.4, 3);
  auto adaptive = config(StrategyKind::best_of_n);
  auto exhaustive = adaptive;
  exhaustive.adaptive = false;
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    auto a = run_best_of_n(kQ, kNoMemory, adaptive, backend, seed);
    auto full = run_best_of_n(kQ, kNoMemory, exhaustive, backend, seed);
    ASSERT_EQ(full.cost(), 5);
    for (std::size_t i = 0; i < a.candidates.size(); ++i)
      EXPECT_EQ(a.candidates[i], full.candidates[i]);
  }
}

TEST(BestOfN, CostMonotoneInThreshold) {
  SimulatedProfile prof;
  prof.base_success = 0.3;
  prof.score_given_success = ScoreDist::uniform(0.5, 1.0);
  prof.score_given_failure = ScoreDist::uniform(0.0, 0.95);
  SimulatedBackend backend(prof);
  for (std::uint64_t seed = 0; seed < 300; ++seed) {
    std::int64_t prev = 0;
    for (double tau : {0.1, 0.3, 0.5, 0.7, 0.9, 0.99}) {
      auto c = config(StrategyKind::best_of_n);
      c.tau = tau;
      auto cost = run_best_of_n(kQ, kNoMemory, c, backend, seed).cost();
      EXPECT_GE(cost, prev);
      prev = cost;
    }
  }
}

TEST(BestOfN, SelectedIsArgmaxAndSatisfiedRecomputes) {
  auto backend = backend_with(0.3, 9);
  for (std::uint64_t seed = 0; seed < 300; ++seed) {
    auto out = run_best_of_n(kQ, kNoMemory, config(StrategyKind::best_of_n), backend, seed);
    EXPECT_EQ(out.selected, select_final(out.candidates));
    EXPECT_EQ(out.satisfied, out.candidates[out.selected].score >= 0.9);
    for (std::size_t i = 0; i < out.candidates.size(); ++i)
      EXPECT_EQ(out.candidates[i].index, static_cast<std::int64_t>(i));
  }
}

// ----------------------------------------------------------------------- DFS

TEST(Dfs, TerminalFirstChildCostsOne) {
  auto out = run_dfs(kQ, kNoMemory, config(StrategyKind::dfs), backend_with(1.0), 5);
  EXPECT_EQ(out.cost(), 1);
  ASSERT_EQ(out.tree.size(), 1u);
  EXPECT_TRUE(out.tree[0].terminal);
  EXPECT_EQ(out.tree[0].score, 1.0);
  EXPECT_TRUE(out.satisfied);
  EXPECT_EQ(out.correct, true);
}

TEST(Dfs, AdversarialProfileHitsNodeCap) {
  auto out = run_dfs(kQ, kNoMemory, config(StrategyKind::dfs), backend_with(0.0), 5);
  EXPECT_EQ(out.cost(), 50);
  EXPECT_EQ(out.tree.size(), 50u);
  EXPECT_FALSE(out.satisfied);
  for (const auto& n : out.tree) EXPECT_LE(n.depth, 15);
}

TEST(Dfs, SatisfyingSiblingSuppressesTheRest) {
  // Depth 1: first child 0.95 >= tau, so siblings are never generated; its
  // first child (depth 2) is terminal.
  ScriptedTree tree{{0.95, 1.0}, {false, true}};
  auto out = run_dfs(kQ, kNoMemory, config(StrategyKind::dfs), tree, 0);
  EXPECT_EQ(out.cost(), 2);
  ASSERT_EQ(out.tree.size(), 2u);
  EXPECT_EQ(out.tree[1].parent, 0);
  EXPECT_EQ(out.tree[1].depth, 2);
  EXPECT_TRUE(out.tree[1].terminal);
}

TEST(Dfs, PrunesBelowRatioOfBestSiblingAndBacktracks) {
  auto c = config(StrategyKind::dfs);
  c.max_depth = 2;
  // Depth-1 siblings: 0.5, 0.1, 0.3. 0.1 < 0.4 * 0.5 is pruned. Visit order:
  // node 0 (0.5) then node 2 (0.3). Each gets three depth-2 leaves.
  ScriptedTree tree{{0.5, 0.1, 0.3, 0.2, 0.2, 0.2, 0.3, 0.3, 0.3}, {}};
  auto out = run_dfs(kQ, kNoMemory, c, tree, 0);
  ASSERT_EQ(out.tree.size(), 9u);
  for (int i = 3; i < 6; ++i) EXPECT_EQ(out.tree[i].parent, 0);
  for (int i = 6; i < 9; ++i) EXPECT_EQ(out.tree[i].parent, 2);
  EXPECT_EQ(out.cost(), 9);
  EXPECT_FALSE(out.satisfied);
  // Best node overall (ties to lowest index): node 0 with 0.5.
  EXPECT_EQ(out.selected, 0u);
}

TEST(Dfs, EndMarkerWithoutPerfectScoreIsNotTerminal) {
  ScriptedTree tree{{0.99, 1.0}, {true, true}};
  auto out = run_dfs(kQ, kNoMemory, config(StrategyKind::dfs), tree, 0);
  EXPECT_FALSE(out.tree[0].terminal);
  EXPECT_TRUE(out.tree[1].terminal);
  EXPECT_EQ(out.cost(), 2);
}

TEST(Dfs, NodeCountEqualsMeterAcrossProfiles) {
  std::mt19937_64 gen(4);
  for (int i = 0; i < 300; ++i) {
    SimulatedProfile prof;
    prof.base_success = static_cast<double>(gen() % 100) / 100.0;
    prof.solution_depth = 1 + static_cast<int>(gen() % 6);
    prof.seed = gen();
    auto out = run_dfs(kQ, kNoMemory, config(StrategyKind::dfs), SimulatedBackend(prof), gen());
    EXPECT_EQ(static_cast<std::int64_t>(out.tree.size()), out.cost());
    EXPECT_LE(out.cost(), 50);
  }
}

// ---------------------------------------------------------------- Self-Refine

TEST(SelfRefine, NoErrorOnFirstCheckCostsOne) {
  auto out =
      run_self_refine(kQ, kNoMemory, config(StrategyKind::self_refine), backend_with(1.0), 1);
  EXPECT_EQ(out.cost(), 1);
  EXPECT_TRUE(out.satisfied);
}

TEST(SelfRefine, NeverCleanRunsAllIterations) {
  auto out =
      run_self_refine(kQ, kNoMemory, config(StrategyKind::self_refine), backend_with(0.0), 1);
  EXPECT_EQ(out.cost(), 16);
  EXPECT_EQ(out.candidates.size(), 16u);
  EXPECT_FALSE(out.satisfied);
}

TEST(SelfRefine, SuccessOnThirdAnswerCostsThree) {
  // Find a seed where the first two answers fail and the third succeeds.
  auto backend = backend_with(0.5, 11);
  bool found = false;
  for (std::uint64_t seed = 0; seed < 1000 && !found; ++seed) {
    auto out = run_self_refine(kQ, kNoMemory, config(StrategyKind::self_refine), backend, seed);
    if (out.candidates.size() >= 3 && out.candidates[0].correct == false &&
        out.candidates[1].correct == false && out.candidates[2].correct == true) {
      found = true;
      EXPECT_EQ(out.cost(), 3);
      EXPECT_TRUE(out.satisfied);
    }
  }
  EXPECT_TRUE(found);
}

// ------------------------------------------------------------------ Long CoT

TEST(LongCot, CertainStopCostsOneCheckpoint) {
  SimulatedProfile prof;
  prof.base_stop = 1.0;
  auto out = run_long_cot(kQ, kNoMemory, config(StrategyKind::long_cot), SimulatedBackend(prof), 1);
  EXPECT_EQ(out.cost(), 256);
  EXPECT_EQ(out.meter.unit(), CostUnit::tokens);
}

TEST(LongCot, NeverStoppingHitsTokenCap) {
  SimulatedProfile prof;
  prof.base_stop = 0.0;
  auto out = run_long_cot(kQ, kNoMemory, config(StrategyKind::long_cot), SimulatedBackend(prof), 1);
  EXPECT_EQ(out.cost(), 3500);
  EXPECT_FALSE(out.satisfied);
}

TEST(LongCot, RelevantMemoryShortensTraces) {
  // Stop rate 0.1 without memory, 0.1 + 0.5 * 1 with a full S1 buffer. The
  // closed forms of the two truncated geometric processes differ widely; a
  // Monte-Carlo comparison is enough here.
  SimulatedProfile prof;
  prof.base_stop = 0.1;
  prof.stop_alpha = 0.5;
  SimulatedBackend backend(prof);
  auto full = MemoryState::empty(MemoryMethod::in_context);
  for (int i = 0; i < 3; ++i)
    std::get<EpisodicBuffer>(full.payload).entries.push_back({"x", "y", {"bb", {}}});

  const int trials = 10000;
  double with = 0, without = 0;
  for (int t = 0; t < trials; ++t) {
    without += run_long_cot(kQ, kNoMemory, config(StrategyKind::long_cot), backend, t).cost();
    with += run_long_cot(kQ, full, config(StrategyKind::long_cot), backend, t).cost();
  }
  EXPECT_LT(with / trials, without / trials);
}

// ---------------------------------------------------------------- Dispatcher

TEST(Dispatch, UnitsFollowKind) {
  auto backend = backend_with(1.0);
  EXPECT_EQ(run(kQ, kNoMemory, config(StrategyKind::best_of_n), backend, 0).meter.unit(),
            CostUnit::answers);
  EXPECT_EQ(run(kQ, kNoMemory, config(StrategyKind::dfs), backend, 0).meter.unit(),
            CostUnit::nodes);
  EXPECT_EQ(run(kQ, kNoMemory, config(StrategyKind::self_refine), backend, 0).meter.unit(),
            CostUnit::answers);
  EXPECT_EQ(run(kQ, kNoMemory, config(StrategyKind::long_cot), backend, 0).meter.unit(),
            CostUnit::tokens);
}

TEST(Dispatch, RejectsInvalidConfig) {
  auto c = config(StrategyKind::best_of_n);
  c.n_max = 0;
  EXPECT_THROW(run(kQ, kNoMemory, c, backend_with(1.0), 0), ConfigError);
  c = config(StrategyKind::dfs);
  c.prune_ratio = 1.5;
  EXPECT_THROW(run(kQ, kNoMemory, c, backend_with(1.0), 0), ConfigError);
  c = config(static_cast<StrategyKind>(42));
  EXPECT_THROW(run(kQ, kNoMemory, c, backend_with(1.0), 0), ConfigError);
  EXPECT_FALSE(parse_strategy_kind("bfs").has_value());
}

TEST(Strategies, BackendFailureCarriesPartialCost) {
  struct FlakyBackend {
    mutable int calls = 0;
    Generation generate(const GenerationRequest&) const {
      if (++calls > 2) throw BackendError("connection reset");
      return {"Answer: wrong\n", 3, true};
    }
    double score(const Question&, std::string_view) const { return 0.1; }
    FineTuneStatus fine_tune(std::span<const FineTuneExample>) const {
      return FineTuneStatus::unsupported;
    }
    bool checkpointed_cot() const { return true; }
  };
  try {
    run_best_of_n(kQ, kNoMemory, config(StrategyKind::best_of_n), FlakyBackend{}, 0);
    FAIL() << "expected RunFailure";
  } catch (const RunFailure& e) {
    EXPECT_EQ(e.partial_cost(), 3);
    EXPECT_NE(std::string(e.what()).find("connection reset"), std::string::npos);
  }
}
