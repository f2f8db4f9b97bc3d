#include <gtest/gtest.h>

#include <algorithm>
#include <random>
#include <sstream>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "ttc/harness.hpp"
#include "ttc/persistence.hpp"
#include "ttc/simulated_backend.hpp"

using namespace ttc;

namespace {

SimulatedBackend learning_backend(double p0 = 0.3, double g = 0.4) {
  SimulatedProfile prof;
  prof.base_success = p0;
  prof.memory_gain = g;
  prof.seed = 99;
  return SimulatedBackend(prof);
}

ExperimentConfig small_grid() {
  ExperimentConfig c;
  c.memory_methods = {MemoryMethod::none, MemoryMethod::in_context};
  c.similarity_levels = {SimilarityLevel::S1};
  c.repetitions = 4;
  c.question_sets = 2;
  c.seed = 5;
  return c;
}

std::string records_text(const std::vector<RunRecord>& records) {
  std::ostringstream ss;
  write_records_csv(ss, records);
  return ss.str();
}

RunRecord rec(MemoryMethod m, std::int64_t index, std::int64_t cost, int accuracy) {
  RunRecord r;
  r.set_id = "s";
  r.question_index = index;
  r.memory = m;
  r.cost = cost;
  r.accuracy = accuracy;
  return r;
}

}  // namespace

// ----------------------------------------------------------------- sequence

TEST(RunSequence, SingleQuestionGivesOneRecord) {
  auto sets = fixture::corpus(1, {SimilarityLevel::S1}, 1);
  auto r = run_sequence(std::span<const Question>(sets[0].questions), MemoryMethod::in_context,
                        StrategyConfig{}, learning_backend(), 1);
  ASSERT_EQ(r.records.size(), 1u);
  EXPECT_EQ(r.records[0].question_index, 0);
}

TEST(RunSequence, RejectsEmptyAndMixedSequences) {
  std::vector<Question> none;
  EXPECT_THROW(run_sequence(std::span<const Question>(none), MemoryMethod::none, StrategyConfig{},
                            learning_backend(), 1),
               PreconditionError);
  auto sets = fixture::corpus(2, {SimilarityLevel::S1}, 2);
  std::vector<Question> mixed{sets[0].questions[0], sets[1].questions[0]};
  EXPECT_THROW(run_sequence(std::span<const Question>(mixed), MemoryMethod::none,
                            StrategyConfig{}, learning_backend(), 1),
               PreconditionError);
}

TEST(RunSequence, NoMemoryIsOrderIndependent) {
  // Seeds follow positions. With memory none nothing carries over, so the
  // record at a position does not depend on the questions run before it.
  auto sets = fixture::corpus(1, {SimilarityLevel::S1}, 8);
  auto qs = sets[0].questions;
  auto backend = learning_backend();
  auto a = run_sequence(std::span<const Question>(qs), MemoryMethod::none, StrategyConfig{},
                        backend, 3);
  std::reverse(qs.begin(), qs.end());
  auto b = run_sequence(std::span<const Question>(qs), MemoryMethod::none, StrategyConfig{},
                        backend, 3);
  for (std::size_t i = 0; i < qs.size(); ++i) {
    EXPECT_EQ(a.records[i].cost, b.records[i].cost);
    EXPECT_EQ(a.records[i].satisfied, b.records[i].satisfied);
  }
}

TEST(RunSequence, NoMemoryCostIsFlatAcrossIndices) {
  auto sets = fixture::corpus(1, {SimilarityLevel::S1}, 6);
  auto backend = learning_backend(0.3, 0.4);
  const int reps = 3000;
  std::vector<double> sum(6, 0.0), sumsq(6, 0.0);
  for (int rep = 0; rep < reps; ++rep) {
    auto r = run_sequence(std::span<const Question>(sets[0].questions), MemoryMethod::none,
                          StrategyConfig{}, backend, 11, rep);
    for (std::size_t i = 0; i < 6; ++i) {
      sum[i] += r.records[i].cost;
      sumsq[i] += double(r.records[i].cost) * r.records[i].cost;
    }
  }
  // Every index follows the same distribution: E = closed form at p=0.3.
  const double expect = oracle::expected_cost_by_enumeration(0.3, 5);
  for (std::size_t i = 0; i < 6; ++i) {
    double mean = sum[i] / reps;
    double sd = std::sqrt(sumsq[i] / reps - mean * mean);
    EXPECT_NEAR(mean, expect, 3 * sd / std::sqrt(double(reps))) << "index " << i;
  }
}

TEST(RunSequence, InContextMemoryLowersLaterCost) {
  auto sets = fixture::corpus(1, {SimilarityLevel::S1}, 4);
  auto backend = learning_backend(0.3, 0.4);
  double first = 0.0, fourth = 0.0;
  const int reps = 2000;
  for (int rep = 0; rep < reps; ++rep) {
    auto r = run_sequence(std::span<const Question>(sets[0].questions), MemoryMethod::in_context,
                          StrategyConfig{}, backend, 11, rep);
    first += r.records[0].cost;
    fourth += r.records[3].cost;
  }
  EXPECT_LT(fourth / reps, first / reps);
}

TEST(RunSequence, CausalityByTruncation) {
  auto sets = fixture::corpus(1, {SimilarityLevel::S1}, 10);
  auto backend = learning_backend(0.4, 0.4);
  const auto& qs = sets[0].questions;
  for (auto method : kAllMemoryMethods) {
    auto full = run_sequence(std::span<const Question>(qs), method, StrategyConfig{}, backend, 8);
    for (std::size_t t = 1; t < qs.size(); ++t) {
      auto prefix = run_sequence(std::span<const Question>(qs.data(), t), method,
                                 StrategyConfig{}, backend, 8);
      for (std::size_t i = 0; i < t; ++i) ASSERT_EQ(prefix.records[i], full.records[i]);
    }
  }
}

TEST(RunSequence, BackendFailureIsRecordedAndSequenceContinues) {
  struct DeadBackend {
    Generation generate(const GenerationRequest&) const { throw BackendError("down"); }
    double score(const Question&, std::string_view) const { return 0.0; }
    FineTuneStatus fine_tune(std::span<const FineTuneExample>) const {
      return FineTuneStatus::unsupported;
    }
    bool checkpointed_cot() const { return true; }
  };
  auto sets = fixture::corpus(1, {SimilarityLevel::S1}, 3);
  auto r = run_sequence(std::span<const Question>(sets[0].questions), MemoryMethod::in_context,
                        StrategyConfig{}, DeadBackend{}, 1);
  ASSERT_EQ(r.records.size(), 3u);
  for (const auto& rec : r.records) {
    EXPECT_TRUE(rec.failed);
    EXPECT_EQ(rec.accuracy, 0);
    EXPECT_EQ(rec.cost, 1);  // the first batch is charged when it starts
  }
  EXPECT_EQ(count_aborted_cells(r.records), 1u);
}

// ----------------------------------------------------------------- grid

TEST(RunGrid, RecordCardinality) {
  auto corpus = fixture::corpus(2, {SimilarityLevel::S1}, 20);
  auto out = run_grid(small_grid(), corpus, learning_backend());
  EXPECT_EQ(out.records.size(), 320u);
  EXPECT_TRUE(out.complete);
  EXPECT_EQ(out.units_total, 4u);
}

TEST(RunGrid, RecordConservationAcrossShapes) {
  auto corpus = fixture::corpus(3, {SimilarityLevel::S1, SimilarityLevel::S3}, 5);
  ExperimentConfig c;
  StrategyConfig dfs;
  dfs.kind = StrategyKind::dfs;
  c.strategies = {StrategyConfig{}, dfs};
  c.memory_methods = {MemoryMethod::none, MemoryMethod::reflect, MemoryMethod::sft};
  c.similarity_levels = {SimilarityLevel::S1, SimilarityLevel::S3};
  c.repetitions = 2;
  c.question_sets = 2;
  c.questions_per_set = 4;
  auto out = run_grid(c, corpus, learning_backend());
  EXPECT_EQ(out.records.size(), 2u * 3 * 2 * 2 * 4 * 2);
}

TEST(RunGrid, DeterministicAcrossRunsAndWorkerCounts) {
  auto corpus = fixture::corpus(3, {SimilarityLevel::S1, SimilarityLevel::S2}, 6);
  auto c = small_grid();
  c.similarity_levels = {SimilarityLevel::S1, SimilarityLevel::S2};
  GridOptions one, many;
  one.workers = 1;
  many.workers = 4;
  auto a = records_text(run_grid(c, corpus, learning_backend(), one).records);
  auto b = records_text(run_grid(c, corpus, learning_backend(), one).records);
  auto d = records_text(run_grid(c, corpus, learning_backend(), many).records);
  EXPECT_EQ(a, b);
  EXPECT_EQ(a, d);
}

TEST(RunGrid, MissingBaselineIsRejected) {
  auto corpus = fixture::corpus(1, {SimilarityLevel::S1}, 2);
  auto c = small_grid();
  c.memory_methods = {MemoryMethod::in_context};
  EXPECT_THROW(run_grid(c, corpus, learning_backend()), ConfigError);
}

TEST(RunGrid, InvalidConfigsAreRejected) {
  auto corpus = fixture::corpus(1, {SimilarityLevel::S1}, 2);
  auto c = small_grid();
  c.repetitions = 0;
  EXPECT_THROW(run_grid(c, corpus, learning_backend()), ConfigError);
  c = small_grid();
  c.similarity_levels = {SimilarityLevel::S4};
  EXPECT_THROW(run_grid(c, corpus, learning_backend()), ConfigError);
  c = small_grid();
  c.strategies = {StrategyConfig{}, StrategyConfig{}};
  EXPECT_THROW(run_grid(c, corpus, learning_backend()), ConfigError);
}

TEST(RunGrid, StopAfterUnitsThenResumeMatchesUninterrupted) {
  auto corpus = fixture::corpus(2, {SimilarityLevel::S1}, 5);
  auto c = small_grid();
  auto full = run_grid(c, corpus, learning_backend());

  std::vector<UnitResult> journal;
  GridOptions first;
  first.workers = 1;
  first.stop_after_units = 1;
  first.on_unit_done = [&](const UnitResult& u) { journal.push_back(u); };
  auto part = run_grid(c, corpus, learning_backend(), first);
  EXPECT_FALSE(part.complete);
  ASSERT_EQ(journal.size(), 1u);

  GridOptions second;
  second.completed = {journal[0].unit_id};
  second.on_unit_done = [&](const UnitResult& u) { journal.push_back(u); };
  auto rest = run_grid(c, corpus, learning_backend(), second);
  EXPECT_TRUE(rest.complete);

  std::vector<RunRecord> merged;
  for (const auto& u : journal) merged.insert(merged.end(), u.records.begin(), u.records.end());
  sort_records(merged);
  EXPECT_EQ(records_text(merged), records_text(full.records));
}

// ----------------------------------------------------------------- relative change

TEST(RelativeChange, Examples) {
  std::vector<double> t{4.4}, b{10.0};
  EXPECT_NEAR(*relative_change(t, b), -56.0, 1e-12);
  std::vector<double> same{3, 5}, same2{4, 4};
  EXPECT_EQ(*relative_change(same, same2), 0.0);
  std::vector<double> up{12}, base{10};
  EXPECT_NEAR(*relative_change(up, base), 20.0, 1e-12);
}

TEST(RelativeChange, ZeroBaselineIsUndefined) {
  std::vector<double> t{1, 0}, b{0, 0};
  EXPECT_FALSE(relative_change(t, b).has_value());
  std::vector<double> empty;
  EXPECT_THROW(relative_change(empty, b), ContractError);
}

// ----------------------------------------------------------------- pearson

TEST(Pearson, PerfectLinear) {
  std::vector<double> x{1, 2, 3, 4, 5}, y, z;
  for (double v : x) {
    y.push_back(2 * v + 1);
    z.push_back(-v);
  }
  EXPECT_EQ(pearson(x, y).r, 1.0);
  EXPECT_EQ(pearson(x, z).r, -1.0);
  EXPECT_EQ(pearson(x, y).p_value, 0.0);
}

TEST(Pearson, HandFixture) {
  // Centered x: -1.5 -0.5 0.5 1.5, y: -0.5 -1.5 1.5 0.5.
  // Sxy = 0.75 + 0.75 + 0.75 + 0.75 = 3, Sxx = Syy = 5, r = 3/5.
  std::vector<double> x{1, 2, 3, 4}, y{2, 1, 4, 3};
  EXPECT_NEAR(pearson(x, y).r, 0.6, 1e-12);
  // t = 0.6 * sqrt(2 / 0.64) = 1.0606..., two-sided p with 2 df = 0.4.
  // For 2 df the t CDF has the closed form 1/2 + t / (2 sqrt(2 + t^2)).
  double t = 0.6 * std::sqrt(2.0 / 0.64);
  double p = 2 * (0.5 - t / (2 * std::sqrt(2 + t * t)));
  EXPECT_NEAR(pearson(x, y).p_value, p, 1e-12);
  EXPECT_NEAR(p, 0.4, 1e-12);
}

TEST(Pearson, AgreesWithRawMomentOracle) {
  std::mt19937_64 gen(5);
  std::normal_distribution<double> noise(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> x, y;
    int n = 3 + trial % 20;
    for (int i = 0; i < n; ++i) {
      double v = noise(gen);
      x.push_back(v);
      y.push_back(0.3 * v + noise(gen));
    }
    EXPECT_NEAR(pearson(x, y).r, oracle::pearson_raw_moments(x, y), 1e-12);
    EXPECT_GE(pearson(x, y).r, -1.0);
    EXPECT_LE(pearson(x, y).r, 1.0);
  }
}

TEST(Pearson, Errors) {
  std::vector<double> x{1, 2, 3}, flat{2, 2, 2}, shorter{1, 2};
  EXPECT_THROW(pearson(x, flat), ContractError);
  EXPECT_THROW(pearson(shorter, shorter), ContractError);
  EXPECT_THROW(pearson(x, shorter), ContractError);
}

// ----------------------------------------------------------------- aggregate

TEST(Aggregate, AllBaselineGivesZeros) {
  std::vector<RunRecord> records{rec(MemoryMethod::none, 0, 3, 1),
                                 rec(MemoryMethod::none, 1, 5, 0)};
  for (auto g : kAllGroupings) {
    auto rows = aggregate(records, g);
    EXPECT_FALSE(rows.empty()) << to_string(g);
    for (const auto& r : rows) {
      EXPECT_EQ(r.relative_cost_pct, 0.0);
      EXPECT_EQ(r.relative_accuracy_pct, 0.0);
    }
  }
}

TEST(Aggregate, HandBuiltFixture) {
  // Baseline: index 0 cost 4 acc 0, index 1 cost 2 acc 1 -> means 3, 0.5.
  // In-context: index 0 cost 3 acc 1, index 1 cost 1 acc 1 -> means 2, 1.
  std::vector<RunRecord> records{
      rec(MemoryMethod::none, 0, 4, 0), rec(MemoryMethod::none, 1, 2, 1),
      rec(MemoryMethod::in_context, 0, 3, 1), rec(MemoryMethod::in_context, 1, 1, 1)};

  auto cells = aggregate(records, Grouping::by_cell);
  ASSERT_EQ(cells.size(), 2u);
  EXPECT_EQ(cells[0].memory, MemoryMethod::none);
  EXPECT_EQ(cells[1].memory, MemoryMethod::in_context);
  EXPECT_NEAR(cells[1].relative_cost_pct, 100.0 * (2.0 - 3.0) / 3.0, 1e-12);
  EXPECT_NEAR(cells[1].relative_accuracy_pct, 100.0, 1e-12);

  auto idx = aggregate(records, Grouping::by_index);
  ASSERT_EQ(idx.size(), 4u);
  // Per-index baselines: index 0 -> (3-4)/4, index 1 -> (1-2)/2.
  EXPECT_NEAR(idx[2].relative_cost_pct, -25.0, 1e-12);
  EXPECT_NEAR(idx[3].relative_cost_pct, -50.0, 1e-12);
  // Index 0 accuracy baseline is 0: undefined.
  EXPECT_TRUE(std::isnan(idx[2].relative_accuracy_pct));
  EXPECT_NEAR(idx[3].relative_accuracy_pct, 0.0, 1e-12);

  auto sim = aggregate(records, Grouping::by_similarity);
  ASSERT_EQ(sim.size(), 1u);
  EXPECT_NEAR(sim[0].relative_cost_pct, -100.0 / 3.0, 1e-12);

  auto mem = aggregate(records, Grouping::by_memory);
  ASSERT_EQ(mem.size(), 2u);
  EXPECT_EQ(mem[0].relative_cost_pct, 0.0);
  EXPECT_NEAR(mem[1].relative_cost_pct, -100.0 / 3.0, 1e-12);
}

TEST(Aggregate, ByIndexPreservesIndexCount) {
  auto corpus = fixture::corpus(2, {SimilarityLevel::S1}, 7);
  auto out = run_grid(small_grid(), corpus, learning_backend());
  auto rows = aggregate(out.records, Grouping::by_index);
  EXPECT_EQ(rows.size(), 2u * 7);
}

TEST(Aggregate, MissingBaselineRecordsAreAnError) {
  std::vector<RunRecord> records{rec(MemoryMethod::reflect, 0, 3, 1)};
  EXPECT_THROW(aggregate(records, Grouping::by_cell), ConfigError);
}

TEST(Aggregate, BaselineNeutralityOnRealGrid) {
  auto corpus = fixture::corpus(2, {SimilarityLevel::S1, SimilarityLevel::S4}, 5);
  auto c = small_grid();
  c.similarity_levels = {SimilarityLevel::S1, SimilarityLevel::S4};
  auto out = run_grid(c, corpus, learning_backend());
  for (auto g : {Grouping::by_cell, Grouping::by_index, Grouping::by_memory})
    for (const auto& r : aggregate(out.records, g))
      if (r.memory == MemoryMethod::none) {
        EXPECT_EQ(r.relative_cost_pct, 0.0);
        EXPECT_EQ(r.relative_accuracy_pct, 0.0);
      }
}
