#pragma once

// Experiment loop: sequential question processing with memory accumulation,
// the grid of (strategy x memory x similarity) cells, and the relative
// aggregate views against the no-memory baseline.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include <boost/math/distributions/students_t.hpp>

#include "ttc/core.hpp"
#include "ttc/error.hpp"
#include "ttc/memory.hpp"
#include "ttc/memory_state.hpp"
#include "ttc/random.hpp"
#include "ttc/strategies.hpp"

namespace ttc {

/// Questions sharing one backbone at one similarity level, in sequence order.
struct QuestionSet {
  std::string set_id;
  SimilarityLevel level = SimilarityLevel::S1;
  std::vector<Question> questions;
};

struct ExperimentConfig {
  std::vector<StrategyConfig> strategies{StrategyConfig{}};
  std::vector<MemoryMethod> memory_methods{MemoryMethod::none, MemoryMethod::in_context};
  std::vector<SimilarityLevel> similarity_levels{SimilarityLevel::S1};
  int repetitions = 4;
  int question_sets = 10;
  /// Questions taken from the front of each set; 0 takes all.
  int questions_per_set = 0;
  std::uint64_t seed = 0;
  ReflectionOptions reflection;
};

inline void validate(const ExperimentConfig& c) {
  if (c.repetitions < 1) throw ConfigError("repetitions must be at least 1");
  if (c.question_sets < 1) throw ConfigError("question_sets must be at least 1");
  if (c.questions_per_set < 0) throw ConfigError("questions_per_set must be non-negative");
  if (c.strategies.empty() || c.memory_methods.empty() || c.similarity_levels.empty())
    throw ConfigError("strategies, memory methods and similarity levels must be non-empty");
  std::set<StrategyKind> kinds;
  for (const auto& s : c.strategies) {
    validate(s);
    if (!kinds.insert(s.kind).second)
      throw ConfigError("strategy listed twice: " + std::string(to_string(s.kind)));
  }
  if (std::set(c.memory_methods.begin(), c.memory_methods.end()).size() != c.memory_methods.size())
    throw ConfigError("memory method listed twice");
  if (std::set(c.similarity_levels.begin(), c.similarity_levels.end()).size() !=
      c.similarity_levels.size())
    throw ConfigError("similarity level listed twice");
  if (std::find(c.memory_methods.begin(), c.memory_methods.end(), MemoryMethod::none) ==
      c.memory_methods.end())
    throw ConfigError(
        "missing baseline: memory method 'none' is required for every (strategy, similarity) "
        "pair, otherwise relative metrics are undefined");
}

struct RunRecord {
  std::string set_id;
  std::int64_t question_index = 0;
  int repetition = 0;
  StrategyKind strategy = StrategyKind::best_of_n;
  MemoryMethod memory = MemoryMethod::none;
  SimilarityLevel similarity = SimilarityLevel::S1;
  std::int64_t cost = 0;
  CostUnit unit = CostUnit::answers;
  int accuracy = 0;
  bool satisfied = false;
  /// Not part of the records file.
  bool failed = false;

  auto sort_key() const {
    return std::tie(strategy, memory, similarity, set_id, question_index, repetition);
  }
  bool operator==(const RunRecord& o) const {
    return sort_key() == o.sort_key() && cost == o.cost && unit == o.unit &&
           accuracy == o.accuracy && satisfied == o.satisfied;
  }
};

inline void sort_records(std::vector<RunRecord>& records) {
  std::sort(records.begin(), records.end(),
            [](const RunRecord& a, const RunRecord& b) { return a.sort_key() < b.sort_key(); });
}

/// Per-question seed shared by every cell, so memory methods are compared
/// under common random numbers.
inline std::uint64_t question_seed(std::uint64_t master, std::string_view set_id,
                                   std::int64_t index, int repetition) {
  return derive_seed(master, set_id, index, repetition);
}

struct SequenceResult {
  std::vector<RunRecord> records;
  MemoryState final_memory;
  std::vector<std::string> warnings;
};

/// Processes `questions` strictly in order. Memory entering question t is a
/// function of questions 0..t-1 only.
template <ModelBackend Backend>
SequenceResult run_sequence(std::span<const Question> questions, MemoryMethod method,
                            const StrategyConfig& strategy, const Backend& backend,
                            std::uint64_t seed, int repetition = 0,
                            ReflectionOptions reflection = {}) {
  if (questions.empty()) throw PreconditionError("empty question sequence");
  const auto& set_id = questions.front().backbone_id;
  const auto level = questions.front().similarity_level;
  for (const auto& q : questions)
    if (q.backbone_id != set_id || q.similarity_level != level)
      throw PreconditionError("questions must come from one set");
  validate(strategy);

  SequenceResult result{{}, MemoryState::empty(method), {}};
  for (std::size_t i = 0; i < questions.size(); ++i) {
    const auto& q = questions[i];
    const auto index = static_cast<std::int64_t>(i);
    const auto qseed = question_seed(seed, set_id, index, repetition);
    RunRecord rec{set_id, index, repetition, strategy.kind, method, level,
                  0, cost_unit(strategy.kind), 0, false, false};
    try {
      auto outcome = run(q, result.final_memory, strategy, backend, qseed);
      rec.cost = outcome.cost();
      rec.accuracy = outcome.correct.value_or(false) ? 1 : 0;
      rec.satisfied = outcome.satisfied;
      reflection.seed = qseed;
      auto upd = update_memory(result.final_memory, q, outcome, backend, reflection);
      if (upd.warning) result.warnings.push_back(q.id + ": " + *upd.warning);
      result.final_memory = std::move(upd.state);
    } catch (const RunFailure& e) {
      rec.cost = e.partial_cost();
      rec.failed = true;
      result.warnings.push_back(q.id + ": backend failure: " + e.what());
    }
    result.records.push_back(std::move(rec));
  }
  return result;
}

// ------------------------------------------------------------ grid

struct Cell {
  StrategyConfig strategy;
  MemoryMethod memory = MemoryMethod::none;
  SimilarityLevel similarity = SimilarityLevel::S1;

  std::string name() const {
    return std::string(to_string(strategy.kind)) + "/" + std::string(to_string(memory)) + "/" +
           std::string(to_string(similarity));
  }
};

inline std::vector<Cell> expand_cells(const ExperimentConfig& c) {
  std::vector<Cell> cells;
  for (const auto& s : c.strategies)
    for (auto m : c.memory_methods)
      for (auto l : c.similarity_levels) cells.push_back({s, m, l});
  return cells;
}

/// One schedulable piece of work: every repetition of one cell on one set.
struct WorkUnit {
  std::size_t cell = 0;
  std::size_t set = 0;
};

struct UnitResult {
  std::string unit_id;
  std::vector<RunRecord> records;
  /// Final memory per repetition.
  std::vector<MemoryState> memories;
  std::vector<std::string> warnings;
};

inline std::string unit_id(const Cell& cell, const QuestionSet& set) {
  return cell.name() + "/" + set.set_id;
}

/// The first `question_sets` sets at each configured level, in corpus order.
inline std::vector<const QuestionSet*> select_sets(const ExperimentConfig& config,
                                                   const std::vector<QuestionSet>& corpus,
                                                   SimilarityLevel level) {
  std::vector<const QuestionSet*> out;
  for (const auto& s : corpus) {
    if (s.level != level) continue;
    if (static_cast<int>(out.size()) == config.question_sets) break;
    out.push_back(&s);
  }
  if (out.empty())
    throw ConfigError("corpus has no question set at level " + std::string(to_string(level)));
  return out;
}

struct GridOptions {
  /// 0 means one worker per selected question set.
  int workers = 0;
  /// Unit ids to skip (already present from a previous run).
  std::set<std::string> completed;
  /// Called once per finished unit, serialized under a lock, in completion
  /// order.
  std::function<void(const UnitResult&)> on_unit_done;
  /// Stop scheduling after this many newly completed units; 0 means no limit.
  std::size_t stop_after_units = 0;
};

struct GridResult {
  std::vector<RunRecord> records;
  std::vector<std::string> warnings;
  std::size_t units_total = 0;
  std::size_t units_run = 0;
  bool complete = false;
};

/// Executes every (cell, set) unit. Records come back in canonical order, so
/// the table does not depend on worker count or scheduling.
template <ModelBackend Backend>
GridResult run_grid(const ExperimentConfig& config, const std::vector<QuestionSet>& corpus,
                    const Backend& backend, const GridOptions& options = {}) {
  validate(config);
  const auto cells = expand_cells(config);

  struct Planned {
    const Cell* cell;
    const QuestionSet* set;
    std::string id;
  };
  std::vector<Planned> plan;
  std::set<std::string> distinct_sets;
  for (const auto& cell : cells) {
    for (const auto* set : select_sets(config, corpus, cell.similarity)) {
      distinct_sets.insert(set->set_id + "/" + std::string(to_string(set->level)));
      plan.push_back({&cell, set, unit_id(cell, *set)});
    }
  }

  GridResult result;
  result.units_total = plan.size();
  std::vector<const Planned*> todo;
  for (const auto& p : plan)
    if (!options.completed.contains(p.id)) todo.push_back(&p);

  std::mutex mu;
  std::atomic<std::size_t> next{0};
  std::size_t finished = 0;
  std::exception_ptr error;

  auto work = [&] {
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= todo.size()) return;
      {
        std::lock_guard lock(mu);
        if (error || (options.stop_after_units && finished >= options.stop_after_units)) return;
      }
      try {
        const auto& p = *todo[i];
        std::vector<Question> qs = p.set->questions;
        if (config.questions_per_set > 0 &&
            qs.size() > static_cast<std::size_t>(config.questions_per_set))
          qs.resize(config.questions_per_set);
        UnitResult unit{p.id, {}, {}, {}};
        for (int rep = 0; rep < config.repetitions; ++rep) {
          auto seq = run_sequence(std::span<const Question>(qs), p.cell->memory,
                                  p.cell->strategy, backend, config.seed, rep, config.reflection);
          unit.records.insert(unit.records.end(), seq.records.begin(), seq.records.end());
          unit.memories.push_back(std::move(seq.final_memory));
          unit.warnings.insert(unit.warnings.end(), seq.warnings.begin(), seq.warnings.end());
        }
        std::lock_guard lock(mu);
        if (options.stop_after_units && finished >= options.stop_after_units) return;
        if (options.on_unit_done) options.on_unit_done(unit);
        ++finished;
        result.records.insert(result.records.end(), unit.records.begin(), unit.records.end());
        result.warnings.insert(result.warnings.end(), unit.warnings.begin(), unit.warnings.end());
      } catch (...) {
        std::lock_guard lock(mu);
        if (!error) error = std::current_exception();
        return;
      }
    }
  };

  int workers = options.workers > 0 ? options.workers
                                    : static_cast<int>(std::max<std::size_t>(1, distinct_sets.size()));
  workers = std::max(1, std::min<int>(workers, static_cast<int>(std::max<std::size_t>(1, todo.size()))));
  if (workers == 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(work);
  }
  if (error) std::rethrow_exception(error);

  result.units_run = finished;
  result.complete = finished == todo.size();
  sort_records(result.records);
  return result;
}

/// Cells in which most records are backend failures.
inline std::size_t count_aborted_cells(const std::vector<RunRecord>& records) {
  std::map<std::tuple<StrategyKind, MemoryMethod, SimilarityLevel>, std::pair<int, int>> tally;
  for (const auto& r : records) {
    auto& [failed, total] = tally[{r.strategy, r.memory, r.similarity}];
    failed += r.failed;
    ++total;
  }
  std::size_t aborted = 0;
  for (const auto& [_, t] : tally)
    if (2 * t.first > t.second) ++aborted;
  return aborted;
}

// ------------------------------------------------------------ statistics

/// 100 * (mean(treatment) - mean(baseline)) / mean(baseline); nullopt when
/// the baseline mean is 0.
inline std::optional<double> relative_change(std::span<const double> treatment,
                                             std::span<const double> baseline) {
  if (treatment.empty() || baseline.empty()) throw ContractError("empty group");
  auto mean = [](std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
  };
  const double b = mean(baseline);
  if (b == 0.0) return std::nullopt;
  return 100.0 * (mean(treatment) - b) / b;
}

struct PearsonResult {
  double r = 0.0;
  /// Two-sided, from the t distribution with n-2 degrees of freedom.
  double p_value = 1.0;
};

inline PearsonResult pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw ContractError("pearson: length mismatch");
  if (x.size() < 3) throw ContractError("pearson: at least 3 points are required");
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, syy = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx, dy = y[i] - my;
    sxx += dx * dx;
    syy += dy * dy;
    sxy += dx * dy;
  }
  if (sxx == 0.0 || syy == 0.0) throw ContractError("pearson: undefined for zero variance");
  PearsonResult res;
  res.r = std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
  if (std::abs(res.r) == 1.0) {
    res.p_value = 0.0;
  } else {
    const double df = n - 2.0;
    const double t = res.r * std::sqrt(df / (1.0 - res.r * res.r));
    boost::math::students_t dist(df);
    res.p_value = 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t)));
  }
  return res;
}

// ------------------------------------------------------------ aggregates

enum class Grouping { by_cell, by_similarity, by_memory, by_index };

inline constexpr Grouping kAllGroupings[] = {Grouping::by_cell, Grouping::by_similarity,
                                             Grouping::by_memory, Grouping::by_index};

constexpr std::string_view to_string(Grouping g) noexcept {
  switch (g) {
    case Grouping::by_cell: return "by_cell";
    case Grouping::by_similarity: return "by_similarity";
    case Grouping::by_memory: return "by_memory";
    case Grouping::by_index: return "by_index";
  }
  return "?";
}

/// One row of an aggregate view. Unset keys do not apply to the grouping.
/// A NaN percentage means undefined (zero baseline mean).
struct AggregateRow {
  Grouping grouping = Grouping::by_cell;
  std::optional<StrategyKind> strategy;
  std::optional<MemoryMethod> memory;
  std::optional<SimilarityLevel> similarity;
  std::optional<std::int64_t> question_index;
  double relative_cost_pct = 0.0;
  double relative_accuracy_pct = 0.0;
};

namespace detail {

struct Series {
  std::vector<double> cost;
  std::vector<double> accuracy;
  void add(const RunRecord& r) {
    cost.push_back(static_cast<double>(r.cost));
    accuracy.push_back(r.accuracy);
  }
};

inline double or_nan(std::optional<double> v) {
  return v.value_or(std::numeric_limits<double>::quiet_NaN());
}

/// Mean of the defined values; NaN when none is defined.
inline double mean_defined(const std::vector<double>& v) {
  double s = 0.0;
  int n = 0;
  for (double x : v)
    if (!std::isnan(x)) {
      s += x;
      ++n;
    }
  return n ? s / n : std::numeric_limits<double>::quiet_NaN();
}

}  // namespace detail

/// Builds one aggregate view. by_cell and by_index compare against the
/// matching none cell (per index for by_index). by_similarity averages the
/// by_cell values of treatment cells at each level; by_memory averages the
/// by_cell values of each method. Memory none is 0 by construction.
inline std::vector<AggregateRow> aggregate(const std::vector<RunRecord>& records,
                                           Grouping grouping) {
  using CellKey = std::tuple<StrategyKind, MemoryMethod, SimilarityLevel>;
  using IndexKey = std::tuple<StrategyKind, MemoryMethod, SimilarityLevel, std::int64_t>;
  std::map<CellKey, detail::Series> cells;
  std::map<IndexKey, detail::Series> indexed;
  for (const auto& r : records) {
    cells[{r.strategy, r.memory, r.similarity}].add(r);
    indexed[{r.strategy, r.memory, r.similarity, r.question_index}].add(r);
  }

  auto baseline_of = [&](auto& table, auto key) -> const detail::Series& {
    std::get<1>(key) = MemoryMethod::none;
    auto it = table.find(key);
    if (it == table.end())
      throw ConfigError("missing baseline records for " +
                        std::string(to_string(std::get<0>(key))) + "/" +
                        std::string(to_string(std::get<2>(key))));
    return it->second;
  };

  std::vector<AggregateRow> cell_rows;
  for (const auto& [key, s] : cells) {
    const auto& [strategy, memory, level] = key;
    const auto& base = baseline_of(cells, key);
    cell_rows.push_back({Grouping::by_cell, strategy, memory, level, std::nullopt,
                         detail::or_nan(relative_change(s.cost, base.cost)),
                         detail::or_nan(relative_change(s.accuracy, base.accuracy))});
    if (memory == MemoryMethod::none) {
      // Identically zero, even when the accuracy baseline is 0.
      cell_rows.back().relative_cost_pct = 0.0;
      cell_rows.back().relative_accuracy_pct = 0.0;
    }
  }

  switch (grouping) {
    case Grouping::by_cell: return cell_rows;

    case Grouping::by_index: {
      std::vector<AggregateRow> rows;
      for (const auto& [key, s] : indexed) {
        const auto& [strategy, memory, level, index] = key;
        const auto& base = baseline_of(indexed, key);
        AggregateRow row{Grouping::by_index, strategy, memory, level, index, 0.0, 0.0};
        if (memory != MemoryMethod::none) {
          row.relative_cost_pct = detail::or_nan(relative_change(s.cost, base.cost));
          row.relative_accuracy_pct = detail::or_nan(relative_change(s.accuracy, base.accuracy));
        }
        rows.push_back(row);
      }
      return rows;
    }

    case Grouping::by_similarity: {
      std::map<SimilarityLevel, std::pair<std::vector<double>, std::vector<double>>> treated;
      std::set<SimilarityLevel> levels;
      for (const auto& row : cell_rows) {
        levels.insert(*row.similarity);
        if (*row.memory == MemoryMethod::none) continue;
        treated[*row.similarity].first.push_back(row.relative_cost_pct);
        treated[*row.similarity].second.push_back(row.relative_accuracy_pct);
      }
      std::vector<AggregateRow> rows;
      for (auto level : levels) {
        AggregateRow row{Grouping::by_similarity, std::nullopt, std::nullopt, level,
                         std::nullopt, 0.0, 0.0};
        if (auto it = treated.find(level); it != treated.end()) {
          row.relative_cost_pct = detail::mean_defined(it->second.first);
          row.relative_accuracy_pct = detail::mean_defined(it->second.second);
        }
        rows.push_back(row);
      }
      return rows;
    }

    case Grouping::by_memory: {
      std::map<MemoryMethod, std::pair<std::vector<double>, std::vector<double>>> by;
      for (const auto& row : cell_rows) {
        by[*row.memory].first.push_back(row.relative_cost_pct);
        by[*row.memory].second.push_back(row.relative_accuracy_pct);
      }
      std::vector<AggregateRow> rows;
      for (const auto& [memory, v] : by)
        rows.push_back({Grouping::by_memory, std::nullopt, memory, std::nullopt, std::nullopt,
                        detail::mean_defined(v.first), detail::mean_defined(v.second)});
      return rows;
    }
  }
  throw ContractError("unknown grouping");
}

}  // namespace ttc
