#pragma once

// Adaptive test-time scaling strategies. Each one stops spending compute as
// soon as a satisfying answer (score >= tau) exists, and meters cost in its
// own dominant unit: answers (Best-of-N, Self-Refine), tree nodes (DFS) or
// generated tokens (Long CoT).

#include <algorithm>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ttc/answer.hpp"
#include "ttc/backend.hpp"
#include "ttc/core.hpp"
#include "ttc/memory_state.hpp"
#include "ttc/random.hpp"

namespace ttc {

enum class StrategyKind { best_of_n, dfs, self_refine, long_cot };

inline constexpr StrategyKind kAllStrategyKinds[] = {StrategyKind::best_of_n, StrategyKind::dfs,
                                                     StrategyKind::self_refine,
                                                     StrategyKind::long_cot};

constexpr std::string_view to_string(StrategyKind k) noexcept {
  switch (k) {
    case StrategyKind::best_of_n: return "best_of_n";
    case StrategyKind::dfs: return "dfs";
    case StrategyKind::self_refine: return "self_refine";
    case StrategyKind::long_cot: return "long_cot";
  }
  return "?";
}

inline std::optional<StrategyKind> parse_strategy_kind(std::string_view s) noexcept {
  for (auto k : kAllStrategyKinds) {
    if (s == to_string(k)) return k;
  }
  return std::nullopt;
}

constexpr CostUnit cost_unit(StrategyKind k) noexcept {
  switch (k) {
    case StrategyKind::dfs: return CostUnit::nodes;
    case StrategyKind::long_cot: return CostUnit::tokens;
    default: return CostUnit::answers;
  }
}

struct StrategyConfig {
  StrategyKind kind = StrategyKind::best_of_n;
  double tau = 0.9;
  std::int64_t n_max = 5;
  int max_depth = 15;
  std::int64_t max_node = 50;
  int branching = 3;
  double prune_ratio = 0.4;
  std::int64_t max_iterations = 15;
  std::int64_t max_tokens = 3500;
  std::int64_t cot_checkpoint = 256;
  std::int64_t batch_size = 1;
  /// Best-of-N only: false generates all n_max candidates (the non-adaptive
  /// reference method).
  bool adaptive = true;
  SamplingParams sampling;
};

inline void validate(const StrategyConfig& c) {
  if (!(c.tau > 0.0 && c.tau < 1.0)) throw ConfigError("tau must lie in (0,1)");
  if (c.n_max < 1 || c.max_depth < 1 || c.max_node < 1 || c.branching < 1 ||
      c.max_iterations < 1 || c.max_tokens < 1 || c.cot_checkpoint < 1 || c.batch_size < 1)
    throw ConfigError("strategy caps must all be at least 1");
  if (!(c.prune_ratio >= 0.0 && c.prune_ratio <= 1.0))
    throw ConfigError("prune_ratio must lie in [0,1]");
}

/// The most compute a single question may consume under `c`.
inline std::int64_t budget_cap(const StrategyConfig& c) {
  switch (c.kind) {
    case StrategyKind::best_of_n: return c.n_max;
    case StrategyKind::dfs: return c.max_node;
    case StrategyKind::self_refine: return 1 + c.max_iterations;
    case StrategyKind::long_cot: return c.max_tokens;
  }
  throw ConfigError("unknown strategy kind");
}

namespace detail {

inline GenerationRequest base_request(const Question& q, const MemoryState& memory,
                                      const std::string& memory_prompt,
                                      const StrategyConfig& config) {
  GenerationRequest req;
  req.question = q;
  req.memory_prompt = memory_prompt;
  req.memory = &memory;
  req.params = config.sampling;
  return req;
}

inline void finalize(Outcome& out, const StrategyConfig& config) {
  out.selected = select_final(out.candidates);
  out.satisfied = is_satisfying(out.candidates[out.selected].score, Threshold(config.tau));
  out.correct = out.candidates[out.selected].correct;
}

/// Runs a backend call, converting transport failures into RunFailure that
/// carries the budget consumed so far.
template <class F>
auto guarded(const BudgetMeter& meter, F&& call) {
  try {
    return call();
  } catch (const BackendError& e) {
    throw RunFailure(e.what(), meter.consumed());
  }
}

}  // namespace detail

/// Best-of-N: generate and score candidates (in batches of batch_size) and
/// stop once one scores >= tau and is not known to be wrong. A started batch
/// is charged in full.
template <ModelBackend Backend>
Outcome run_best_of_n(const Question& q, const MemoryState& memory, const StrategyConfig& config,
                      const Backend& backend, std::uint64_t seed) {
  validate(config);
  Outcome out{q.id, {}, 0, false, BudgetMeter(CostUnit::answers, config.n_max), std::nullopt, {}};
  const Threshold tau(config.tau);
  auto req = detail::base_request(q, memory, render(memory), config);
  req.mode = mode::FullAnswer{};

  bool stop = false;
  while (!stop && !out.meter.exhausted()) {
    const auto batch = std::min(config.batch_size, out.meter.remaining());
    (void)out.meter.try_charge(batch);
    // Candidates of a batch may be produced concurrently, but they are
    // scored and stop-checked strictly in index order.
    for (std::int64_t i = 0; i < batch; ++i) {
      const auto index = static_cast<std::int64_t>(out.candidates.size());
      req.seed = derive_seed(seed, "best_of_n", index);
      auto gen = detail::guarded(out.meter, [&] { return backend.generate(req); });
      double score = detail::guarded(out.meter, [&] { return backend.score(q, gen.content); });
      Candidate c{index, std::move(gen.content), score, std::nullopt, 1};
      c.correct = check_answer(q, c.content);
      if (config.adaptive && is_satisfying(c.score, tau) && c.correct.value_or(true)) stop = true;
      out.candidates.push_back(std::move(c));
    }
  }
  detail::finalize(out, config);
  return out;
}

/// Depth-first search over reasoning steps. Children of a node are produced
/// one at a time; a child scoring >= tau suppresses its remaining siblings.
/// Otherwise children below prune_ratio * (best sibling score) are dropped
/// and the survivors are visited best first. Ends on a terminal node (one
/// marked "End of Answer" with score 1.0), when max_node nodes have been
/// generated, or when the tree is exhausted.
template <ModelBackend Backend>
Outcome run_dfs(const Question& q, const MemoryState& memory, const StrategyConfig& config,
                const Backend& backend, std::uint64_t seed) {
  validate(config);
  Outcome out{q.id, {}, 0, false, BudgetMeter(CostUnit::nodes, config.max_node), std::nullopt, {}};
  const Threshold tau(config.tau);
  auto req = detail::base_request(q, memory, render(memory), config);

  enum class Status { open, solved, capped };

  auto expand = [&](auto& self, std::optional<std::int64_t> parent, int parent_depth,
                    const std::string& path) -> Status {
    if (parent_depth >= config.max_depth) return Status::open;
    std::vector<std::int64_t> children;
    for (int i = 0; i < config.branching; ++i) {
      if (!out.meter.try_charge(1)) return Status::capped;
      const auto id = static_cast<std::int64_t>(out.tree.size());
      req.mode = mode::TreeStep{path, parent_depth + 1};
      req.seed = derive_seed(seed, "dfs", id);
      auto gen = detail::guarded(out.meter, [&] { return backend.generate(req); });
      std::string full = path.empty() ? gen.content : path + "\n" + gen.content;
      // The judge sees the whole path, not just the new step.
      double score = detail::guarded(out.meter, [&] { return backend.score(q, full); });
      bool terminal = gen.content.find(kEndOfAnswerMarker) != std::string::npos && score == 1.0;

      out.tree.push_back(TreeNode{id, parent, parent_depth + 1, gen.content, score, terminal});
      Candidate c{id, full, score, check_answer(q, full), 1};
      out.candidates.push_back(std::move(c));
      children.push_back(id);

      if (terminal) return Status::solved;
      if (is_satisfying(score, tau)) break;
    }

    double best = 0.0;
    for (auto id : children) best = std::max(best, out.tree[id].score);
    std::vector<std::int64_t> survivors;
    for (auto id : children) {
      if (out.tree[id].score >= config.prune_ratio * best) survivors.push_back(id);
    }
    std::stable_sort(survivors.begin(), survivors.end(), [&](auto a, auto b) {
      return out.tree[a].score > out.tree[b].score;
    });
    for (auto id : survivors) {
      // Copy: out.candidates may reallocate during the recursive call.
      const std::string child_path = out.candidates[id].content;
      auto status = self(self, id, out.tree[id].depth, child_path);
      if (status != Status::open) return status;
    }
    return Status::open;
  };

  expand(expand, std::nullopt, 0, std::string{});
  if (out.candidates.empty()) {
    // Only reachable with max_depth < 1, which validate() rejects.
    throw ContractError("tree search produced no nodes");
  }
  detail::finalize(out, config);
  return out;
}

/// Self-Refine: one initial answer, then up to max_iterations rounds of
/// feedback and refinement. Stops when the feedback says "No error". Only
/// generated answers are charged; feedback calls are not.
template <ModelBackend Backend>
Outcome run_self_refine(const Question& q, const MemoryState& memory, const StrategyConfig& config,
                        const Backend& backend, std::uint64_t seed) {
  validate(config);
  Outcome out{q.id, {}, 0, false,
              BudgetMeter(CostUnit::answers, 1 + config.max_iterations), std::nullopt, {}};
  auto req = detail::base_request(q, memory, render(memory), config);

  auto add_answer = [&](const GenerationMode& m, std::int64_t index) {
    (void)out.meter.try_charge(1);
    req.mode = m;
    req.seed = derive_seed(seed, "self_refine", index);
    auto gen = detail::guarded(out.meter, [&] { return backend.generate(req); });
    double score = detail::guarded(out.meter, [&] { return backend.score(q, gen.content); });
    Candidate c{index, std::move(gen.content), score, std::nullopt, 1};
    c.correct = check_answer(q, c.content);
    out.candidates.push_back(std::move(c));
  };

  add_answer(mode::FullAnswer{}, 0);
  for (std::int64_t it = 1; it <= config.max_iterations; ++it) {
    const std::string current = out.candidates.back().content;
    req.mode = mode::Feedback{current};
    req.seed = derive_seed(seed, "self_refine_feedback", it);
    auto feedback = detail::guarded(out.meter, [&] { return backend.generate(req); });
    if (feedback.content.find(kNoErrorMarker) != std::string::npos) break;
    add_answer(mode::Refinement{current, feedback.content}, it);
  }
  detail::finalize(out, config);
  return out;
}

/// Long chain of thought, metered in tokens. A checkpointing backend is asked
/// for cot_checkpoint tokens at a time and decides at each checkpoint whether
/// to stop; otherwise a single request capped at max_tokens is made. The
/// whole trace is the one candidate.
template <ModelBackend Backend>
Outcome run_long_cot(const Question& q, const MemoryState& memory, const StrategyConfig& config,
                     const Backend& backend, std::uint64_t seed) {
  validate(config);
  Outcome out{q.id, {}, 0, false, BudgetMeter(CostUnit::tokens, config.max_tokens), std::nullopt,
              {}};
  auto req = detail::base_request(q, memory, render(memory), config);
  const bool checkpointed = backend.checkpointed_cot();

  std::string trace;
  for (std::int64_t chunk = 0; !out.meter.exhausted(); ++chunk) {
    const auto want = checkpointed ? std::min(config.cot_checkpoint, out.meter.remaining())
                                   : out.meter.remaining();
    req.mode = mode::CotContinuation{trace, want};
    req.seed = derive_seed(seed, "long_cot", chunk);
    auto gen = detail::guarded(out.meter, [&] { return backend.generate(req); });
    if (!gen.tokens) throw RunFailure("token count unavailable", out.meter.consumed());
    const auto used = std::min(*gen.tokens, out.meter.remaining());
    trace += gen.content;
    if (used < 1) break;
    (void)out.meter.try_charge(used);
    if (gen.finished) break;
  }

  double score = trace.empty()
                     ? 0.0
                     : detail::guarded(out.meter, [&] { return backend.score(q, trace); });
  Candidate c{0, trace, score, check_answer(q, trace),
              std::max<std::int64_t>(1, out.meter.consumed())};
  out.candidates.push_back(std::move(c));
  detail::finalize(out, config);
  return out;
}

/// Dispatches on config.kind.
template <ModelBackend Backend>
Outcome run(const Question& q, const MemoryState& memory, const StrategyConfig& config,
            const Backend& backend, std::uint64_t seed) {
  switch (config.kind) {
    case StrategyKind::best_of_n: return run_best_of_n(q, memory, config, backend, seed);
    case StrategyKind::dfs: return run_dfs(q, memory, config, backend, seed);
    case StrategyKind::self_refine: return run_self_refine(q, memory, config, backend, seed);
    case StrategyKind::long_cot: return run_long_cot(q, memory, config, backend, seed);
  }
  throw ConfigError("unknown strategy kind");
}

}  // namespace ttc
