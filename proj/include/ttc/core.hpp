#pragma once

// Domain types shared by every module: questions, candidates, the compute
// budget meter and the per-question outcome.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ttc/error.hpp"

namespace ttc {

/// How closely a question resembles the others in its set, from identical
/// (S1) down to sharing only the underlying knowledge (S4).
enum class SimilarityLevel { S1, S2, S3, S4 };

inline constexpr SimilarityLevel kAllSimilarityLevels[] = {
    SimilarityLevel::S1, SimilarityLevel::S2, SimilarityLevel::S3, SimilarityLevel::S4};

constexpr std::string_view to_string(SimilarityLevel level) noexcept {
  switch (level) {
    case SimilarityLevel::S1: return "S1";
    case SimilarityLevel::S2: return "S2";
    case SimilarityLevel::S3: return "S3";
    case SimilarityLevel::S4: return "S4";
  }
  return "S?";
}

inline std::optional<SimilarityLevel> parse_similarity(std::string_view s) noexcept {
  for (auto level : kAllSimilarityLevels) {
    if (s == to_string(level)) return level;
  }
  return std::nullopt;
}

struct Question {
  std::string id;
  std::string backbone_id;
  SimilarityLevel similarity_level = SimilarityLevel::S1;
  std::string text;
  std::optional<std::string> reference_answer;
  std::optional<std::string> knowledge_tag;

  bool operator==(const Question&) const = default;
};

/// One generated unit: a full answer, a tree node, a refinement or a token
/// span, with its quality score.
struct Candidate {
  std::int64_t index = 0;
  std::string content;
  double score = 0.0;
  std::optional<bool> correct;
  std::int64_t unit_cost = 1;

  bool operator==(const Candidate&) const = default;
};

enum class CostUnit { answers, nodes, tokens };

constexpr std::string_view to_string(CostUnit unit) noexcept {
  switch (unit) {
    case CostUnit::answers: return "answers";
    case CostUnit::nodes: return "nodes";
    case CostUnit::tokens: return "tokens";
  }
  return "?";
}

/// Counts consumed compute in a strategy's dominant unit. Never exceeds its
/// cap and never decreases.
class BudgetMeter {
 public:
  BudgetMeter(CostUnit unit, std::int64_t cap) : unit_(unit), cap_(cap) {
    if (cap < 1) throw ContractError("budget cap must be positive");
  }

  /// Charges `units` if that keeps consumed within the cap. Returns false
  /// (the cap-reached signal) and leaves the meter untouched otherwise.
  [[nodiscard]] bool try_charge(std::int64_t units) {
    if (units < 1) throw ContractError("charge must be at least one unit");
    if (consumed_ + units > cap_) return false;
    consumed_ += units;
    return true;
  }

  CostUnit unit() const noexcept { return unit_; }
  std::int64_t consumed() const noexcept { return consumed_; }
  std::int64_t cap() const noexcept { return cap_; }
  std::int64_t remaining() const noexcept { return cap_ - consumed_; }
  bool exhausted() const noexcept { return consumed_ >= cap_; }

 private:
  CostUnit unit_;
  std::int64_t cap_;
  std::int64_t consumed_ = 0;
};

/// Satisfaction threshold tau, strictly inside (0, 1).
class Threshold {
 public:
  explicit Threshold(double tau) : tau_(tau) {
    if (!(tau > 0.0 && tau < 1.0)) throw ContractError("threshold must lie in (0,1)");
  }
  double value() const noexcept { return tau_; }

 private:
  double tau_;
};

inline bool is_satisfying(double score, Threshold tau) {
  if (!(score >= 0.0 && score <= 1.0)) throw ContractError("score out of range");
  return score >= tau.value();
}

/// Index of the highest-scoring candidate; the earliest one wins ties.
inline std::size_t select_final(std::span<const Candidate> candidates) {
  if (candidates.empty()) throw ContractError("no candidates");
  std::size_t best = 0;
  for (std::size_t i = 1; i < candidates.size(); ++i) {
    if (candidates[i].score > candidates[best].score) best = i;
  }
  return best;
}

/// A node of the reasoning-step search tree. The root (the question itself)
/// is implicit and never materialized.
struct TreeNode {
  std::int64_t id = 0;
  std::optional<std::int64_t> parent;
  int depth = 1;
  std::string content;
  double score = 0.0;
  bool terminal = false;
};

struct Outcome {
  std::string question_id;
  std::vector<Candidate> candidates;
  std::size_t selected = 0;
  bool satisfied = false;
  BudgetMeter meter{CostUnit::answers, 1};
  /// Unknown when the question has no reference answer.
  std::optional<bool> correct;
  /// Only populated by tree search: every node generated, in creation order.
  std::vector<TreeNode> tree;

  std::int64_t cost() const noexcept { return meter.consumed(); }
  const Candidate& final_answer() const { return candidates.at(selected); }
};

}  // namespace ttc
