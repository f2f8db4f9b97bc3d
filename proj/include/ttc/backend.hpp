#pragma once

// The model capability boundary: request/response types, the ModelBackend
// concept every strategy is written against, and memory relevance.

#include <algorithm>
#include <array>
#include <concepts>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>

#include "ttc/core.hpp"
#include "ttc/memory_state.hpp"

namespace ttc {

struct SamplingParams {
  double temperature = 0.7;
  double top_p = 0.9;
  std::int64_t max_tokens = 3500;
};

namespace mode {

struct FullAnswer {};

/// Propose the next reasoning step below the path `parent_path`.
struct TreeStep {
  std::string parent_path;
  int depth = 1;  ///< depth of the node being generated
};

/// Critique `answer`. The reply contains "No error" when nothing needs fixing.
struct Feedback {
  std::string answer;
};

struct Refinement {
  std::string prior_answer;
  std::string feedback;
};

/// Continue a long reasoning trace from `prefix` for at most `chunk_tokens`.
struct CotContinuation {
  std::string prefix;
  std::int64_t chunk_tokens = 0;
};

/// Free-form instruction (used to write reflections).
struct Instruction {
  std::string prompt;
};

}  // namespace mode

using GenerationMode = std::variant<mode::FullAnswer, mode::TreeStep, mode::Feedback,
                                    mode::Refinement, mode::CotContinuation, mode::Instruction>;

struct GenerationRequest {
  Question question;
  std::string memory_prompt;
  /// The structured state behind `memory_prompt`; may be null.
  const MemoryState* memory = nullptr;
  GenerationMode mode = mode::FullAnswer{};
  SamplingParams params;
  /// Per-request stream identity. Two requests with equal seeds and modes
  /// draw the same randomness from a seeded backend.
  std::uint64_t seed = 0;
};

struct Generation {
  std::string content;
  /// Provider-reported completion tokens; absent if the provider omits them.
  std::optional<std::int64_t> tokens;
  /// For trace continuations: the model closed its reasoning.
  bool finished = true;
};

struct FineTuneExample {
  Question question;
  std::string answer;
};

enum class FineTuneStatus { applied, unsupported };

/// Marker a reasoning step carries when it completes the solution.
inline constexpr std::string_view kEndOfAnswerMarker = "End of Answer";
/// Marker a feedback reply carries when the answer needs no change.
inline constexpr std::string_view kNoErrorMarker = "No error";
/// Closes a long reasoning trace.
inline constexpr std::string_view kThinkEndMarker = "</think>";

template <class B>
concept ModelBackend = requires(const B& b, const GenerationRequest& req, const Question& q,
                                std::string_view content,
                                std::span<const FineTuneExample> examples) {
  { b.generate(req) } -> std::same_as<Generation>;
  { b.score(q, content) } -> std::convertible_to<double>;
  { b.fine_tune(examples) } -> std::same_as<FineTuneStatus>;
  /// True when long traces are produced chunk by chunk with a continue/stop
  /// decision at each checkpoint; false for a single capped request.
  { b.checkpointed_cot() } -> std::convertible_to<bool>;
};

/// Per-similarity weight of a matching memory entry.
struct RelevanceWeights {
  std::array<double, 4> by_level{1.0, 0.9, 0.6, 0.3};

  double operator[](SimilarityLevel level) const {
    return by_level[static_cast<std::size_t>(level)];
  }
  double& operator[](SimilarityLevel level) { return by_level[static_cast<std::size_t>(level)]; }
};

/// How relevant a memory state is to `question`, in [0, 1]: the number of
/// stored sources matching the question (same backbone, or same knowledge tag
/// for S4 questions), times the weight of the question's similarity level,
/// over the buffer capacity.
inline double relevance(const MemoryState& memory, const Question& question,
                        const RelevanceWeights& weights = {}) {
  std::size_t matches = 0;
  for (const auto& src : memory.sources()) {
    bool same_backbone = src.backbone_id == question.backbone_id;
    bool same_knowledge = question.similarity_level == SimilarityLevel::S4 &&
                          question.knowledge_tag && src.knowledge_tag &&
                          *question.knowledge_tag == *src.knowledge_tag;
    if (same_backbone || same_knowledge) ++matches;
  }
  double r = weights[question.similarity_level] * static_cast<double>(matches) /
             static_cast<double>(kMemoryCapacity);
  return std::clamp(r, 0.0, 1.0);
}

}  // namespace ttc
