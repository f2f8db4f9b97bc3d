#pragma once

// Deterministic stand-in for a language model. Each request draws a success
// event with probability
//
//     p = clamp(base_success + memory_gain * relevance(memory, question), 0, 1)
//
// from a stream keyed on (profile seed, request seed), and writes the outcome
// into the generated text as a marker so scoring and correctness checks can
// be done downstream. Scores are drawn from the success or failure score
// distribution, keyed on the marker's nonce.
//
// Because draws depend only on seeds and never on prompt text, two runs that
// differ only in memory see common random numbers: success is u < p for the
// same u, so a larger p can only turn failures into successes.

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <span>
#include <string>
#include <string_view>

#include "ttc/backend.hpp"
#include "ttc/random.hpp"

namespace ttc {

/// Score distribution over a sub-interval of [0, 1]: a point mass at `lo`, or
/// uniform on [lo, hi).
struct ScoreDist {
  enum class Kind { point, uniform };
  Kind kind = Kind::uniform;
  double lo = 0.0;
  double hi = 1.0;

  static ScoreDist point(double v) { return {Kind::point, v, v}; }
  static ScoreDist uniform(double lo, double hi) { return {Kind::uniform, lo, hi}; }

  double sample(SplitMix64& rng) const {
    return kind == Kind::point ? lo : rng.uniform(lo, hi);
  }
};

struct SimulatedProfile {
  double base_success = 0.5;
  double memory_gain = 0.0;
  RelevanceWeights relevance_weights;
  ScoreDist score_given_success = ScoreDist::uniform(0.9, 1.0);
  ScoreDist score_given_failure = ScoreDist::uniform(0.0, 0.9);
  /// Probability of closing a long trace at a checkpoint with no memory.
  double base_stop = 0.1;
  /// Increase of the stop probability per unit of relevance.
  double stop_alpha = 0.0;
  /// Depth at which a correct reasoning step completes the solution.
  int solution_depth = 1;
  std::uint64_t seed = 0;
};

class SimulatedBackend {
 public:
  SimulatedBackend() = default;
  explicit SimulatedBackend(SimulatedProfile profile) : profile_(std::move(profile)) {}

  const SimulatedProfile& profile() const noexcept { return profile_; }

  double success_probability(const Question& q, const MemoryState* memory) const {
    double rel = memory ? relevance(*memory, q, profile_.relevance_weights) : 0.0;
    return std::clamp(profile_.base_success + profile_.memory_gain * rel, 0.0, 1.0);
  }

  double stop_probability(const Question& q, const MemoryState* memory) const {
    double rel = memory ? relevance(*memory, q, profile_.relevance_weights) : 0.0;
    return std::clamp(profile_.base_stop + profile_.stop_alpha * rel, 0.0, 1.0);
  }

  Generation generate(const GenerationRequest& req) const {
    const Question& q = req.question;
    const std::uint64_t nonce = derive_seed(profile_.seed, req.seed, req.mode.index());
    SplitMix64 rng(nonce);
    const double p = success_probability(q, req.memory);

    auto finish = [](std::string text) {
      auto tokens = static_cast<std::int64_t>(1 + text.size() / 4);
      return Generation{std::move(text), tokens, true};
    };

    return std::visit(
        [&](const auto& m) -> Generation {
          using M = std::decay_t<decltype(m)>;
          if constexpr (std::is_same_v<M, mode::FullAnswer> ||
                        std::is_same_v<M, mode::Refinement>) {
            bool ok = rng.uniform() < p;
            std::string text = std::is_same_v<M, mode::Refinement> ? "Revised solution for "
                                                                   : "Solution for ";
            text += q.id + ".\nAnswer: " + answer_text(q, ok, nonce) + "\n" +
                    marker(ok ? kOk : kFail, nonce);
            return finish(std::move(text));
          } else if constexpr (std::is_same_v<M, mode::TreeStep>) {
            bool ok = rng.uniform() < p;
            bool done = ok && m.depth >= profile_.solution_depth;
            std::string text = "Step " + std::to_string(m.depth) + " toward " + q.id + ".\n";
            if (done) {
              text += "Answer: " + answer_text(q, true, nonce) + "\n" +
                      std::string(kEndOfAnswerMarker) + "\n" + marker(kDone, nonce);
            } else {
              text += marker(ok ? kOk : kFail, nonce);
            }
            return finish(std::move(text));
          } else if constexpr (std::is_same_v<M, mode::Feedback>) {
            auto status = last_marker(m.answer);
            bool clean = status && status->kind != kFail;
            return finish(clean ? std::string(kNoErrorMarker) + "."
                                : std::string("The final step is wrong; recompute it."));
          } else if constexpr (std::is_same_v<M, mode::CotContinuation>) {
            bool stop = rng.uniform() < stop_probability(q, req.memory);
            Generation g;
            g.tokens = std::max<std::int64_t>(1, m.chunk_tokens);
            g.finished = stop;
            if (stop) {
              bool ok = rng.uniform() < p;
              g.content = std::string(kThinkEndMarker) + "\nAnswer: " + answer_text(q, ok, nonce) +
                          "\n" + marker(ok ? kOk : kFail, nonce);
            } else {
              g.content = "Wait, let me keep checking. ";
            }
            return g;
          } else {
            return finish("- Restate what is given and what is asked before computing.\n"
                          "- Verify the result against the question (" + q.backbone_id +
                          ").\nEnd of answer.");
          }
        },
        req.mode);
  }

  double score(const Question&, std::string_view content) const {
    if (content.empty()) throw ContractError("cannot score empty content");
    auto status = last_marker(content);
    if (!status) return 0.0;
    if (status->kind == kDone) return 1.0;
    SplitMix64 rng(derive_seed(profile_.seed, "score", status->nonce));
    const auto& dist =
        status->kind == kOk ? profile_.score_given_success : profile_.score_given_failure;
    return std::clamp(dist.sample(rng), 0.0, 1.0);
  }

  FineTuneStatus fine_tune(std::span<const FineTuneExample>) const {
    // Parametric state is the SftLedger carried in MemoryState; relevance()
    // reads it on every later request.
    return FineTuneStatus::applied;
  }

  bool checkpointed_cot() const noexcept { return true; }

 private:
  static constexpr char kOk = 'o';
  static constexpr char kFail = 'f';
  static constexpr char kDone = 'd';

  struct Marker {
    char kind;
    std::uint64_t nonce;
  };

  static std::string marker(char kind, std::uint64_t nonce) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "[sim %s %016llx]",
                  kind == kOk ? "ok" : kind == kFail ? "fail" : "done",
                  static_cast<unsigned long long>(nonce));
    return buf;
  }

  static std::optional<Marker> last_marker(std::string_view text) {
    auto pos = text.rfind("[sim ");
    if (pos == std::string_view::npos) return std::nullopt;
    auto rest = text.substr(pos + 5);
    char kind = 0;
    if (rest.starts_with("ok ")) {
      kind = kOk;
      rest.remove_prefix(3);
    } else if (rest.starts_with("fail ")) {
      kind = kFail;
      rest.remove_prefix(5);
    } else if (rest.starts_with("done ")) {
      kind = kDone;
      rest.remove_prefix(5);
    } else {
      return std::nullopt;
    }
    if (rest.size() < 17 || rest[16] != ']') return std::nullopt;
    std::uint64_t nonce = 0;
    for (char c : rest.substr(0, 16)) {
      int v = (c >= '0' && c <= '9') ? c - '0' : (c >= 'a' && c <= 'f') ? c - 'a' + 10 : -1;
      if (v < 0) return std::nullopt;
      nonce = (nonce << 4) | static_cast<std::uint64_t>(v);
    }
    return Marker{kind, nonce};
  }

  static std::string answer_text(const Question& q, bool ok, std::uint64_t nonce) {
    if (ok) return q.reference_answer.value_or("sim-" + q.id);
    return "wrong-" + std::to_string(nonce % 100000);
  }

  SimulatedProfile profile_;
};

static_assert(ModelBackend<SimulatedBackend>);

}  // namespace ttc
