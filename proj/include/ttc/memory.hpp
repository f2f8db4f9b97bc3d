#pragma once

// Memory update: the qualifying-answer gate and the per-method update rule.

#include <optional>
#include <string>
#include <utility>

#include "ttc/backend.hpp"
#include "ttc/memory_state.hpp"
#include "ttc/random.hpp"

namespace ttc {

/// A qualifying answer is correct and satisfies the threshold. When
/// correctness is unknown the gate falls back to the threshold alone.
inline bool is_qualifying(const Outcome& outcome) {
  return outcome.satisfied && outcome.correct.value_or(true);
}

struct ReflectionOptions {
  double temperature = 0.7;
  double top_p = 0.9;
  std::int64_t max_tokens = 512;
  std::uint64_t seed = 0;
};

struct MemoryUpdate {
  MemoryState state;
  /// Set when the update was skipped or degraded (reflection failed,
  /// fine-tuning unsupported).
  std::optional<std::string> warning;
  /// The gate ran without a correctness signal.
  bool degraded_gate = false;
  bool changed = false;
};

namespace detail {

template <class T>
void push_bounded(std::vector<T>& items, T item) {
  items.push_back(std::move(item));
  while (items.size() > kMemoryCapacity) items.erase(items.begin());
}

inline std::string format_cases(const std::vector<MemoryCase>& cases) {
  std::string out;
  for (std::size_t i = 0; i < cases.size(); ++i) {
    if (i) out += "\n\n";
    out += "Case " + std::to_string(i + 1) + "\nQuestion: " + cases[i].question +
           "\nSolution: " + cases[i].answer;
  }
  return out;
}

}  // namespace detail

template <ModelBackend Backend>
MemoryUpdate update_memory(const MemoryState& memory, const Question& question,
                           const Outcome& outcome, const Backend& backend,
                           const ReflectionOptions& options = {}) {
  MemoryUpdate result{memory, std::nullopt, !outcome.correct.has_value(), false};
  if (!is_qualifying(outcome)) return result;

  const std::string& answer = outcome.final_answer().content;
  const MemorySource source{question.backbone_id, question.knowledge_tag};
  MemoryCase new_case{question.text, answer, source};

  auto reflect = [&](std::string prompt) {
    GenerationRequest req;
    req.question = question;
    req.mode = mode::Instruction{std::move(prompt)};
    req.params = {options.temperature, options.top_p, options.max_tokens};
    req.seed = derive_seed(options.seed, "reflect", question.id);
    return backend.generate(req).content;
  };

  try {
    MemoryState next = memory;
    std::visit(
        [&](auto& p) {
          using T = std::decay_t<decltype(p)>;
          const auto& prompts = reflection_prompts();
          if constexpr (std::is_same_v<T, EpisodicBuffer>) {
            detail::push_bounded(p.entries, new_case);
          } else if constexpr (std::is_same_v<T, ReflectionList>) {
            auto text = reflect(fill_template(prompts.single_case,
                                              {{"question", question.text}, {"answer", answer}}));
            detail::push_bounded(p.items, Reflection{std::move(text), {source}});
          } else if constexpr (std::is_same_v<T, JointReflection>) {
            auto cases = p.cases;
            detail::push_bounded(cases, new_case);
            auto text =
                reflect(fill_template(prompts.multi_case, {{"cases", detail::format_cases(cases)}}));
            std::vector<MemorySource> sources;
            for (const auto& c : cases) sources.push_back(c.source);
            p.cases = std::move(cases);
            p.reflection = Reflection{std::move(text), std::move(sources)};
          } else if constexpr (std::is_same_v<T, RunningReflection>) {
            auto text = reflect(fill_template(
                prompts.update, {{"previous_reflection", p.text.value_or("(none yet)")},
                                 {"question", question.text},
                                 {"answer", answer}}));
            p.text = std::move(text);
            p.sources.push_back(source);
          } else if constexpr (std::is_same_v<T, SftLedger>) {
            FineTuneExample example{question, answer};
            if (backend.fine_tune(std::span<const FineTuneExample>(&example, 1)) ==
                FineTuneStatus::applied) {
              p.applied.push_back(new_case);
            } else {
              result.warning = "fine-tuning unsupported by backend; ledger unchanged";
            }
          }
        },
        next.payload);
    result.changed = next != memory;
    result.state = std::move(next);
  } catch (const std::exception& e) {
    result.state = memory;
    result.changed = false;
    result.warning = std::string("reflection failed, memory unchanged: ") + e.what();
  }
  return result;
}

}  // namespace ttc
