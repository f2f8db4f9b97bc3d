#pragma once

// Memory state for the six memory methods, its prompt rendering, the three
// reflection prompt templates, and the versioned JSON snapshot format.

#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "ttc/core.hpp"

namespace ttc {

enum class MemoryMethod { none, sft, in_context, reflect, multi_case_reflect, reflect_update };

inline constexpr MemoryMethod kAllMemoryMethods[] = {
    MemoryMethod::none,    MemoryMethod::sft,
    MemoryMethod::in_context, MemoryMethod::reflect,
    MemoryMethod::multi_case_reflect, MemoryMethod::reflect_update};

constexpr std::string_view to_string(MemoryMethod m) noexcept {
  switch (m) {
    case MemoryMethod::none: return "none";
    case MemoryMethod::sft: return "sft";
    case MemoryMethod::in_context: return "in_context";
    case MemoryMethod::reflect: return "reflect";
    case MemoryMethod::multi_case_reflect: return "multi_case_reflect";
    case MemoryMethod::reflect_update: return "reflect_update";
  }
  return "?";
}

inline std::optional<MemoryMethod> parse_memory_method(std::string_view s) noexcept {
  for (auto m : kAllMemoryMethods) {
    if (s == to_string(m)) return m;
  }
  return std::nullopt;
}

/// Bounded buffers (in-context examples, stored reflections, multi-case
/// inputs) hold at most this many items.
inline constexpr std::size_t kMemoryCapacity = 3;

/// Where a stored item came from; used to decide relevance to a new question.
struct MemorySource {
  std::string backbone_id;
  std::optional<std::string> knowledge_tag;
  bool operator==(const MemorySource&) const = default;
};

/// A solved question kept verbatim.
struct MemoryCase {
  std::string question;
  std::string answer;
  MemorySource source;
  bool operator==(const MemoryCase&) const = default;
};

struct Reflection {
  std::string text;
  std::vector<MemorySource> sources;
  bool operator==(const Reflection&) const = default;
};

struct NoMemory {
  bool operator==(const NoMemory&) const = default;
};

/// In-context demonstrations, FIFO, capacity kMemoryCapacity.
struct EpisodicBuffer {
  std::vector<MemoryCase> entries;
  bool operator==(const EpisodicBuffer&) const = default;
};

/// One reflection per solved question, FIFO, capacity kMemoryCapacity.
struct ReflectionList {
  std::vector<Reflection> items;
  bool operator==(const ReflectionList&) const = default;
};

/// Multi-case reflection: the last kMemoryCapacity cases are kept as inputs
/// for the next joint reflection; only the joint reflection is rendered.
struct JointReflection {
  std::vector<MemoryCase> cases;
  std::optional<Reflection> reflection;
  bool operator==(const JointReflection&) const = default;
};

/// A single running reflection, rewritten after every qualifying answer.
struct RunningReflection {
  std::optional<std::string> text;
  std::vector<MemorySource> sources;
  std::size_t source_count() const noexcept { return sources.size(); }
  bool operator==(const RunningReflection&) const = default;
};

/// Append-only record of fine-tuning examples applied to the model.
struct SftLedger {
  std::vector<MemoryCase> applied;
  bool operator==(const SftLedger&) const = default;
};

using MemoryPayload = std::variant<NoMemory, EpisodicBuffer, ReflectionList, JointReflection,
                                   RunningReflection, SftLedger>;

/// Accumulated experience for one question sequence. Value type: updates
/// produce a new state.
struct MemoryState {
  MemoryMethod method = MemoryMethod::none;
  MemoryPayload payload = NoMemory{};

  static MemoryState empty(MemoryMethod method) {
    switch (method) {
      case MemoryMethod::none: return {method, NoMemory{}};
      case MemoryMethod::sft: return {method, SftLedger{}};
      case MemoryMethod::in_context: return {method, EpisodicBuffer{}};
      case MemoryMethod::reflect: return {method, ReflectionList{}};
      case MemoryMethod::multi_case_reflect: return {method, JointReflection{}};
      case MemoryMethod::reflect_update: return {method, RunningReflection{}};
    }
    throw ContractError("unknown memory method");
  }

  /// Every source currently influencing the model, one per stored case.
  std::vector<MemorySource> sources() const {
    std::vector<MemorySource> out;
    std::visit(
        [&](const auto& p) {
          using T = std::decay_t<decltype(p)>;
          if constexpr (std::is_same_v<T, EpisodicBuffer>) {
            for (const auto& c : p.entries) out.push_back(c.source);
          } else if constexpr (std::is_same_v<T, ReflectionList>) {
            for (const auto& r : p.items) out.insert(out.end(), r.sources.begin(), r.sources.end());
          } else if constexpr (std::is_same_v<T, JointReflection>) {
            if (p.reflection) out = p.reflection->sources;
          } else if constexpr (std::is_same_v<T, RunningReflection>) {
            out = p.sources;
          } else if constexpr (std::is_same_v<T, SftLedger>) {
            for (const auto& c : p.applied) out.push_back(c.source);
          }
        },
        payload);
    return out;
  }

  bool operator==(const MemoryState&) const = default;
};

/// Renders memory into the prompt segment prepended to a request.
inline std::string render(const MemoryState& memory) {
  auto consider = [](const std::vector<std::string_view>& texts) {
    if (texts.empty()) return std::string{};
    std::string out = "Consider:\n";
    for (auto t : texts) {
      out.append(t);
      if (out.back() != '\n') out.push_back('\n');
    }
    return out;
  };

  return std::visit(
      [&](const auto& p) -> std::string {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, EpisodicBuffer>) {
          std::string out;
          for (const auto& c : p.entries) {
            if (out.empty()) out = "Here are examples of solved questions:\n";
            out += "\nQuestion: " + c.question + "\nSolution: " + c.answer + "\n";
          }
          return out;
        } else if constexpr (std::is_same_v<T, ReflectionList>) {
          std::vector<std::string_view> texts;
          for (const auto& r : p.items) texts.push_back(r.text);
          return consider(texts);
        } else if constexpr (std::is_same_v<T, JointReflection>) {
          if (!p.reflection) return {};
          return consider({p.reflection->text});
        } else if constexpr (std::is_same_v<T, RunningReflection>) {
          if (!p.text) return {};
          return consider({*p.text});
        } else {
          // NoMemory, and SftLedger whose effect lives in the model itself.
          return {};
        }
      },
      memory.payload);
}

struct ReflectionPrompts {
  std::string single_case;
  std::string multi_case;
  std::string update;
};

inline const ReflectionPrompts& reflection_prompts() {
  static const ReflectionPrompts prompts{
      "You solved the following question correctly.\n\n"
      "Question: {question}\n\nSolution: {answer}\n\n"
      "Reflect on the reasoning. Write a short bullet list of generalizable takeaways, "
      "one per line starting with \"- \", that would help solve related questions. "
      "Finish with the line:\nEnd of answer.",

      "You solved the following questions correctly.\n\n{cases}\n\n"
      "Write one joint reflection across all of these cases: a short bullet list of "
      "generalizable takeaways, one per line starting with \"- \". "
      "Finish with the line:\nEnd of answer.",

      "Your current reflection on solving questions of this kind is:\n{previous_reflection}\n\n"
      "You have just solved another question correctly.\n\n"
      "Question: {question}\n\nSolution: {answer}\n\n"
      "Rewrite the reflection so it incorporates what this case teaches. Keep it a short "
      "bullet list of generalizable takeaways, one per line starting with \"- \". "
      "Finish with the line:\nEnd of answer.",
  };
  return prompts;
}

/// Replaces every "{name}" placeholder with its value.
inline std::string fill_template(
    std::string text, std::initializer_list<std::pair<std::string_view, std::string_view>> values) {
  for (const auto& [name, value] : values) {
    std::string key = "{" + std::string(name) + "}";
    for (auto pos = text.find(key); pos != std::string::npos;
         pos = text.find(key, pos + value.size())) {
      text.replace(pos, key.size(), value);
    }
  }
  return text;
}

// ---------------------------------------------------------------------------
// Snapshot format: {"version": 1, "method": "<name>", "payload": {...}}

inline constexpr int kMemorySnapshotVersion = 1;

namespace detail {

inline nlohmann::json source_json(const MemorySource& s) {
  nlohmann::json j{{"backbone_id", s.backbone_id}};
  j["knowledge_tag"] = s.knowledge_tag ? nlohmann::json(*s.knowledge_tag) : nlohmann::json();
  return j;
}

inline MemorySource source_from(const nlohmann::json& j) {
  MemorySource s{j.at("backbone_id").get<std::string>(), std::nullopt};
  if (j.contains("knowledge_tag") && !j["knowledge_tag"].is_null())
    s.knowledge_tag = j["knowledge_tag"].get<std::string>();
  return s;
}

inline nlohmann::json case_json(const MemoryCase& c) {
  return {{"question", c.question}, {"answer", c.answer}, {"source", source_json(c.source)}};
}

inline MemoryCase case_from(const nlohmann::json& j) {
  return {j.at("question").get<std::string>(), j.at("answer").get<std::string>(),
          source_from(j.at("source"))};
}

inline nlohmann::json sources_json(const std::vector<MemorySource>& v) {
  auto arr = nlohmann::json::array();
  for (const auto& s : v) arr.push_back(source_json(s));
  return arr;
}

inline std::vector<MemorySource> sources_from(const nlohmann::json& j) {
  std::vector<MemorySource> out;
  for (const auto& s : j) out.push_back(source_from(s));
  return out;
}

inline nlohmann::json cases_json(const std::vector<MemoryCase>& v) {
  auto arr = nlohmann::json::array();
  for (const auto& c : v) arr.push_back(case_json(c));
  return arr;
}

inline std::vector<MemoryCase> cases_from(const nlohmann::json& j) {
  std::vector<MemoryCase> out;
  for (const auto& c : j) out.push_back(case_from(c));
  return out;
}

inline nlohmann::json reflection_json(const Reflection& r) {
  return {{"text", r.text}, {"sources", sources_json(r.sources)}};
}

inline Reflection reflection_from(const nlohmann::json& j) {
  return {j.at("text").get<std::string>(), sources_from(j.at("sources"))};
}

}  // namespace detail

inline nlohmann::json to_snapshot(const MemoryState& m) {
  using namespace detail;
  nlohmann::json payload = std::visit(
      [](const auto& p) -> nlohmann::json {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, NoMemory>) {
          return nlohmann::json::object();
        } else if constexpr (std::is_same_v<T, EpisodicBuffer>) {
          return {{"entries", cases_json(p.entries)}};
        } else if constexpr (std::is_same_v<T, ReflectionList>) {
          auto arr = nlohmann::json::array();
          for (const auto& r : p.items) arr.push_back(reflection_json(r));
          return {{"items", arr}};
        } else if constexpr (std::is_same_v<T, JointReflection>) {
          return {{"cases", cases_json(p.cases)},
                  {"reflection", p.reflection ? reflection_json(*p.reflection) : nlohmann::json()}};
        } else if constexpr (std::is_same_v<T, RunningReflection>) {
          return {{"text", p.text ? nlohmann::json(*p.text) : nlohmann::json()},
                  {"sources", sources_json(p.sources)}};
        } else {
          return {{"applied", cases_json(p.applied)}};
        }
      },
      m.payload);
  return {{"version", kMemorySnapshotVersion},
          {"method", std::string(to_string(m.method))},
          {"payload", std::move(payload)}};
}

inline MemoryState from_snapshot(const nlohmann::json& j) {
  using namespace detail;
  if (j.value("version", 0) != kMemorySnapshotVersion)
    throw ContractError("unsupported memory snapshot version");
  auto method = parse_memory_method(j.at("method").get<std::string>());
  if (!method) throw ContractError("unknown memory method in snapshot");
  MemoryState m = MemoryState::empty(*method);
  const auto& p = j.at("payload");
  std::visit(
      [&](auto& s) {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, EpisodicBuffer>) {
          s.entries = cases_from(p.at("entries"));
        } else if constexpr (std::is_same_v<T, ReflectionList>) {
          for (const auto& r : p.at("items")) s.items.push_back(reflection_from(r));
        } else if constexpr (std::is_same_v<T, JointReflection>) {
          s.cases = cases_from(p.at("cases"));
          if (!p.at("reflection").is_null()) s.reflection = reflection_from(p["reflection"]);
        } else if constexpr (std::is_same_v<T, RunningReflection>) {
          if (!p.at("text").is_null()) s.text = p["text"].get<std::string>();
          s.sources = sources_from(p.at("sources"));
        } else if constexpr (std::is_same_v<T, SftLedger>) {
          s.applied = cases_from(p.at("applied"));
        }
      },
      m.payload);
  return m;
}

}  // namespace ttc
