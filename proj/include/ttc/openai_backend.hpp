#pragma once

// Backend speaking the OpenAI-compatible chat-completions protocol:
//   POST {base_url}/v1/chat/completions
//   {model, messages:[{role, content}], temperature, top_p, max_tokens}
// Reads choices[0].message.content and usage.completion_tokens. Scoring uses
// the same protocol against a judge model that answers with a bare number.
//
// No retries here: errors propagate and the harness decides what to do.

#include <cstdint>
#include <algorithm>
#include <cstdlib>
#include <optional>
#include <regex>
#include <span>
#include <string>
#include <string_view>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "ttc/backend.hpp"

namespace ttc {

struct OpenAiConfig {
  std::string base_url = "http://127.0.0.1:8000";
  std::string model = "default";
  std::string judge_model = "default";
  /// Bearer token; empty means no Authorization header.
  std::string api_key;
  int connect_timeout_s = 10;
  int read_timeout_s = 600;

  /// Fills api_key from TTC_API_KEY when set.
  static OpenAiConfig from_env(OpenAiConfig base);
};

inline OpenAiConfig OpenAiConfig::from_env(OpenAiConfig base) {
  if (const char* key = std::getenv("TTC_API_KEY")) base.api_key = key;
  return base;
}

/// First real number in a judge reply, clamped to [0, 1].
inline std::optional<double> parse_judge_grade(std::string_view reply) {
  static const std::regex number(R"([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)");
  std::match_results<std::string_view::const_iterator> m;
  if (!std::regex_search(reply.begin(), reply.end(), m, number)) return std::nullopt;
  double v = std::strtod(m.str(0).c_str(), nullptr);
  return std::clamp(v, 0.0, 1.0);
}

class OpenAiBackend {
 public:
  explicit OpenAiBackend(OpenAiConfig config) : config_(std::move(config)) {}

  const OpenAiConfig& config() const noexcept { return config_; }

  Generation generate(const GenerationRequest& req) const {
    nlohmann::json messages = nlohmann::json::array();
    messages.push_back({{"role", "system"},
                        {"content", "You are a careful, rigorous problem solver."}});
    std::int64_t max_tokens = req.params.max_tokens;

    std::visit(
        [&](const auto& m) {
          using M = std::decay_t<decltype(m)>;
          std::string task = req.memory_prompt.empty() ? "" : req.memory_prompt + "\n";
          task += "Question: " + req.question.text + "\n";
          if constexpr (std::is_same_v<M, mode::FullAnswer>) {
            task += "Solve it step by step. Finish with a line \"Answer: <final answer>\".";
          } else if constexpr (std::is_same_v<M, mode::TreeStep>) {
            task += "Reasoning so far:\n" + (m.parent_path.empty() ? "(none)" : m.parent_path) +
                    "\nWrite only the next reasoning step. If it completes the solution, add a "
                    "line \"Answer: <final answer>\" followed by a line \"" +
                    std::string(kEndOfAnswerMarker) + "\".";
          } else if constexpr (std::is_same_v<M, mode::Feedback>) {
            task += "Proposed solution:\n" + m.answer +
                    "\nReview it carefully. If it is entirely correct reply exactly \"" +
                    std::string(kNoErrorMarker) + "\". Otherwise describe the error.";
          } else if constexpr (std::is_same_v<M, mode::Refinement>) {
            task += "Previous solution:\n" + m.prior_answer + "\nFeedback:\n" + m.feedback +
                    "\nWrite an improved solution. Finish with a line \"Answer: <final answer>\".";
          } else if constexpr (std::is_same_v<M, mode::CotContinuation>) {
            task += "Think inside <think> ... </think>, then finish with a line "
                    "\"Answer: <final answer>\".";
            max_tokens = m.chunk_tokens;
          } else {
            task = m.prompt;
          }
          messages.push_back({{"role", "user"}, {"content", task}});
          if constexpr (std::is_same_v<M, mode::CotContinuation>) {
            if (!m.prefix.empty()) {
              messages.push_back({{"role", "assistant"}, {"content", m.prefix}});
              messages.push_back({{"role", "user"}, {"content", "Continue."}});
            }
          }
        },
        req.mode);

    auto reply = chat(config_.model, messages, req.params.temperature, req.params.top_p,
                      max_tokens);
    return reply;
  }

  double score(const Question& q, std::string_view content) const {
    if (content.empty()) throw ContractError("cannot score empty content");
    nlohmann::json messages = nlohmann::json::array();
    messages.push_back(
        {{"role", "user"},
         {"content", "Grade the following solution for correctness and quality on a scale "
                     "from 0 to 1. Reply with a single number only.\n\nQuestion: " +
                         q.text + "\n\nSolution:\n" + std::string(content)}});
    auto reply = chat(config_.judge_model, messages, 0.0, 1.0, 16);
    auto grade = parse_judge_grade(reply.content);
    if (!grade) throw BackendError("unscorable judge reply: " + reply.content);
    return *grade;
  }

  FineTuneStatus fine_tune(std::span<const FineTuneExample>) const {
    return FineTuneStatus::unsupported;
  }

  bool checkpointed_cot() const noexcept { return false; }

 private:
  Generation chat(const std::string& model, const nlohmann::json& messages, double temperature,
                  double top_p, std::int64_t max_tokens) const {
    nlohmann::json body{{"model", model},
                        {"messages", messages},
                        {"temperature", temperature},
                        {"top_p", top_p},
                        {"max_tokens", max_tokens}};

    // base_url may carry a path prefix: "https://host/proxy" -> "/proxy/v1/...".
    std::string origin = config_.base_url;
    std::string prefix;
    auto scheme_end = origin.find("://");
    auto path_start = origin.find('/', scheme_end == std::string::npos ? 0 : scheme_end + 3);
    if (path_start != std::string::npos) {
      prefix = origin.substr(path_start);
      origin.resize(path_start);
    }
    while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();

    httplib::Client client(origin);
    client.set_connection_timeout(config_.connect_timeout_s);
    client.set_read_timeout(config_.read_timeout_s);
    httplib::Headers headers;
    if (!config_.api_key.empty())
      headers.emplace("Authorization", "Bearer " + config_.api_key);

    auto res = client.Post(prefix + "/v1/chat/completions", headers, body.dump(),
                           "application/json");
    if (!res) throw BackendError("transport failure: " + httplib::to_string(res.error()));
    if (res->status < 200 || res->status >= 300)
      throw BackendError("http status " + std::to_string(res->status) + ": " + res->body);

    auto j = nlohmann::json::parse(res->body, nullptr, false);
    if (j.is_discarded()) throw BackendError("malformed response body: " + res->body);
    try {
      const auto& choice = j.at("choices").at(0);
      Generation g;
      g.content = choice.at("message").at("content").get<std::string>();
      if (j.contains("usage") && j["usage"].is_object() &&
          j["usage"].contains("completion_tokens"))
        g.tokens = j["usage"]["completion_tokens"].get<std::int64_t>();
      g.finished = choice.value("finish_reason", std::string("stop")) != "length";
      return g;
    } catch (const nlohmann::json::exception& e) {
      throw BackendError(std::string("malformed response body: ") + e.what());
    }
  }

  OpenAiConfig config_;
};

static_assert(ModelBackend<OpenAiBackend>);

}  // namespace ttc
