#pragma once

// Flat key = value run configuration.
//
//   # comment
//   strategies = best_of_n, dfs
//   n_generate_sample = 5
//   sim.memory_gain = 0.4
//
// Keys are listed in config_keys(). Unknown keys and unparsable values are
// errors. Keys that mirror well-known sampling flags (n_generate_sample,
// method_evaluate, value_thresh, num_iteration, max_depth, max_node) use
// those names; the plain StrategyConfig names are accepted as aliases.
// effective_config() prints every key, so a manifest records the complete
// configuration that ran.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <system_error>
#include <utility>
#include <vector>

#include "ttc/error.hpp"
#include "ttc/harness.hpp"
#include "ttc/openai_backend.hpp"
#include "ttc/simulated_backend.hpp"

namespace ttc {

struct RunSettings {
  std::vector<StrategyKind> strategies{StrategyKind::best_of_n};
  /// Parameters shared by every strategy; `kind` is ignored.
  StrategyConfig strategy;
  std::vector<MemoryMethod> memory_methods{MemoryMethod::none, MemoryMethod::in_context};
  std::vector<SimilarityLevel> similarity_levels{SimilarityLevel::S1};
  int repetitions = 4;
  int question_sets = 10;
  int questions_per_set = 0;
  std::uint64_t seed = 0;
  ReflectionOptions reflection;
  std::string corpus;
  std::string backend = "simulated";
  SimulatedProfile sim;
  OpenAiConfig openai;

  ExperimentConfig experiment() const {
    ExperimentConfig c;
    c.strategies.clear();
    for (auto k : strategies) {
      StrategyConfig s = strategy;
      s.kind = k;
      c.strategies.push_back(s);
    }
    c.memory_methods = memory_methods;
    c.similarity_levels = similarity_levels;
    c.repetitions = repetitions;
    c.question_sets = question_sets;
    c.questions_per_set = questions_per_set;
    c.seed = seed;
    c.reflection = reflection;
    return c;
  }
};

namespace config_detail {

inline std::string trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

template <class T>
T parse_number(const std::string& key, const std::string& v) {
  T out{};
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size())
    throw ConfigError(key + ": not a number: '" + v + "'");
  return out;
}

inline double parse_real(const std::string& key, const std::string& v) {
  double d = parse_number<double>(key, v);
  if (!std::isfinite(d)) throw ConfigError(key + ": not a finite number");
  return d;
}

inline bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError(key + ": expected true or false, got '" + v + "'");
}

template <class T, class Parse>
std::vector<T> parse_list(const std::string& key, const std::string& v, Parse parse) {
  std::vector<T> out;
  std::size_t pos = 0;
  while (pos <= v.size()) {
    auto end = v.find(',', pos);
    if (end == std::string::npos) end = v.size();
    auto item = trim(std::string_view(v).substr(pos, end - pos));
    pos = end + 1;
    if (item.empty()) continue;
    auto parsed = parse(item);
    if (!parsed) throw ConfigError(key + ": unknown value '" + item + "'");
    out.push_back(*parsed);
  }
  if (out.empty()) throw ConfigError(key + ": empty list");
  return out;
}

template <class T>
std::string join(const std::vector<T>& items) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) out += ",";
    out += to_string(items[i]);
  }
  return out;
}

/// Shortest text that parses back to the same double.
inline std::string real_text(double v) {
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, p);
}

}  // namespace config_detail

struct ConfigKey {
  std::string name;
  std::vector<std::string> aliases;
  std::string help;
  std::function<void(RunSettings&, const std::string&)> set;
  std::function<std::string(const RunSettings&)> get;
};

inline const std::vector<ConfigKey>& config_keys() {
  using namespace config_detail;
  static const std::vector<ConfigKey> keys = [] {
    std::vector<ConfigKey> k;
    // Accessors take a mutable reference; getters only read through it.
    auto add = [&k](std::string name, std::vector<std::string> aliases, std::string help,
                    std::function<void(RunSettings&, const std::string&)> set,
                    std::function<std::string(const RunSettings&)> get) {
      k.push_back({std::move(name), std::move(aliases), std::move(help), std::move(set),
                   std::move(get)});
    };
    auto add_int = [&add](std::string name, std::vector<std::string> aliases, std::string help,
                          auto access) {
      add(
          name, std::move(aliases), std::move(help),
          [access, name](RunSettings& s, const std::string& v) {
            auto& ref = access(s);
            ref = parse_number<std::remove_reference_t<decltype(ref)>>(name, v);
          },
          [access](const RunSettings& s) {
            return std::to_string(access(const_cast<RunSettings&>(s)));
          });
    };
    auto add_real = [&add](std::string name, std::vector<std::string> aliases, std::string help,
                           auto access) {
      add(
          name, std::move(aliases), std::move(help),
          [access, name](RunSettings& s, const std::string& v) { access(s) = parse_real(name, v); },
          [access](const RunSettings& s) {
            return real_text(access(const_cast<RunSettings&>(s)));
          });
    };
    auto add_text = [&add](std::string name, std::string help, auto access) {
      add(
          name, {}, std::move(help),
          [access](RunSettings& s, const std::string& v) { access(s) = v; },
          [access](const RunSettings& s) { return access(const_cast<RunSettings&>(s)); });
    };

    // Experiment grid.
    add("strategies", {}, "comma list of best_of_n, dfs, self_refine, long_cot",
        [](RunSettings& s, const std::string& v) {
          s.strategies = parse_list<StrategyKind>("strategies", v, parse_strategy_kind);
        },
        [](const RunSettings& s) { return join(s.strategies); });
    add("memory_methods", {}, "comma list; must include none (the baseline)",
        [](RunSettings& s, const std::string& v) {
          s.memory_methods = parse_list<MemoryMethod>("memory_methods", v, parse_memory_method);
        },
        [](const RunSettings& s) { return join(s.memory_methods); });
    add("similarity_levels", {}, "comma list of S1..S4",
        [](RunSettings& s, const std::string& v) {
          s.similarity_levels = parse_list<SimilarityLevel>("similarity_levels", v, parse_similarity);
        },
        [](const RunSettings& s) { return join(s.similarity_levels); });
    add_int("repetitions", {}, "runs per question set", [](RunSettings& s) -> auto& { return s.repetitions; });
    add_int("question_sets", {}, "sets per similarity level", [](RunSettings& s) -> auto& { return s.question_sets; });
    add_int("questions_per_set", {}, "prefix length per set; 0 = all",
            [](RunSettings& s) -> auto& { return s.questions_per_set; });
    add_int("seed", {}, "master seed", [](RunSettings& s) -> auto& { return s.seed; });
    add_text("corpus", "path of the JSONL corpus", [](RunSettings& s) -> auto& { return s.corpus; });
    add("backend", {}, "simulated or openai",
        [](RunSettings& s, const std::string& v) {
          if (v != "simulated" && v != "openai")
            throw ConfigError("backend: expected simulated or openai, got '" + v + "'");
          s.backend = v;
        },
        [](const RunSettings& s) { return s.backend; });

    // Strategy parameters.
    add_real("value_thresh", {"tau"}, "satisfying-score threshold in (0,1)",
             [](RunSettings& s) -> auto& { return s.strategy.tau; });
    add_int("n_generate_sample", {"n_max"}, "Best-of-N candidate cap",
            [](RunSettings& s) -> auto& { return s.strategy.n_max; });
    add_int("max_depth", {}, "DFS depth cap", [](RunSettings& s) -> auto& { return s.strategy.max_depth; });
    add_int("max_node", {}, "DFS node cap", [](RunSettings& s) -> auto& { return s.strategy.max_node; });
    add_int("branching", {}, "DFS children per expansion",
            [](RunSettings& s) -> auto& { return s.strategy.branching; });
    add_real("prune_ratio", {}, "DFS sibling pruning ratio in [0,1]",
             [](RunSettings& s) -> auto& { return s.strategy.prune_ratio; });
    add_int("num_iteration", {"max_iterations"}, "Self-Refine refinement cap",
            [](RunSettings& s) -> auto& { return s.strategy.max_iterations; });
    add_int("max_tokens", {}, "Long CoT token cap", [](RunSettings& s) -> auto& { return s.strategy.max_tokens; });
    add_int("cot_checkpoint", {}, "Long CoT tokens per checkpoint",
            [](RunSettings& s) -> auto& { return s.strategy.cot_checkpoint; });
    add_int("batch_size", {}, "Best-of-N candidates per batch",
            [](RunSettings& s) -> auto& { return s.strategy.batch_size; });
    add("adaptive", {}, "stop early on a satisfying answer (Best-of-N)",
        [](RunSettings& s, const std::string& v) { s.strategy.adaptive = parse_bool("adaptive", v); },
        [](const RunSettings& s) { return std::string(s.strategy.adaptive ? "true" : "false"); });
    add_real("temperature", {}, "sampling temperature",
             [](RunSettings& s) -> auto& { return s.strategy.sampling.temperature; });
    add_real("top_p", {}, "nucleus sampling mass", [](RunSettings& s) -> auto& { return s.strategy.sampling.top_p; });
    add_text("method_evaluate", "scoring model name (openai backend judge)",
             [](RunSettings& s) -> auto& { return s.openai.judge_model; });

    // Reflection generation.
    add_int("reflection.max_tokens", {}, "reflection length cap",
            [](RunSettings& s) -> auto& { return s.reflection.max_tokens; });
    add_real("reflection.temperature", {}, "reflection temperature",
             [](RunSettings& s) -> auto& { return s.reflection.temperature; });
    add_real("reflection.top_p", {}, "reflection nucleus mass",
             [](RunSettings& s) -> auto& { return s.reflection.top_p; });

    // Simulated backend.
    add_real("sim.base_success", {}, "success probability with no relevant memory",
             [](RunSettings& s) -> auto& { return s.sim.base_success; });
    add_real("sim.memory_gain", {}, "success gain per unit of relevance",
             [](RunSettings& s) -> auto& { return s.sim.memory_gain; });
    add_real("sim.base_stop", {}, "Long CoT stop probability per checkpoint",
             [](RunSettings& s) -> auto& { return s.sim.base_stop; });
    add_real("sim.stop_alpha", {}, "stop probability gain per unit of relevance",
             [](RunSettings& s) -> auto& { return s.sim.stop_alpha; });
    add_int("sim.solution_depth", {}, "DFS depth of a complete solution",
            [](RunSettings& s) -> auto& { return s.sim.solution_depth; });
    add_int("sim.seed", {}, "profile seed", [](RunSettings& s) -> auto& { return s.sim.seed; });
    for (auto level : kAllSimilarityLevels) {
      add_real("sim.weight." + std::string(to_string(level)), {}, "relevance weight",
               [level](RunSettings& s) -> auto& { return s.sim.relevance_weights[level]; });
    }
    add_real("sim.success_score_lo", {}, "", [](RunSettings& s) -> auto& { return s.sim.score_given_success.lo; });
    add_real("sim.success_score_hi", {}, "", [](RunSettings& s) -> auto& { return s.sim.score_given_success.hi; });
    add_real("sim.failure_score_lo", {}, "", [](RunSettings& s) -> auto& { return s.sim.score_given_failure.lo; });
    add_real("sim.failure_score_hi", {}, "", [](RunSettings& s) -> auto& { return s.sim.score_given_failure.hi; });

    // Wire backend. The API key comes from TTC_API_KEY only.
    add_text("openai.base_url", "server origin, optionally with a path prefix",
             [](RunSettings& s) -> auto& { return s.openai.base_url; });
    add_text("openai.model", "generation model name", [](RunSettings& s) -> auto& { return s.openai.model; });
    add_int("openai.connect_timeout_s", {}, "", [](RunSettings& s) -> auto& { return s.openai.connect_timeout_s; });
    add_int("openai.read_timeout_s", {}, "", [](RunSettings& s) -> auto& { return s.openai.read_timeout_s; });
    return k;
  }();
  return keys;
}

inline const ConfigKey* find_config_key(std::string_view name) {
  for (const auto& k : config_keys()) {
    if (k.name == name) return &k;
    if (std::find(k.aliases.begin(), k.aliases.end(), name) != k.aliases.end()) return &k;
  }
  return nullptr;
}

inline void apply_setting(RunSettings& s, std::string_view key, const std::string& value) {
  const auto* k = find_config_key(key);
  if (!k) throw ConfigError("unknown configuration key '" + std::string(key) + "'");
  k->set(s, value);
}

/// Parses the flat format into (line, key, value) entries.
struct ConfigEntry {
  std::size_t line = 0;
  std::string key;
  std::string value;
};

inline std::vector<ConfigEntry> parse_flat_config(std::string_view text) {
  std::vector<ConfigEntry> out;
  std::size_t pos = 0, line_no = 0;
  while (pos < text.size()) {
    auto end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    auto raw = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    auto hash = raw.find('#');
    if (hash != std::string_view::npos) raw = raw.substr(0, hash);
    auto line = config_detail::trim(raw);
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(line_no) + ": expected key = value");
    ConfigEntry e{line_no, config_detail::trim(std::string_view(line).substr(0, eq)),
                  config_detail::trim(std::string_view(line).substr(eq + 1))};
    if (e.key.empty()) throw ConfigError("line " + std::to_string(line_no) + ": empty key");
    out.push_back(std::move(e));
  }
  return out;
}

/// Applies file entries in order; errors name the line.
inline void apply_config_text(RunSettings& s, std::string_view text) {
  for (const auto& e : parse_flat_config(text)) {
    try {
      apply_setting(s, e.key, e.value);
    } catch (const ConfigError& err) {
      throw ConfigError("line " + std::to_string(e.line) + ": " + err.what());
    }
  }
}

/// Every key with its current value, under canonical names.
inline std::map<std::string, std::string> effective_config(const RunSettings& s) {
  std::map<std::string, std::string> out;
  for (const auto& k : config_keys()) out[k.name] = k.get(s);
  return out;
}

inline std::string render_config(const std::map<std::string, std::string>& effective) {
  std::string out;
  for (const auto& [k, v] : effective) out += k + " = " + v + "\n";
  return out;
}

inline SimulatedProfile validated_profile(const RunSettings& s) {
  const auto& p = s.sim;
  auto unit = [](double v) { return v >= 0.0 && v <= 1.0; };
  if (!unit(p.base_success) || !unit(p.base_stop))
    throw ConfigError("sim.base_success and sim.base_stop must lie in [0,1]");
  if (p.solution_depth < 1) throw ConfigError("sim.solution_depth must be at least 1");
  for (const auto* d : {&p.score_given_success, &p.score_given_failure})
    if (!unit(d->lo) || !unit(d->hi) || d->lo > d->hi)
      throw ConfigError("score ranges must satisfy 0 <= lo <= hi <= 1");
  return p;
}

}  // namespace ttc
