// ttc: experiment runner, theory checks and aggregate export.
//
// Exit codes: 0 success; 1 configuration, corpus, resume or input error, or
// a failed theory check; 2 when backend failures abort more than half of the
// grid's cells.

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "ttc/config.hpp"
#include "ttc/harness.hpp"
#include "ttc/openai_backend.hpp"
#include "ttc/persistence.hpp"
#include "ttc/simulated_backend.hpp"
#include "ttc/theory.hpp"

namespace fs = std::filesystem;
using namespace ttc;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitAborted = 2;

void fail(const std::string& msg) { std::cerr << "ttc: " << msg << "\n"; }

// ------------------------------------------------------------------ run

struct RunArgs {
  std::string config;
  std::string out = "out";
  bool resume = false;
  std::size_t stop_after_units = 0;
  int workers = 0;
  std::vector<std::string> sets;
  /// Named flag overrides, keyed by canonical config key.
  std::map<std::string, std::string> flags;
  std::map<std::string, CLI::Option*> flag_options;
};

RunSettings settle(const RunArgs& a) {
  RunSettings s;
  if (!a.config.empty()) {
    std::string text;
    try {
      text = read_file(a.config);
    } catch (const Error& e) {
      throw ConfigError(e.what());
    }
    try {
      apply_config_text(s, text);
    } catch (const ConfigError& e) {
      throw ConfigError(a.config + ": " + e.what());
    }
  }
  for (const auto& kv : a.sets) {
    auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
    apply_setting(s, config_detail::trim(kv.substr(0, eq)), config_detail::trim(kv.substr(eq + 1)));
  }
  for (const auto& [key, opt] : a.flag_options)
    if (opt->count() > 0) apply_setting(s, key, a.flags.at(key));
  return s;
}

using AnyBackend = std::variant<SimulatedBackend, OpenAiBackend>;

AnyBackend make_backend(const RunSettings& s) {
  if (s.backend == "openai") return OpenAiBackend(OpenAiConfig::from_env(s.openai));
  return SimulatedBackend(validated_profile(s));
}

void write_text(const fs::path& path, const std::string& text) { write_atomically(path, text); }

int cmd_run(const RunArgs& a) {
  const RunSettings settings = settle(a);
  const ExperimentConfig experiment = settings.experiment();
  validate(experiment);
  if (settings.corpus.empty()) throw ConfigError("no corpus given (set corpus = <path>)");
  const Corpus corpus = load_corpus(settings.corpus);
  for (const auto& w : corpus.warnings) std::cerr << "warning: " << w << "\n";
  for (auto level : experiment.similarity_levels) select_sets(experiment, corpus.sets, level);
  const AnyBackend backend = make_backend(settings);

  const auto effective = effective_config(settings);
  // The corpus is pinned by content digest, so its path may change between
  // an interrupted run and its resumption.
  auto hashed = effective;
  hashed.erase("corpus");
  const std::string hash = config_hash(hashed);

  const fs::path out = a.out;
  fs::create_directories(out);
  RunState state;
  std::optional<RunState> loaded;
  if (a.resume) loaded = load_state(out, hash, corpus.digest);
  if (loaded) {
    state = std::move(*loaded);
    std::cerr << "resuming: " << state.units.size() << " units already complete\n";
  } else {
    if (a.resume) std::cerr << "no saved state in " << out.string() << "; starting fresh\n";
    state.manifest.created_at = utc_timestamp();
  }
  state.manifest.config_hash = hash;
  state.manifest.seed = experiment.seed;
  state.manifest.corpus_digest = corpus.digest;
  state.manifest.config = effective;
  state.manifest.updated_at = utc_timestamp();
  // Rewrites the journal without any torn tail before appending to it.
  save_state(out, state);

  Journal journal(journal_path(out));
  GridOptions opts;
  opts.workers = a.workers;
  opts.stop_after_units = a.stop_after_units;
  opts.completed.insert(state.manifest.completed_units.begin(), state.manifest.completed_units.end());
  opts.on_unit_done = [&](const UnitResult& u) {
    journal.append(u);
    state.units.push_back(u);
    auto& done = state.manifest.completed_units;
    done.insert(std::lower_bound(done.begin(), done.end(), u.unit_id), u.unit_id);
    state.manifest.updated_at = utc_timestamp();
    save_manifest(manifest_path(out), state.manifest);
  };

  const GridResult result = std::visit(
      [&](const auto& b) { return run_grid(experiment, corpus.sets, b, opts); }, backend);
  if (!result.warnings.empty())
    std::cerr << result.warnings.size() << " warnings during the run (see journal)\n";
  if (!result.complete) {
    std::cout << "stopped after " << result.units_run << " new units; "
              << state.manifest.completed_units.size() << " of " << result.units_total
              << " complete. Rerun with --resume to continue.\n";
    return kExitOk;
  }

  std::vector<RunRecord> records;
  for (const auto& u : state.units) records.insert(records.end(), u.records.begin(), u.records.end());
  sort_records(records);
  std::ostringstream csv;
  write_records_csv(csv, records);
  write_text(out / "records.csv", csv.str());
  write_all_aggregates(out, records);
  std::cout << "wrote " << records.size() << " records from " << result.units_total << " units to "
            << out.string() << "\n";

  const std::size_t cells = expand_cells(experiment).size();
  const std::size_t aborted = count_aborted_cells(records);
  if (2 * aborted > cells) {
    fail(std::to_string(aborted) + " of " + std::to_string(cells) +
         " cells aborted by backend failures");
    return kExitAborted;
  }
  return kExitOk;
}

// ------------------------------------------------------------------ theory-check

struct TheoryArgs {
  std::int64_t trials = 10000;
  std::uint64_t seed = 1;
  std::string schedule = "0.2,0.5,0.8";
  std::int64_t n_max = 5;
  double tau = 0.9;
  std::int64_t lemma_count = 1000;
  std::string json;
};

std::vector<double> parse_schedule(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = config_detail::trim(item);
    if (item.empty()) continue;
    out.push_back(config_detail::parse_real("--schedule", item));
  }
  return out;
}

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

int cmd_theory_check(const TheoryArgs& a) {
  if (a.trials < 2) throw ConfigError("--trials must be at least 2");
  bool all = true;
  nlohmann::json reports = nlohmann::json::array();
  auto line = [&](bool pass, const std::string& name, const std::string& detail) {
    all &= pass;
    std::cout << (pass ? "PASS " : "FAIL ") << name << "  " << detail << std::endl;
  };

  {
    auto r = verify_lemma(a.lemma_count, a.seed);
    line(r.pass, "lemma_mean_to_tail",
         std::to_string(r.checked) + " distributions, " + std::to_string(r.violations) +
             " violations");
    reports.push_back(to_json(r, a.seed));
  }

  try {
    auto r = verify_theorem1(parse_schedule(a.schedule), a.n_max, a.trials, a.seed, a.tau);
    std::string detail;
    for (const auto& s : r.rounds)
      detail += fmt("p=%.3g cost=%.4f (closed form %.4f) ", s.p, s.mean_cost, s.closed_form);
    line(r.pass, "theorem1_adaptive_cost", detail);
    reports.push_back(to_json(r));
  } catch (const PreconditionError& e) {
    all = false;
    std::cout << "REJECTED theorem1_adaptive_cost  precondition: " << e.what() << std::endl;
    reports.push_back({{"check", "theorem1_adaptive_cost"},
                       {"pass", false},
                       {"precondition_error", e.what()}});
  }

  const std::pair<double, std::int64_t> grid[] = {{0.5, 2}, {0.1, 5}, {0.3, 3}, {0.8, 1}, {0.5, 4}};
  for (auto [p, k] : grid) {
    auto r = verify_max_tail_independent(p, k, a.trials, a.seed, a.tau);
    line(r.pass, "max_tail_independent",
         std::string("k=") + std::to_string(k) +
             fmt(" p=%.2f empirical=%.4f expected=%.4f", p, r.empirical, r.expected));
    reports.push_back(to_json(r));
  }

  const std::pair<const char*, MonotoneDag> dags[] = {{"single_root", fixtures::single_root()},
                                                      {"chain", fixtures::chain()},
                                                      {"two_roots", fixtures::two_roots()}};
  for (const auto& [name, dag] : dags) {
    auto r = verify_theorem2_dag(dag, a.tau, a.trials, a.seed);
    std::string detail = std::string(name) + fmt(" tail %.4f -> %.4f", r.tail_before, r.tail_after);
    if (r.exact_before && r.exact_after)
      detail += fmt(" (exact %.4f -> %.4f)", *r.exact_before, *r.exact_after);
    line(r.pass, "theorem2_dag", detail);
    reports.push_back(to_json(r, name));
  }

  if (!a.json.empty()) {
    const std::string text = reports.dump(2) + "\n";
    if (a.json == "-")
      std::cout << text;
    else
      write_atomically(a.json, text);
  }
  std::cout << (all ? "all checks passed" : "some checks failed") << std::endl;
  return all ? kExitOk : kExitError;
}

// ------------------------------------------------------------------ report-data

int cmd_report_data(const std::string& records_path, const std::string& out) {
  if (!fs::exists(records_path)) {
    fail("records file not found: " + records_path);
    return kExitError;
  }
  const auto records = parse_records_csv(read_file(records_path));
  if (records.empty()) {
    fail("records file has no data rows: " + records_path);
    return kExitError;
  }
  for (const auto& p : write_all_aggregates(out, records)) std::cout << p.string() << "\n";

  // Cost against accuracy change across treatment cells.
  std::vector<double> cost, acc;
  for (const auto& row : aggregate(records, Grouping::by_cell)) {
    if (row.memory == MemoryMethod::none) continue;
    if (std::isnan(row.relative_cost_pct) || std::isnan(row.relative_accuracy_pct)) continue;
    cost.push_back(row.relative_cost_pct);
    acc.push_back(row.relative_accuracy_pct);
  }
  try {
    auto r = pearson(cost, acc);
    std::printf("pearson(relative cost, relative accuracy) over %zu cells: r=%.4f p=%.4g\n",
                cost.size(), r.r, r.p_value);
  } catch (const ContractError& e) {
    std::printf("pearson(relative cost, relative accuracy): undefined (%s)\n", e.what());
  }
  return kExitOk;
}

// ------------------------------------------------------------------ validate-corpus

int cmd_validate_corpus(const std::string& path) {
  const Corpus c = load_corpus(path);
  std::cout << c.question_count() << " questions in " << c.sets.size() << " sets, digest "
            << c.digest << "\n";
  for (const auto& s : c.sets)
    std::cout << "  " << s.set_id << " " << to_string(s.level) << " " << s.questions.size()
              << "\n";
  for (const auto& w : c.warnings) std::cerr << "warning: " << w << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Memory-aware test-time compute experiments"};
  app.require_subcommand(1);

  RunArgs run;
  auto* run_cmd = app.add_subcommand("run", "run the experiment grid");
  run_cmd->add_option("--config", run.config, "flat key = value config file")->check(CLI::ExistingFile);
  run_cmd->add_option("--out", run.out, "output directory")->capture_default_str();
  run_cmd->add_flag("--resume", run.resume, "continue from the state in --out");
  run_cmd->add_option("--stop-after-units", run.stop_after_units,
                      "stop after this many newly completed units");
  run_cmd->add_option("--workers", run.workers, "worker threads; 0 = one per question set")
      ->capture_default_str();
  run_cmd->add_option("--set", run.sets, "override any key: --set sim.memory_gain=0.4");
  for (const auto& key : config_keys()) {
    if (key.name.find('.') != std::string::npos) continue;
    std::string names = "--" + key.name;
    for (const auto& alias : key.aliases) names += ",--" + alias;
    run.flag_options[key.name] = run_cmd->add_option(names, run.flags[key.name], key.help);
  }

  TheoryArgs theory;
  auto* th = app.add_subcommand("theory-check", "verify the adaptive-stopping results by simulation");
  th->add_option("--trials", theory.trials, "trials per check")->capture_default_str();
  th->add_option("--seed", theory.seed)->capture_default_str();
  th->add_option("--schedule", theory.schedule, "non-decreasing success probabilities")
      ->capture_default_str();
  th->add_option("--n-max", theory.n_max)->capture_default_str();
  th->add_option("--tau", theory.tau)->capture_default_str();
  th->add_option("--lemma-count", theory.lemma_count)->capture_default_str();
  th->add_option("--json", theory.json, "write JSON reports to a file, or - for stdout");

  std::string records_path, report_out;
  auto* rep = app.add_subcommand("report-data", "write aggregate CSVs from a records CSV");
  rep->add_option("--records", records_path)->required();
  rep->add_option("--out", report_out)->required();

  std::string corpus_path;
  auto* vc = app.add_subcommand("validate-corpus", "check a JSONL corpus");
  vc->add_option("corpus", corpus_path)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitError;
  }

  try {
    if (*run_cmd) return cmd_run(run);
    if (*th) return cmd_theory_check(theory);
    if (*rep) return cmd_report_data(records_path, report_out);
    if (*vc) return cmd_validate_corpus(corpus_path);
  } catch (const ConfigError& e) {
    fail(std::string("configuration error: ") + e.what());
  } catch (const CorpusError& e) {
    fail(std::string("corpus error: ") + e.what());
  } catch (const ResumeError& e) {
    fail(e.what());
  } catch (const FormatError& e) {
    fail(std::string("bad input: ") + e.what());
  } catch (const std::exception& e) {
    fail(e.what());
  }
  return kExitError;
}
