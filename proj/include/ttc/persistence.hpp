#pragma once

// Durable artifacts: corpus loading, the records and aggregates CSV files,
// the run manifest, and the append-only unit journal used for resume.
//
// Layout of a run directory:
//   manifest.json        RunManifest, rewritten atomically after every unit
//   journal.jsonl        one line per finished unit (records + memories)
//   records.csv          canonical record table, written when the grid completes
//   aggregates_<g>.csv   one per grouping

#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ttc/error.hpp"
#include "ttc/harness.hpp"
#include "ttc/memory_state.hpp"
#include "ttc/random.hpp"

namespace ttc {

inline constexpr std::size_t kExpectedSetSize = 20;

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// ------------------------------------------------------------ corpus

struct Corpus {
  std::vector<QuestionSet> sets;
  /// FNV-1a of the file bytes.
  std::string digest;
  std::vector<std::string> warnings;

  std::size_t question_count() const {
    std::size_t n = 0;
    for (const auto& s : sets) n += s.questions.size();
    return n;
  }
};

namespace detail {

inline std::optional<std::string> optional_text(const nlohmann::json& obj, const char* key,
                                                std::size_t line) {
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) return std::nullopt;
  if (it->is_string()) return it->get<std::string>();
  if (it->is_number()) return it->dump();
  throw CorpusError("line " + std::to_string(line) + ": field '" + key +
                    "' must be a string, a number or null");
}

inline std::string required_text(const nlohmann::json& obj, const char* key, std::size_t line) {
  auto it = obj.find(key);
  if (it == obj.end()) throw CorpusError("line " + std::to_string(line) + ": missing field '" + key + "'");
  if (!it->is_string() || it->get_ref<const std::string&>().empty())
    throw CorpusError("line " + std::to_string(line) + ": field '" + key +
                      "' must be a non-empty string");
  return it->get<std::string>();
}

}  // namespace detail

/// Parses JSONL questions and groups them by (backbone_id, similarity_level)
/// in order of first appearance. Blank lines are skipped.
inline Corpus parse_corpus(std::string_view text) {
  Corpus corpus;
  corpus.digest = hex64(fnv1a(text));
  std::map<std::pair<std::string, SimilarityLevel>, std::size_t> group_of;
  std::set<std::string> ids;

  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    auto end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;

    nlohmann::json obj;
    try {
      obj = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw CorpusError("line " + std::to_string(line_no) + ": malformed JSON: " + e.what());
    }
    if (!obj.is_object()) throw CorpusError("line " + std::to_string(line_no) + ": not an object");

    Question q;
    q.id = detail::required_text(obj, "id", line_no);
    q.backbone_id = detail::required_text(obj, "backbone_id", line_no);
    auto level_text = detail::required_text(obj, "similarity_level", line_no);
    auto level = parse_similarity(level_text);
    if (!level)
      throw CorpusError("line " + std::to_string(line_no) + ": unknown similarity_level '" +
                        level_text + "'");
    q.similarity_level = *level;
    q.text = detail::required_text(obj, "text", line_no);
    q.reference_answer = detail::optional_text(obj, "reference_answer", line_no);
    q.knowledge_tag = detail::optional_text(obj, "knowledge_tag", line_no);

    if (!ids.insert(q.id).second)
      throw CorpusError("duplicate question id '" + q.id + "' at line " + std::to_string(line_no));

    auto key = std::make_pair(q.backbone_id, q.similarity_level);
    auto [it, fresh] = group_of.try_emplace(key, corpus.sets.size());
    if (fresh) corpus.sets.push_back({q.backbone_id, q.similarity_level, {}});
    corpus.sets[it->second].questions.push_back(std::move(q));
  }
  for (const auto& s : corpus.sets) {
    if (s.questions.size() != kExpectedSetSize)
      corpus.warnings.push_back("set " + s.set_id + "/" + std::string(to_string(s.level)) +
                                " has " + std::to_string(s.questions.size()) +
                                " questions (expected " + std::to_string(kExpectedSetSize) + ")");
  }
  return corpus;
}

inline Corpus load_corpus(const std::filesystem::path& path) {
  std::ifstream probe(path);
  if (!probe) throw CorpusError("cannot open corpus file " + path.string());
  return parse_corpus(read_file(path));
}

// ------------------------------------------------------------ CSV

inline std::string csv_field(std::string_view v) {
  if (v.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(v);
  std::string out = "\"";
  for (char c : v) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

inline void write_csv_row(std::ostream& out, const std::vector<std::string>& fields) {
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out << ',';
    out << csv_field(fields[i]);
  }
  out << '\n';
}

/// RFC 4180 reader: quoted fields may hold commas, doubled quotes and line
/// breaks. Accepts LF or CRLF row endings.
inline std::vector<std::vector<std::string>> parse_csv(std::string_view text) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool quoted = false, field_started = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    char c = text[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field += c;
      }
      continue;
    }
    switch (c) {
      case '"':
        if (!field.empty()) throw FormatError("stray quote inside unquoted CSV field");
        quoted = true;
        field_started = true;
        break;
      case ',':
        row.push_back(std::move(field));
        field.clear();
        field_started = true;
        break;
      case '\r':
        break;
      case '\n':
        row.push_back(std::move(field));
        field.clear();
        rows.push_back(std::move(row));
        row.clear();
        field_started = false;
        break;
      default:
        field += c;
        field_started = true;
    }
  }
  if (quoted) throw FormatError("unterminated quoted CSV field");
  if (field_started || !field.empty() || !row.empty()) {
    row.push_back(std::move(field));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline const std::vector<std::string> kRecordsHeader{
    "set_id", "question_index", "repetition", "strategy", "memory",
    "similarity", "cost", "unit", "accuracy", "satisfied"};

inline const std::vector<std::string> kAggregatesHeader{
    "grouping", "strategy", "memory", "similarity",
    "question_index", "relative_cost_pct", "relative_accuracy_pct"};

inline void write_records_csv(std::ostream& out, const std::vector<RunRecord>& records) {
  write_csv_row(out, kRecordsHeader);
  for (const auto& r : records)
    write_csv_row(out, {r.set_id, std::to_string(r.question_index), std::to_string(r.repetition),
                        std::string(to_string(r.strategy)), std::string(to_string(r.memory)),
                        std::string(to_string(r.similarity)), std::to_string(r.cost),
                        std::string(to_string(r.unit)), std::to_string(r.accuracy),
                        r.satisfied ? "true" : "false"});
}

namespace detail {

inline std::int64_t parse_int(const std::string& s, std::size_t row, const char* col) {
  std::int64_t v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size())
    throw FormatError("row " + std::to_string(row) + ": column " + col + " is not an integer: '" +
                      s + "'");
  return v;
}

template <class T, class Parse>
T parse_enum(const std::string& s, std::size_t row, const char* col, Parse parse) {
  auto v = parse(s);
  if (!v) throw FormatError("row " + std::to_string(row) + ": unknown " + col + " '" + s + "'");
  return *v;
}

inline std::optional<CostUnit> parse_cost_unit(std::string_view s) {
  for (auto u : {CostUnit::answers, CostUnit::nodes, CostUnit::tokens})
    if (s == to_string(u)) return u;
  return std::nullopt;
}

}  // namespace detail

inline std::vector<RunRecord> parse_records_csv(std::string_view text) {
  auto rows = parse_csv(text);
  if (rows.empty()) throw FormatError("records file is empty");
  if (rows.front() != kRecordsHeader) throw FormatError("records file has an unexpected header");
  std::vector<RunRecord> out;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto& f = rows[i];
    if (f.size() != kRecordsHeader.size())
      throw FormatError("row " + std::to_string(i) + ": expected " +
                        std::to_string(kRecordsHeader.size()) + " fields");
    RunRecord r;
    r.set_id = f[0];
    r.question_index = detail::parse_int(f[1], i, "question_index");
    r.repetition = static_cast<int>(detail::parse_int(f[2], i, "repetition"));
    r.strategy = detail::parse_enum<StrategyKind>(f[3], i, "strategy", parse_strategy_kind);
    r.memory = detail::parse_enum<MemoryMethod>(f[4], i, "memory", parse_memory_method);
    r.similarity = detail::parse_enum<SimilarityLevel>(f[5], i, "similarity", parse_similarity);
    r.cost = detail::parse_int(f[6], i, "cost");
    r.unit = detail::parse_enum<CostUnit>(f[7], i, "unit", detail::parse_cost_unit);
    r.accuracy = static_cast<int>(detail::parse_int(f[8], i, "accuracy"));
    if (f[9] == "true" || f[9] == "1") {
      r.satisfied = true;
    } else if (f[9] == "false" || f[9] == "0") {
      r.satisfied = false;
    } else {
      throw FormatError("row " + std::to_string(i) + ": satisfied must be true or false");
    }
    out.push_back(std::move(r));
  }
  return out;
}

inline std::string format_pct(double v) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  // Avoid a signed zero in the output.
  if (std::string_view(buf) == "-0.000000") return "0.000000";
  return buf;
}

inline void write_aggregates_csv(std::ostream& out, const std::vector<AggregateRow>& rows) {
  write_csv_row(out, kAggregatesHeader);
  for (const auto& r : rows)
    write_csv_row(out, {std::string(to_string(r.grouping)),
                        r.strategy ? std::string(to_string(*r.strategy)) : "",
                        r.memory ? std::string(to_string(*r.memory)) : "",
                        r.similarity ? std::string(to_string(*r.similarity)) : "",
                        r.question_index ? std::to_string(*r.question_index) : "",
                        format_pct(r.relative_cost_pct), format_pct(r.relative_accuracy_pct)});
}

/// Writes aggregates_<grouping>.csv for all four groupings into `dir`.
inline std::vector<std::filesystem::path> write_all_aggregates(
    const std::filesystem::path& dir, const std::vector<RunRecord>& records) {
  std::filesystem::create_directories(dir);
  std::vector<std::filesystem::path> written;
  for (auto g : kAllGroupings) {
    auto path = dir / ("aggregates_" + std::string(to_string(g)) + ".csv");
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + path.string());
    write_aggregates_csv(out, aggregate(records, g));
    written.push_back(path);
  }
  return written;
}

// ------------------------------------------------------------ manifest

struct RunManifest {
  std::string config_hash;
  std::uint64_t seed = 0;
  std::string corpus_digest;
  std::vector<std::string> completed_units;
  std::string created_at;
  std::string updated_at;
  /// Effective configuration, key by key.
  std::map<std::string, std::string> config;

  bool operator==(const RunManifest&) const = default;
};

inline std::string utc_timestamp() {
  auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

inline std::string config_hash(const std::map<std::string, std::string>& effective) {
  return hex64(fnv1a(nlohmann::json(effective).dump()));
}

inline nlohmann::json to_json(const RunManifest& m) {
  return {{"version", 1},
          {"config_hash", m.config_hash},
          {"seed", m.seed},
          {"corpus_digest", m.corpus_digest},
          {"completed_units", m.completed_units},
          {"created_at", m.created_at},
          {"updated_at", m.updated_at},
          {"config", m.config}};
}

inline RunManifest manifest_from_json(const nlohmann::json& j) {
  try {
    if (j.at("version").get<int>() != 1) throw ResumeError("unsupported manifest version");
    RunManifest m;
    m.config_hash = j.at("config_hash").get<std::string>();
    m.seed = j.at("seed").get<std::uint64_t>();
    m.corpus_digest = j.at("corpus_digest").get<std::string>();
    m.completed_units = j.at("completed_units").get<std::vector<std::string>>();
    m.created_at = j.at("created_at").get<std::string>();
    m.updated_at = j.at("updated_at").get<std::string>();
    m.config = j.at("config").get<std::map<std::string, std::string>>();
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw ResumeError(std::string("malformed manifest: ") + e.what());
  }
}

/// Write-then-rename, so a reader never sees a half-written file.
inline void write_atomically(const std::filesystem::path& path, std::string_view content) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + tmp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) throw Error("short write to " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

inline void save_manifest(const std::filesystem::path& path, const RunManifest& m) {
  write_atomically(path, to_json(m).dump(2) + "\n");
}

inline RunManifest load_manifest(const std::filesystem::path& path) {
  try {
    return manifest_from_json(nlohmann::json::parse(read_file(path)));
  } catch (const nlohmann::json::parse_error& e) {
    throw ResumeError(std::string("malformed manifest: ") + e.what());
  }
}

// ------------------------------------------------------------ journal

namespace detail {

inline nlohmann::json record_json(const RunRecord& r) {
  return {{"set_id", r.set_id},
          {"question_index", r.question_index},
          {"repetition", r.repetition},
          {"strategy", to_string(r.strategy)},
          {"memory", to_string(r.memory)},
          {"similarity", to_string(r.similarity)},
          {"cost", r.cost},
          {"unit", to_string(r.unit)},
          {"accuracy", r.accuracy},
          {"satisfied", r.satisfied},
          {"failed", r.failed}};
}

inline RunRecord record_from_json(const nlohmann::json& j) {
  RunRecord r;
  r.set_id = j.at("set_id").get<std::string>();
  r.question_index = j.at("question_index").get<std::int64_t>();
  r.repetition = j.at("repetition").get<int>();
  auto need = [](auto v, const char* what) {
    if (!v) throw ResumeError(std::string("journal: unknown ") + what);
    return *v;
  };
  r.strategy = need(parse_strategy_kind(j.at("strategy").get<std::string>()), "strategy");
  r.memory = need(parse_memory_method(j.at("memory").get<std::string>()), "memory");
  r.similarity = need(parse_similarity(j.at("similarity").get<std::string>()), "similarity");
  r.cost = j.at("cost").get<std::int64_t>();
  r.unit = need(parse_cost_unit(j.at("unit").get<std::string>()), "unit");
  r.accuracy = j.at("accuracy").get<int>();
  r.satisfied = j.at("satisfied").get<bool>();
  r.failed = j.at("failed").get<bool>();
  return r;
}

}  // namespace detail

inline nlohmann::json to_json(const UnitResult& u) {
  nlohmann::json records = nlohmann::json::array();
  for (const auto& r : u.records) records.push_back(detail::record_json(r));
  nlohmann::json memories = nlohmann::json::array();
  for (const auto& m : u.memories) memories.push_back(to_snapshot(m));
  return {{"unit", u.unit_id}, {"records", records}, {"memories", memories},
          {"warnings", u.warnings}};
}

inline UnitResult unit_from_json(const nlohmann::json& j) {
  UnitResult u;
  u.unit_id = j.at("unit").get<std::string>();
  for (const auto& r : j.at("records")) u.records.push_back(detail::record_from_json(r));
  for (const auto& m : j.at("memories")) u.memories.push_back(from_snapshot(m));
  u.warnings = j.at("warnings").get<std::vector<std::string>>();
  return u;
}

/// Append-only unit log. Each unit is one line emitted by a single write and
/// flushed, so a crash loses at most the line being written.
class Journal {
 public:
  explicit Journal(const std::filesystem::path& path, bool truncate = false)
      : out_(path, std::ios::binary | (truncate ? std::ios::trunc : std::ios::app)) {
    if (!out_) throw Error("cannot open journal " + path.string());
  }

  void append(const UnitResult& unit) {
    const std::string line = to_json(unit).dump() + "\n";
    out_.write(line.data(), static_cast<std::streamsize>(line.size()));
    out_.flush();
    if (!out_) throw Error("journal write failed");
  }

 private:
  std::ofstream out_;
};

/// Reads every complete line. A torn final line (no trailing newline, not
/// parseable) is dropped; corruption elsewhere is an error.
inline std::vector<UnitResult> load_journal(const std::filesystem::path& path) {
  std::vector<UnitResult> units;
  if (!std::filesystem::exists(path)) return units;
  const std::string text = read_file(path);
  std::size_t pos = 0, line_no = 0;
  while (pos < text.size()) {
    auto end = text.find('\n', pos);
    const bool torn = end == std::string::npos;
    if (torn) end = text.size();
    std::string_view line(text.data() + pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (line.empty()) continue;
    try {
      units.push_back(unit_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      if (torn) break;
      throw ResumeError("journal line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return units;
}

// ------------------------------------------------------------ run state

struct RunState {
  RunManifest manifest;
  std::vector<UnitResult> units;
};

inline std::filesystem::path manifest_path(const std::filesystem::path& dir) {
  return dir / "manifest.json";
}
inline std::filesystem::path journal_path(const std::filesystem::path& dir) {
  return dir / "journal.jsonl";
}

/// Persists a whole state at once: manifest plus a rewritten journal.
inline void save_state(const std::filesystem::path& dir, const RunState& state) {
  std::filesystem::create_directories(dir);
  std::string journal;
  for (const auto& u : state.units) journal += to_json(u).dump() + "\n";
  write_atomically(journal_path(dir), journal);
  save_manifest(manifest_path(dir), state.manifest);
}

/// Loads the state in `dir`. Returns nullopt when there is none (start
/// fresh). Refuses when the configuration or corpus differ from the manifest.
inline std::optional<RunState> load_state(const std::filesystem::path& dir,
                                          const std::string& expected_config_hash,
                                          const std::string& expected_corpus_digest) {
  if (!std::filesystem::exists(manifest_path(dir))) return std::nullopt;
  RunState state{load_manifest(manifest_path(dir)), load_journal(journal_path(dir))};
  if (state.manifest.config_hash != expected_config_hash)
    throw ResumeError("refusing to resume: configuration hash " + expected_config_hash +
                      " differs from the manifest's " + state.manifest.config_hash);
  if (state.manifest.corpus_digest != expected_corpus_digest)
    throw ResumeError("refusing to resume: corpus digest " + expected_corpus_digest +
                      " differs from the manifest's " + state.manifest.corpus_digest);
  // Units journaled after the last manifest write still count; units named in
  // the manifest but missing from the journal are rerun.
  std::set<std::string> journaled;
  std::vector<UnitResult> unique;
  for (auto& u : state.units)
    if (journaled.insert(u.unit_id).second) unique.push_back(std::move(u));
  state.units = std::move(unique);
  state.manifest.completed_units.assign(journaled.begin(), journaled.end());
  return state;
}

}  // namespace ttc
