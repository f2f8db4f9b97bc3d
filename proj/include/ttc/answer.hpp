#pragma once

// Final-answer extraction and correctness checking.
//
// Normalization rules (frozen; changing them changes accuracy numbers):
//   1. take the text inside the last \boxed{...} if present, else the text
//      after the last line starting with "Answer:" (case-insensitive),
//      else the last non-empty line;
//   2. drop '$' characters, "\left", "\right", "\!", "\," and "\;";
//   3. collapse all whitespace runs to nothing;
//   4. strip a trailing '.';
//   5. compare case-sensitively; if both sides parse fully as numbers,
//      compare numerically with relative tolerance 1e-9 instead.

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <optional>
#include <string>
#include <string_view>

#include "ttc/core.hpp"

namespace ttc {

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

inline std::optional<std::string> last_boxed(std::string_view text) {
  constexpr std::string_view kBoxed = "\\boxed{";
  auto pos = text.rfind(kBoxed);
  if (pos == std::string_view::npos) return std::nullopt;
  std::size_t i = pos + kBoxed.size();
  int depth = 1;
  std::string out;
  for (; i < text.size(); ++i) {
    char c = text[i];
    if (c == '{') ++depth;
    if (c == '}' && --depth == 0) return out;
    out.push_back(c);
  }
  return std::nullopt;
}

inline bool starts_with_ci(std::string_view s, std::string_view prefix) {
  if (s.size() < prefix.size()) return false;
  for (std::size_t i = 0; i < prefix.size(); ++i) {
    if (std::tolower(static_cast<unsigned char>(s[i])) !=
        std::tolower(static_cast<unsigned char>(prefix[i])))
      return false;
  }
  return true;
}

inline std::optional<double> parse_number(std::string_view s) {
  if (s.empty()) return std::nullopt;
  if (s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

}  // namespace detail

inline std::string extract_answer(std::string_view content) {
  if (auto boxed = detail::last_boxed(content)) return *boxed;

  std::optional<std::string_view> answer_line;
  std::string_view last_nonempty;
  std::size_t start = 0;
  while (start <= content.size()) {
    auto end = content.find('\n', start);
    if (end == std::string_view::npos) end = content.size();
    auto line = detail::trim(content.substr(start, end - start));
    if (!line.empty()) last_nonempty = line;
    if (detail::starts_with_ci(line, "answer:")) answer_line = line.substr(7);
    start = end + 1;
  }
  return std::string(detail::trim(answer_line.value_or(last_nonempty)));
}

inline std::string normalize_answer(std::string_view raw) {
  std::string s(raw);
  for (std::string_view token : {"\\left", "\\right", "\\!", "\\,", "\\;"}) {
    for (auto pos = s.find(token); pos != std::string::npos; pos = s.find(token, pos)) {
      s.erase(pos, token.size());
    }
  }
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    if (c == '$' || std::isspace(static_cast<unsigned char>(c))) continue;
    out.push_back(c);
  }
  if (!out.empty() && out.back() == '.') out.pop_back();
  return out;
}

inline bool answers_match(std::string_view given, std::string_view reference) {
  auto a = normalize_answer(given);
  auto b = normalize_answer(reference);
  if (a == b) return true;
  auto x = detail::parse_number(a);
  auto y = detail::parse_number(b);
  if (x && y) {
    return std::fabs(*x - *y) <= 1e-9 * std::max(std::fabs(*x), std::fabs(*y));
  }
  return false;
}

/// Correctness of `content` against the question's reference answer;
/// unknown when there is no reference.
inline std::optional<bool> check_answer(const Question& q, std::string_view content) {
  if (!q.reference_answer) return std::nullopt;
  return answers_match(extract_answer(content), *q.reference_answer);
}

}  // namespace ttc
