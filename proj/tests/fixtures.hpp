#pragma once

// Synthetic corpora for tests. The simulated backend ignores question text,
// so only ids, backbones, levels and reference answers matter.

#include <string>
#include <vector>

#include "ttc/harness.hpp"

namespace ttc::fixture {

inline Question make_question(const std::string& backbone, SimilarityLevel level, int index) {
  std::string id = backbone + "-" + std::string(to_string(level)) + "-" + std::to_string(index);
  return {id, backbone, level, "Question " + id, std::to_string(10 + index),
          std::string("tag-") + backbone};
}

inline std::vector<QuestionSet> corpus(int backbones, std::vector<SimilarityLevel> levels,
                                       int per_set) {
  std::vector<QuestionSet> sets;
  for (int b = 0; b < backbones; ++b) {
    for (auto level : levels) {
      QuestionSet s{"bb" + std::to_string(b), level, {}};
      for (int i = 0; i < per_set; ++i) s.questions.push_back(make_question(s.set_id, level, i));
      sets.push_back(std::move(s));
    }
  }
  return sets;
}

}  // namespace ttc::fixture
