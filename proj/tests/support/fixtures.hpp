#pragma once

// Small hand-built worlds shared by the unit tests.

#include <string>
#include <utility>
#include <vector>

#include "topicmark/embedding_store.hpp"
#include "topicmark/topic_partition.hpp"

namespace topicmark::testing {

struct Row {
  std::string word;
  Vector v;
};

inline EmbeddingTable table_of(const std::vector<Row>& rows) {
  EmbeddingTable t(rows.front().v.size());
  for (const auto& r : rows) t.insert(r.word, r.v);
  return t;
}

inline Vocabulary vocab_of(const std::vector<Row>& rows) {
  std::vector<std::string> words;
  for (const auto& r : rows) words.push_back(r.word);
  return Vocabulary(std::move(words));
}

inline TopicSet topics_of(const std::vector<Row>& rows) {
  std::vector<Topic> ts;
  for (const auto& r : rows) ts.push_back({r.word, r.v});
  return TopicSet(std::move(ts));
}

/// The 6-token, 2-D stub used by the partition tests, with topics along the
/// two axes.
inline std::vector<Row> stub_tokens() {
  return {
      {"alpha", {1.0, 0.1}},   // cos to x-axis 0.995
      {"beta", {0.2, 1.0}},    // cos to y-axis 0.981
      {"gamma", {1.0, 1.0}},   // 0.707 to both
      {"delta", {-1.0, 0.3}},  // negative to x, 0.287 to y
      {"eps", {0.6, 0.8}},     // 0.6 / 0.8
      {"zeta", {0.9, -0.5}},   // 0.874 / -0.486
  };
}

inline std::vector<Row> stub_topics() { return {{"xaxis", {1.0, 0.0}}, {"yaxis", {0.0, 1.0}}}; }

}  // namespace topicmark::testing
