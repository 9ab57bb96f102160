#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "topicmark/embedding_store.hpp"
#include "topicmark/error.hpp"
#include "topicmark/text.hpp"
#include "topicmark/topic_partition.hpp"

namespace topicmark {

struct Keyword {
  std::string term;
  double relevance = 0.0;
  Vector embedding;
};

/// Keywords in non-increasing relevance order, each with an embedding.
struct DetectedTopics {
  std::vector<Keyword> keywords;

  bool empty() const noexcept { return keywords.empty(); }
  std::size_t size() const noexcept { return keywords.size(); }
};

/// Centroid-similarity keyword ranker.
///
/// Candidates are the distinct lowercased content words of `text` that are
/// not stop words and have an embedding. The document centroid is the mean
/// embedding over the distinct candidates; each candidate is scored by its
/// cosine to that centroid. Returns the top `max_k`, ties broken by term.
/// Throws Error if `text` has no words at all; an empty result is not an
/// error.
DetectedTopics extract_keywords(std::string_view text, const EmbeddingTable& table,
                                const StopWords& stop_words, std::size_t max_k = 5);

enum class InferenceMethod { automatic, embedding_average, kmeans };
enum class ChoiceMethod { direct_match, embedding_average, kmeans, fallback };

const char* to_string(InferenceMethod m);
const char* to_string(ChoiceMethod m);
InferenceMethod parse_inference_method(std::string_view s);

struct TopicChoice {
  std::size_t topic_index = 0;
  ChoiceMethod method = ChoiceMethod::fallback;
  double score = 0.0;
  bool fallback_used = false;
  /// A remote keyword extractor was requested but unavailable, so the
  /// built-in ranker supplied the keywords.
  bool extractor_fallback = false;
};

/// Thrown when no keywords are available and no fallback topic was given.
class TopicUndeterminable : public Error {
 public:
  using Error::Error;
};

/// Maps detected keywords onto the topic set: a keyword equal to a topic name
/// (case-insensitive) wins outright; otherwise the mean-embedding or k-means
/// rule picks the closest topic. `automatic` uses k-means when there are at
/// least three keywords.
TopicChoice choose_topic(const DetectedTopics& detected, const TopicSet& topics,
                         InferenceMethod method,
                         std::optional<std::size_t> fallback = std::nullopt);

/// extract_keywords followed by choose_topic. A text without words yields no
/// keywords (and so the fallback topic, if any).
TopicChoice choose_topic_for_text(std::string_view text, const EmbeddingTable& table,
                                  const StopWords& stop_words, const TopicSet& topics,
                                  InferenceMethod method,
                                  std::optional<std::size_t> fallback = std::nullopt,
                                  std::size_t max_k = 5);

struct KMeansResult {
  std::vector<Vector> centroids;
  std::vector<std::size_t> assignment;
  std::size_t iterations = 0;
};

/// Deterministic Lloyd's k-means over Euclidean distance. Seeding is
/// farthest-point traversal from point 0; ties go to the lowest index; an
/// empty cluster takes the point farthest from its own centroid.
KMeansResult kmeans_cluster(std::span<const Vector> points, std::size_t clusters,
                            std::size_t max_iter = 100);

}  // namespace topicmark
