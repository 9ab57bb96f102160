#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "topicmark/embedding_store.hpp"
#include "topicmark/text.hpp"
#include "topicmark/topic_inference.hpp"
#include "topicmark/topic_partition.hpp"

namespace topicmark {

/// (g - gamma n) / sqrt(n gamma (1 - gamma)). Requires n > 0, 0 <= g <= n and
/// 0 < gamma < 1; throws DomainError otherwise.
double z_score(std::size_t green, std::size_t n, double gamma);

enum class Scheme {
  strict_embed,   // strict matching, embedding-average topic inference
  strict_kmeans,  // strict matching, k-means topic inference
  sliding,        // per-window inference with majority vote
  max_z,          // maximum z over all lists
  oracle,         // topic supplied by the caller
};

const char* to_string(Scheme s);
Scheme parse_scheme(std::string_view s);

struct WindowVote {
  std::size_t window = 0;
  std::optional<std::size_t> topic;  // empty when the window had no keywords
  double z = 0.0;                    // window's own z under its topic (0 if none)
};

struct DetectionReport {
  Scheme scheme = Scheme::max_z;
  std::size_t topic_index = 0;
  double z = 0.0;
  std::size_t green = 0;
  std::size_t scored = 0;
  double gamma_used = 0.0;
  double threshold = 0.0;
  bool verdict = false;
  std::optional<ChoiceMethod> topic_method;
  /// Strict or sliding detection could not infer a topic and used max-z.
  bool fell_back_to_max_z = false;
  std::vector<WindowVote> per_window;
  std::vector<double> per_topic_z;  // filled by max-z
};

/// Everything topic-aware detection needs besides the text.
struct DetectorContext {
  const TopicPartition* partition = nullptr;
  const Vocabulary* vocab = nullptr;
  const EmbeddingTable* embeddings = nullptr;
  const StopWords* stop_words = &StopWords::english();
  std::size_t min_tokens = 10;
  std::size_t max_keywords = 5;
};

inline constexpr double kDefaultThreshold = 4.75;
inline constexpr std::size_t kDefaultWindow = 50;

/// Scores the text against one list; z uses that list's own gamma.
DetectionReport detect_with_topic(std::span<const TokenId> tokens, const TopicPartition& partition,
                                  std::size_t topic, double threshold, std::size_t min_tokens = 10);

/// Infers the topic from the detokenized text, then scores against it. Falls
/// back to max-z (flagged) when no keywords can be extracted. `automatic`
/// applies the same k-means / mean-embedding switch as sliding windows.
DetectionReport detect_strict(std::span<const TokenId> tokens, const DetectorContext& ctx,
                              InferenceMethod method, double threshold);

/// Majority vote over per-window topics (ties to the lowest index), then a
/// single z over the whole text under the voted list.
DetectionReport detect_sliding(std::span<const TokenId> tokens, const DetectorContext& ctx,
                               std::size_t window, double threshold);

/// Evaluates every list and reports the largest z (ties to the lowest index).
DetectionReport detect_max_z(std::span<const TokenId> tokens, const TopicPartition& partition,
                             double threshold, std::size_t min_tokens = 10);

/// Surface text fed to keyword extraction.
std::string detokenize_for_inference(std::span<const TokenId> tokens, const Vocabulary& vocab,
                                     const SubwordPolicy& policy);

struct DetectorConfig {
  Scheme scheme = Scheme::max_z;
  double threshold = kDefaultThreshold;
  std::size_t window = kDefaultWindow;
};

/// Dispatches on config.scheme. Scheme::oracle requires `oracle_topic`.
DetectionReport run_detector(std::span<const TokenId> tokens, const DetectorContext& ctx,
                             const DetectorConfig& config,
                             std::optional<std::size_t> oracle_topic = std::nullopt);

}  // namespace topicmark
