#include "topicmark/topic_inference.hpp"

#include <algorithm>
#include <limits>
#include <map>

#include "topicmark/error.hpp"

namespace topicmark {

DetectedTopics extract_keywords(std::string_view text, const EmbeddingTable& table,
                                const StopWords& stop_words, std::size_t max_k) {
  const auto words = split_words(text);
  if (words.empty()) throw Error("keyword extraction on empty text");

  // term -> embedding; std::map keeps candidate order independent of hashing.
  std::map<std::string, const Vector*> candidates;
  for (const auto& w : words) {
    if (!is_content_candidate(w) || stop_words.contains(w)) continue;
    if (const Vector* e = table.find(w)) candidates.emplace(w, e);
  }
  DetectedTopics out;
  if (candidates.empty()) return out;
  // Each distinct candidate counts once, so a word repeated many times cannot
  // drag the document centroid towards itself.
  Vector centroid(table.dim(), 0.0);
  for (const auto& [term, e] : candidates) {
    for (std::size_t i = 0; i < centroid.size(); ++i) centroid[i] += (*e)[i];
  }
  for (double& x : centroid) x /= static_cast<double>(candidates.size());
  const bool degenerate = l2_norm(centroid) == 0.0;

  for (const auto& [term, e] : candidates) {
    out.keywords.push_back({term, degenerate ? 0.0 : cosine(*e, centroid), *e});
  }
  std::stable_sort(out.keywords.begin(), out.keywords.end(),
                   [](const Keyword& a, const Keyword& b) {
                     if (a.relevance != b.relevance) return a.relevance > b.relevance;
                     return a.term < b.term;
                   });
  if (out.keywords.size() > max_k) out.keywords.resize(max_k);
  return out;
}

const char* to_string(InferenceMethod m) {
  switch (m) {
    case InferenceMethod::automatic: return "auto";
    case InferenceMethod::embedding_average: return "embedding-average";
    case InferenceMethod::kmeans: return "kmeans";
  }
  return "?";
}

const char* to_string(ChoiceMethod m) {
  switch (m) {
    case ChoiceMethod::direct_match: return "direct-match";
    case ChoiceMethod::embedding_average: return "embedding-average";
    case ChoiceMethod::kmeans: return "kmeans";
    case ChoiceMethod::fallback: return "fallback";
  }
  return "?";
}

InferenceMethod parse_inference_method(std::string_view s) {
  if (s == "auto") return InferenceMethod::automatic;
  if (s == "embedding-average" || s == "embed") return InferenceMethod::embedding_average;
  if (s == "kmeans") return InferenceMethod::kmeans;
  throw Error("unknown inference method '" + std::string(s) + "'");
}

namespace {

// argmax_j score_fn(j), ties to the lowest j. Scores of -inf mean "no opinion".
template <typename F>
std::pair<std::size_t, double> argmax_topic(std::size_t K, F&& score_fn) {
  std::size_t best = 0;
  double best_score = -std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < K; ++j) {
    const double s = score_fn(j);
    if (s > best_score) {
      best_score = s;
      best = j;
    }
  }
  return {best, best_score};
}

double safe_cosine(const Vector& a, const Vector& b) {
  if (l2_norm(a) == 0.0) return -std::numeric_limits<double>::infinity();
  return cosine(a, b);
}

}  // namespace

TopicChoice choose_topic(const DetectedTopics& detected, const TopicSet& topics,
                         InferenceMethod method, std::optional<std::size_t> fallback) {
  if (fallback && *fallback >= topics.size()) throw Error("fallback topic index out of range");
  auto fall_back = [&]() -> TopicChoice {
    if (!fallback) throw TopicUndeterminable("topic undeterminable: no usable keywords");
    return {*fallback, ChoiceMethod::fallback, 0.0, true};
  };
  if (detected.empty()) return fall_back();

  for (const auto& kw : detected.keywords) {
    if (auto idx = topics.find(kw.term)) return {*idx, ChoiceMethod::direct_match, 1.0, false};
  }

  if (method == InferenceMethod::automatic) {
    method = detected.size() >= 3 ? InferenceMethod::kmeans : InferenceMethod::embedding_average;
  }

  if (method == InferenceMethod::embedding_average) {
    Vector mean(topics.dim(), 0.0);
    for (const auto& kw : detected.keywords) {
      if (kw.embedding.size() != mean.size()) throw Error("keyword embedding dimension mismatch");
      for (std::size_t i = 0; i < mean.size(); ++i) mean[i] += kw.embedding[i];
    }
    for (double& x : mean) x /= static_cast<double>(detected.size());
    auto [idx, score] = argmax_topic(topics.size(), [&](std::size_t j) {
      return safe_cosine(mean, topics[j].embedding);
    });
    if (score == -std::numeric_limits<double>::infinity()) return fall_back();
    return {idx, ChoiceMethod::embedding_average, score, false};
  }

  std::vector<Vector> points;
  points.reserve(detected.size());
  for (const auto& kw : detected.keywords) points.push_back(kw.embedding);
  const auto km = kmeans_cluster(points, std::min<std::size_t>(3, points.size()));
  auto [idx, score] = argmax_topic(topics.size(), [&](std::size_t j) {
    double m = -std::numeric_limits<double>::infinity();
    for (const auto& c : km.centroids) m = std::max(m, safe_cosine(c, topics[j].embedding));
    return m;
  });
  if (score == -std::numeric_limits<double>::infinity()) return fall_back();
  return {idx, ChoiceMethod::kmeans, score, false};
}

namespace {

double sq_dist(const Vector& a, const Vector& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

}  // namespace

TopicChoice choose_topic_for_text(std::string_view text, const EmbeddingTable& table,
                                  const StopWords& stop_words, const TopicSet& topics,
                                  InferenceMethod method, std::optional<std::size_t> fallback,
                                  std::size_t max_k) {
  DetectedTopics detected;
  if (!split_words(text).empty()) detected = extract_keywords(text, table, stop_words, max_k);
  return choose_topic(detected, topics, method, fallback);
}

KMeansResult kmeans_cluster(std::span<const Vector> points, std::size_t clusters,
                            std::size_t max_iter) {
  const std::size_t n = points.size();
  if (clusters == 0) throw Error("kmeans: cluster count must be positive");
  if (clusters > n) {
    throw Error("kmeans: " + std::to_string(clusters) + " clusters requested for " +
                std::to_string(n) + " points");
  }
  if (max_iter == 0) throw Error("kmeans: max_iter must be positive");
  const std::size_t d = points.front().size();
  for (const auto& p : points) {
    if (p.size() != d) throw Error("kmeans: inconsistent point dimensions");
  }

  KMeansResult r;
  // Farthest-point seeding.
  r.centroids.push_back(points[0]);
  std::vector<double> nearest(n);
  for (std::size_t i = 0; i < n; ++i) nearest[i] = sq_dist(points[i], points[0]);
  while (r.centroids.size() < clusters) {
    std::size_t far = 0;
    double far_d = -1.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (nearest[i] > far_d) {
        far_d = nearest[i];
        far = i;
      }
    }
    r.centroids.push_back(points[far]);
    for (std::size_t i = 0; i < n; ++i) {
      nearest[i] = std::min(nearest[i], sq_dist(points[i], points[far]));
    }
  }

  constexpr std::size_t kUnassigned = std::numeric_limits<std::size_t>::max();
  r.assignment.assign(n, kUnassigned);
  for (std::size_t it = 0; it < max_iter; ++it) {
    std::vector<std::size_t> next(n);
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t best = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (std::size_t c = 0; c < clusters; ++c) {
        const double dd = sq_dist(points[i], r.centroids[c]);
        if (dd < best_d) {
          best_d = dd;
          best = c;
        }
      }
      next[i] = best;
    }
    // Repair empty clusters by stealing the worst-fitting point of a cluster
    // that can spare one.
    std::vector<std::size_t> counts(clusters, 0);
    for (auto a : next) ++counts[a];
    for (std::size_t c = 0; c < clusters; ++c) {
      if (counts[c] != 0) continue;
      std::size_t steal = kUnassigned;
      double steal_d = -1.0;
      for (std::size_t i = 0; i < n; ++i) {
        if (counts[next[i]] < 2) continue;
        const double dd = sq_dist(points[i], r.centroids[next[i]]);
        if (dd > steal_d) {
          steal_d = dd;
          steal = i;
        }
      }
      if (steal == kUnassigned) break;
      --counts[next[steal]];
      next[steal] = c;
      ++counts[c];
    }
    const bool stable = next == r.assignment;
    r.assignment = std::move(next);
    r.iterations = it + 1;
    for (std::size_t c = 0; c < clusters; ++c) {
      Vector mean(d, 0.0);
      for (std::size_t i = 0; i < n; ++i) {
        if (r.assignment[i] != c) continue;
        for (std::size_t k = 0; k < d; ++k) mean[k] += points[i][k];
      }
      for (double& x : mean) x /= static_cast<double>(counts[c]);
      r.centroids[c] = std::move(mean);
    }
    if (stable) break;
  }
  return r;
}

}  // namespace topicmark
