#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>

#include "fixtures.hpp"
#include "topicmark/topic_inference.hpp"

using namespace topicmark;
using namespace topicmark::testing;

namespace {

double cos2(const Vector& a, const Vector& b) {
  double d = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) d += a[i] * b[i], na += a[i] * a[i], nb += b[i] * b[i];
  return d / std::sqrt(na * nb);
}

Vector mean_of(const std::vector<Vector>& pts) {
  Vector m(pts.front().size(), 0.0);
  for (const auto& p : pts)
    for (std::size_t i = 0; i < m.size(); ++i) m[i] += p[i];
  for (double& x : m) x /= static_cast<double>(pts.size());
  return m;
}

double sq(const Vector& a, const Vector& b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return s;
}

// Globally optimal clustering by enumerating every assignment of points to c
// labels (each label used at least once).
std::vector<Vector> exhaustive_kmeans(const std::vector<Vector>& pts, std::size_t c) {
  const std::size_t n = pts.size();
  std::size_t total = 1;
  for (std::size_t i = 0; i < n; ++i) total *= c;
  double best = std::numeric_limits<double>::infinity();
  std::vector<Vector> best_centroids;
  for (std::size_t code = 0; code < total; ++code) {
    std::vector<std::vector<Vector>> groups(c);
    std::size_t x = code;
    for (std::size_t i = 0; i < n; ++i, x /= c) groups[x % c].push_back(pts[i]);
    if (std::any_of(groups.begin(), groups.end(), [](const auto& g) { return g.empty(); })) continue;
    double sse = 0;
    std::vector<Vector> cents;
    for (const auto& g : groups) {
      cents.push_back(mean_of(g));
      for (const auto& p : g) sse += sq(p, cents.back());
    }
    if (sse < best - 1e-12) best = sse, best_centroids = cents;
  }
  return best_centroids;
}

// The 20-word document: words repeat, some are stop words, some lack
// embeddings.
const std::vector<Row> kDocRows{
    {"river", {1.0, 0.2}}, {"boat", {0.9, 0.4}},  {"water", {1.0, 0.0}},
    {"fish", {0.7, 0.7}},  {"money", {0.1, 1.0}}, {"bank", {0.6, 0.8}},
    {"loan", {0.0, 1.0}},  {"shore", {0.95, 0.3}},
};
const char* kDoc =
    "The river boat met the water near the bank . A fish swam ; the boat left the shore "
    "with money xyzzy river";

}  // namespace

TEST(ExtractKeywords, SingleWordHasRelevanceOne) {
  const auto table = table_of({{"medicine", {0.3, 0.4}}});
  const auto kws = extract_keywords("medicine", table, StopWords::english());
  ASSERT_EQ(kws.size(), 1u);
  EXPECT_EQ(kws.keywords[0].term, "medicine");
  EXPECT_NEAR(kws.keywords[0].relevance, 1.0, 1e-12);
}

TEST(ExtractKeywords, StopWordsOnlyGivesEmpty) {
  const auto table = table_of({{"the", {1, 0}}});
  EXPECT_TRUE(extract_keywords("the the the", table, StopWords::english()).empty());
  EXPECT_THROW(extract_keywords("   ", table, StopWords::english()), Error);
}

TEST(ExtractKeywords, MatchesBruteForceCentroidRanking) {
  const auto table = table_of(kDocRows);
  // Oracle: distinct non-stop words with an embedding, centroid = plain mean.
  std::map<std::string, Vector> cand;
  const auto& sw = StopWords::english();
  for (const auto& w : split_words(kDoc)) {
    if (sw.contains(w)) continue;
    for (const auto& r : kDocRows)
      if (r.word == w) cand[w] = r.v;
  }
  std::vector<Vector> vs;
  for (const auto& [w, v] : cand) vs.push_back(v);
  const Vector c = mean_of(vs);
  std::vector<std::pair<double, std::string>> ranked;
  for (const auto& [w, v] : cand) ranked.push_back({-cos2(v, c), w});
  std::sort(ranked.begin(), ranked.end());

  const auto got = extract_keywords(kDoc, table, sw, 3);
  ASSERT_EQ(got.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(got.keywords[i].term, ranked[i].second);
    EXPECT_NEAR(got.keywords[i].relevance, -ranked[i].first, 1e-12);
  }
  EXPECT_EQ(extract_keywords(kDoc, table, sw, 100).size(), cand.size());
}

TEST(ExtractKeywords, Deterministic) {
  const auto table = table_of(kDocRows);
  const auto a = extract_keywords(kDoc, table, StopWords::english());
  const auto b = extract_keywords(kDoc, table, StopWords::english());
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a.keywords[i].term, b.keywords[i].term);
}

TEST(ChooseTopic, DirectMatchWins) {
  const auto topics = topics_of({{"sports", {1, 0}}, {"medicine", {0, 1}}});
  DetectedTopics d;
  d.keywords.push_back({"ball", 0.9, {1, 0}});
  d.keywords.push_back({"Medicine", 0.5, {1, 0}});
  const auto c = choose_topic(d, topics, InferenceMethod::automatic);
  EXPECT_EQ(c.topic_index, 1u);
  EXPECT_EQ(c.method, ChoiceMethod::direct_match);
}

TEST(ChooseTopic, SingleKeywordEqualToTopic) {
  const auto topics = topics_of({{"a", {1, 0, 0}}, {"b", {0, 1, 0}}, {"c", {0, 0.6, 0.8}}});
  DetectedTopics d;
  d.keywords.push_back({"kw", 1.0, {0, 0.6, 0.8}});
  const auto c = choose_topic(d, topics, InferenceMethod::embedding_average);
  EXPECT_EQ(c.topic_index, 2u);
  EXPECT_NEAR(c.score, 1.0, 1e-12);
}

TEST(ChooseTopic, MatchesBruteForceBothFormulas) {
  const std::vector<Row> topic_rows{
      {"t0", {1, 0, 0}}, {"t1", {0, 1, 0}}, {"t2", {0, 0, 1}}, {"t3", {0.6, 0.6, 0.5}}};
  const auto topics = topics_of(topic_rows);
  const std::vector<Vector> pts{{0.9, 0.1, 0.0}, {1.0, 0.2, 0.1}, {0.1, 0.2, 2.0},
                                {0.0, 0.1, 1.8}, {0.2, 1.5, 0.1}};
  DetectedTopics d;
  for (std::size_t i = 0; i < pts.size(); ++i) d.keywords.push_back({"k" + std::to_string(i), 1.0, pts[i]});

  auto argmax = [&](auto&& f) {
    std::size_t best = 0;
    for (std::size_t j = 1; j < topic_rows.size(); ++j)
      if (f(j) > f(best)) best = j;
    return best;
  };
  const Vector m = mean_of(pts);
  const std::size_t expect_avg = argmax([&](std::size_t j) { return cos2(m, topic_rows[j].v); });
  const auto cents = exhaustive_kmeans(pts, 3);
  const std::size_t expect_km = argmax([&](std::size_t j) {
    double best = -2;
    for (const auto& c : cents) best = std::max(best, cos2(c, topic_rows[j].v));
    return best;
  });

  const auto avg = choose_topic(d, topics, InferenceMethod::embedding_average);
  const auto km = choose_topic(d, topics, InferenceMethod::kmeans);
  EXPECT_EQ(avg.topic_index, expect_avg);
  EXPECT_NEAR(avg.score, cos2(m, topic_rows[expect_avg].v), 1e-12);
  EXPECT_EQ(avg.method, ChoiceMethod::embedding_average);
  EXPECT_EQ(km.topic_index, expect_km);
  EXPECT_EQ(km.method, ChoiceMethod::kmeans);
  // Five keywords: automatic takes the k-means branch.
  EXPECT_EQ(choose_topic(d, topics, InferenceMethod::automatic).method, ChoiceMethod::kmeans);
  // The two rules disagree on this input, which is what makes it a useful case.
  EXPECT_NE(expect_avg, expect_km);
}

TEST(ChooseTopic, AutomaticUsesAverageBelowThreeKeywords) {
  const auto topics = topics_of({{"a", {1, 0}}, {"b", {0, 1}}});
  DetectedTopics d;
  d.keywords.push_back({"x", 1.0, {1, 0.1}});
  d.keywords.push_back({"y", 1.0, {1, 0.3}});
  EXPECT_EQ(choose_topic(d, topics, InferenceMethod::automatic).method, ChoiceMethod::embedding_average);
}

TEST(ChooseTopic, FallbackOrUndeterminable) {
  const auto topics = topics_of({{"a", {1, 0}}, {"b", {0, 1}}});
  EXPECT_THROW(choose_topic({}, topics, InferenceMethod::automatic), TopicUndeterminable);
  const auto c = choose_topic({}, topics, InferenceMethod::automatic, 1);
  EXPECT_TRUE(c.fallback_used);
  EXPECT_EQ(c.topic_index, 1u);
  EXPECT_EQ(c.method, ChoiceMethod::fallback);
  EXPECT_THROW(choose_topic({}, topics, InferenceMethod::automatic, 5), Error);
}

TEST(ChooseTopicForText, EmptyTextFallsBack) {
  const auto table = table_of({{"a", {1, 0}}, {"b", {0, 1}}});
  const auto topics = topics_of({{"a", {1, 0}}, {"b", {0, 1}}});
  const auto c = choose_topic_for_text("", table, StopWords::english(), topics,
                                       InferenceMethod::automatic, 0);
  EXPECT_TRUE(c.fallback_used);
  EXPECT_EQ(choose_topic_for_text("b b", table, StopWords::english(), topics,
                                  InferenceMethod::automatic)
                .topic_index,
            1u);
}

TEST(KMeans, OneClusterPerPoint) {
  const std::vector<Vector> pts{{0, 0}, {3, 1}, {-2, 5}};
  const auto r = kmeans_cluster(pts, 3);
  std::multiset<Vector> got(r.centroids.begin(), r.centroids.end()), want(pts.begin(), pts.end());
  EXPECT_EQ(got, want);
}

TEST(KMeans, SingleClusterIsMean) {
  const std::vector<Vector> pts{{0, 0}, {3, 1}, {-2, 5}, {1, 1}};
  const auto r = kmeans_cluster(pts, 1);
  EXPECT_NEAR(r.centroids[0][0], 0.5, 1e-12);
  EXPECT_NEAR(r.centroids[0][1], 1.75, 1e-12);
}

TEST(KMeans, TwoBlobsMatchExhaustiveOptimum) {
  const std::vector<Vector> pts{{0, 0}, {0.5, 0.2}, {0.1, 0.6}, {5, 5}, {5.4, 4.8}, {4.7, 5.3}};
  const auto want = exhaustive_kmeans(pts, 2);
  const auto r = kmeans_cluster(pts, 2);
  std::vector<Vector> got = r.centroids, w = want;
  std::sort(got.begin(), got.end());
  std::sort(w.begin(), w.end());
  for (std::size_t c = 0; c < 2; ++c)
    for (std::size_t i = 0; i < 2; ++i) EXPECT_NEAR(got[c][i], w[c][i], 1e-12);
  EXPECT_EQ(r.assignment[0], r.assignment[1]);
  EXPECT_NE(r.assignment[0], r.assignment[3]);
}

TEST(KMeans, RejectsBadArguments) {
  const std::vector<Vector> pts{{0, 0}, {1, 1}};
  EXPECT_THROW(kmeans_cluster(pts, 3), Error);
  EXPECT_THROW(kmeans_cluster(pts, 0), Error);
  const std::vector<Vector> ragged{{0, 0}, {1}};
  EXPECT_THROW(kmeans_cluster(ragged, 1), Error);
}

TEST(KMeans, DuplicatePointsKeepClustersNonEmpty) {
  const std::vector<Vector> pts{{1, 1}, {1, 1}, {1, 1}, {2, 2}};
  const auto r = kmeans_cluster(pts, 3);
  std::vector<int> counts(3, 0);
  for (auto a : r.assignment) ++counts[a];
  for (int c : counts) EXPECT_GT(c, 0);
}
