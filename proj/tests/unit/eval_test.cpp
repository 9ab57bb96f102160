#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "metric_oracles.hpp"
#include "topicmark/error.hpp"
#include "topicmark/eval.hpp"
#include "topicmark/rng.hpp"

using namespace topicmark;

namespace {

std::vector<ScoredDoc> corpus(std::initializer_list<std::pair<double, int>> xs) {
  std::vector<ScoredDoc> c;
  int i = 0;
  for (auto [s, w] : xs) c.push_back({"d" + std::to_string(i++), s, w ? Label::watermarked : Label::clean});
  return c;
}

std::vector<ScoredDoc> random_corpus(std::uint64_t seed, std::size_t n, double separation) {
  CounterRng rng(seed);
  std::vector<ScoredDoc> c;
  for (std::size_t i = 0; i < n; ++i) {
    const bool w = i < 2 || (i >= 2 && i < 4 ? false : rng.uniform() < 0.5);
    // Rounded to a coarse grid so ties are common.
    const double s = std::round((rng.normal() + (w ? separation : 0.0)) * 4.0) / 4.0;
    c.push_back({"d" + std::to_string(i), s, w ? Label::watermarked : Label::clean});
  }
  return c;
}

}  // namespace

TEST(RocAuc, PerfectSeparation) {
  EXPECT_EQ(roc_auc(corpus({{5, 1}, {6, 1}, {1, 0}, {2, 0}})), 1.0);
  EXPECT_EQ(roc_auc(corpus({{5, 0}, {6, 0}, {1, 1}, {2, 1}})), 0.0);
}

TEST(RocAuc, SixPointPairCount) {
  // Pairs: 3 positives x 3 negatives, one tie at 2.0.
  const auto c = corpus({{3.0, 1}, {2.0, 1}, {0.5, 1}, {2.0, 0}, {1.0, 0}, {0.0, 0}});
  // (3 > all: 3) + (2.0 > 1.0, 0.0: 2, tie: 0.5) + (0.5 > 0.0: 1) = 6.5 / 9
  EXPECT_NEAR(roc_auc(c), 6.5 / 9.0, 1e-15);
  EXPECT_EQ(roc_auc(c), oracle::auc(c));
}

TEST(RocAuc, RandomLabelsNearHalf) {
  CounterRng rng(77);
  std::vector<ScoredDoc> c;
  for (int i = 0; i < 10000; ++i) c.push_back({"", rng.normal(), rng.uniform() < 0.5 ? Label::watermarked : Label::clean});
  EXPECT_NEAR(roc_auc(c), 0.5, 0.02);
}

TEST(RocAuc, NeedsBothLabels) {
  EXPECT_THROW(roc_auc(corpus({{1, 1}, {2, 1}})), Error);
  EXPECT_THROW(roc_auc(corpus({{std::nan(""), 1}, {2, 0}})), Error);
}

TEST(BestF1, PerfectSeparation) {
  const auto r = best_f1(corpus({{5, 1}, {6, 1}, {1, 0}, {2, 0}}));
  EXPECT_EQ(r.f1, 1.0);
  EXPECT_EQ(r.threshold, 3.5);
}

TEST(BestF1, DegenerateFloorIsTwoThirds) {
  // Identical scores: only "everything positive" or "nothing" is possible.
  const auto c = corpus({{1, 1}, {1, 1}, {1, 0}, {1, 0}});
  const auto r = best_f1(c);
  EXPECT_NEAR(r.f1, 2.0 / 3.0, 1e-15);
  EXPECT_EQ(r.threshold, -std::numeric_limits<double>::infinity());
}

TEST(BestF1, EightPointBruteForce) {
  const auto c = corpus({{0.1, 0}, {0.4, 1}, {0.35, 0}, {0.8, 1}, {0.7, 0}, {0.9, 1}, {0.2, 1}, {0.55, 0}});
  const auto want = oracle::best_f1(c);
  const auto got = best_f1(c);
  EXPECT_EQ(got.f1, want.f1);
  EXPECT_EQ(got.threshold, want.threshold);
}

TEST(TprAtFpr, PerfectSeparation) {
  const auto c = corpus({{5, 1}, {6, 1}, {1, 0}, {2, 0}});
  for (double l : {0.01, 0.1, 0.5}) {
    EXPECT_EQ(tpr_at_fpr(c, l), 1.0);
    EXPECT_EQ(tpr_at_fpr(c, l, TprConvention::interpolate), 1.0);
  }
}

TEST(TprAtFpr, ConstructedThreshold) {
  // 1000 clean scores; exactly 10 lie above t = 3.0 (which is itself a clean
  // score). Watermarked scores straddle t.
  std::vector<ScoredDoc> c;
  CounterRng rng(5);
  for (int i = 0; i < 989; ++i) c.push_back({"", 3.0 * rng.uniform() - 1.0, Label::clean});
  c.push_back({"", 3.0, Label::clean});
  for (int i = 0; i < 10; ++i) c.push_back({"", 3.5 + i, Label::clean});
  std::size_t above = 0;
  for (int i = 0; i < 200; ++i) {
    const double s = 1.0 + 6.0 * rng.uniform();
    c.push_back({"", s, Label::watermarked});
    above += s > 3.0;
  }
  EXPECT_EQ(tpr_at_fpr(c, 0.01), above / 200.0);
  EXPECT_EQ(rates_at(c, 3.0).fpr, 0.01);
}

TEST(TprAtFpr, RejectsBadLevel) {
  const auto c = corpus({{5, 1}, {1, 0}});
  EXPECT_THROW(tpr_at_fpr(c, 0.0), DomainError);
  EXPECT_THROW(tpr_at_fpr(c, 1.0), DomainError);
}

TEST(Metrics, RandomCorporaMatchOracles) {
  for (std::uint64_t seed = 0; seed < 25; ++seed) {
    const auto c = random_corpus(seed, 10 + seed * 7, 0.3 * double(seed % 5));
    EXPECT_NEAR(roc_auc(c), oracle::auc(c), 1e-12) << seed;
    const auto f = best_f1(c), fo = oracle::best_f1(c);
    EXPECT_NEAR(f.f1, fo.f1, 1e-12) << seed;
    EXPECT_EQ(f.threshold, fo.threshold) << seed;
    for (double l : {0.01, 0.05, 0.1, 0.25}) {
      EXPECT_NEAR(tpr_at_fpr(c, l), oracle::tpr_conservative(c, l), 1e-12) << seed << " " << l;
      EXPECT_NEAR(tpr_at_fpr(c, l, TprConvention::interpolate), oracle::tpr_interpolated(c, l), 1e-12)
          << seed << " " << l;
    }
  }
}

TEST(Metrics, ComputeMetricsBundlesEverything) {
  const auto c = corpus({{9, 1}, {6, 1}, {4, 1}, {5, 0}, {1, 0}, {0, 0}});
  const auto m = compute_metrics(c, 4.75);
  EXPECT_EQ(m.n_watermarked, 3u);
  EXPECT_EQ(m.n_clean, 3u);
  EXPECT_EQ(m.tpr_at.size(), 2u);
  EXPECT_TRUE(m.tpr_at.count(0.01) && m.tpr_at.count(0.10));
  EXPECT_NEAR(m.tpr_at_threshold, 2.0 / 3.0, 1e-15);
  EXPECT_NEAR(m.fpr_at_threshold, 1.0 / 3.0, 1e-15);
  EXPECT_NEAR(m.z_watermarked.mean, 19.0 / 3.0, 1e-15);
  EXPECT_EQ(rates_at(c, std::numeric_limits<double>::infinity()).fpr, 0.0);
}

TEST(Summary, SampleStatistics) {
  const std::vector<double> xs{2, 4, 4, 4, 5, 5, 7, 9};
  const auto s = summarize(xs);
  EXPECT_EQ(s.mean, 5.0);
  EXPECT_NEAR(s.sd, std::sqrt(32.0 / 7.0), 1e-15);
  const std::vector<double> one{3.5};
  EXPECT_EQ(summarize(one).sd, 0.0);
  EXPECT_EQ(summarize(one).mean, 3.5);
}

namespace {

TopicPartition round_robin_partition(std::size_t v, std::size_t k) {
  std::vector<Topic> topics;
  for (std::size_t i = 0; i < k; ++i) {
    Vector e(k, 0.0);
    e[i] = 1.0;
    topics.push_back({"t" + std::to_string(i), e});
  }
  std::vector<TopicPartition::TopicIndex> a(v);
  for (std::size_t i = 0; i < v; ++i) a[i] = static_cast<TopicPartition::TopicIndex>(i % k);
  return TopicPartition(TopicSet(topics), 0.7, 42, SubwordPolicy{}, a,
                        std::vector<Provenance>(v, Provenance::round_robin));
}

}  // namespace

TEST(ScalingStudy, SingleSampleSmoke) {
  const auto p = round_robin_partition(64, 4);
  std::vector<TokenId> sample;
  for (TokenId t = 0; t < 40; ++t) sample.push_back(t % 8 == 0 ? 4 : t);
  ScalingOptions opt;
  opt.repetitions = 1;
  opt.warmup = 0;
  const auto rows = scaling_study({{4, &p, {sample}}}, opt);
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_EQ(rows[0].z.count, 1u);
  EXPECT_EQ(rows[0].z.mean, detect_max_z(sample, p, kDefaultThreshold).z);
  EXPECT_EQ(rows[0].z.sd, 0.0);
  EXPECT_EQ(rows[0].seconds.count, 1u);
  EXPECT_GT(rows[0].seconds.mean, 0.0);
}

TEST(ScalingStudy, RejectsMixedVocabularies) {
  const auto a = round_robin_partition(64, 4);
  const auto b = TopicPartition(a.topics(), 0.7, 43, SubwordPolicy{}, a.assignment(), a.provenance());
  const std::vector<TokenId> s(20, 1);
  EXPECT_THROW(scaling_study({{4, &a, {s}}, {4, &b, {s}}}), Error);
}
