#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <limits>
#include <set>
#include <sstream>

#include "fixtures.hpp"
#include "topicmark/error.hpp"
#include "topicmark/synthetic.hpp"
#include "topicmark/topic_partition.hpp"

using namespace topicmark;
using namespace topicmark::testing;

namespace {

// Independent statement of the rule: argmax cosine if it reaches tau (lowest
// index on ties), otherwise the next round-robin slot. Plain loops, no
// library arithmetic.
std::vector<std::size_t> brute_force_assignment(const std::vector<Row>& tokens,
                                                const std::vector<Row>& topics, double tau) {
  std::vector<std::size_t> out;
  std::size_t residual = 0;
  for (const auto& tok : tokens) {
    double best = -2.0;
    std::size_t arg = 0;
    for (std::size_t k = 0; k < topics.size(); ++k) {
      double d = 0, na = 0, nb = 0;
      for (std::size_t i = 0; i < tok.v.size(); ++i) {
        d += tok.v[i] * topics[k].v[i];
        na += tok.v[i] * tok.v[i];
        nb += topics[k].v[i] * topics[k].v[i];
      }
      const double c = d / std::sqrt(na * nb);
      if (c > best) best = c, arg = k;
    }
    out.push_back(best >= tau ? arg : residual++ % topics.size());
  }
  return out;
}

TopicPartition stub_partition(double tau = 0.7) {
  const auto rows = stub_tokens();
  const auto table = table_of(rows);
  return build_partition(vocab_of(rows), table, topics_of(stub_topics()), PartitionOptions{tau});
}

void expect_disjoint_cover(const TopicPartition& p) {
  std::vector<int> seen(p.vocab_size(), 0);
  for (std::size_t k = 0; k < p.topic_count(); ++k) {
    const auto& l = p.list(k);
    EXPECT_TRUE(std::is_sorted(l.begin(), l.end()));
    for (TokenId t : l) {
      ++seen[t];
      EXPECT_EQ(p.topic_of(t), k);
    }
  }
  EXPECT_TRUE(std::all_of(seen.begin(), seen.end(), [](int c) { return c == 1; }));
}

void expect_round_robin_balance(const TopicPartition& p) {
  std::vector<std::size_t> rr(p.topic_count(), 0);
  std::size_t j = 0;
  for (TokenId t = 0; t < p.vocab_size(); ++t) {
    if (p.provenance(t) != Provenance::round_robin) continue;
    EXPECT_EQ(p.topic_of(t), j % p.topic_count()) << "residual #" << j;
    ++rr[p.topic_of(t)];
    ++j;
  }
  const auto [lo, hi] = std::minmax_element(rr.begin(), rr.end());
  EXPECT_LE(*hi - *lo, 1u);
}

}  // namespace

TEST(BuildPartition, ExactMatchesGetTheirOwnList) {
  std::vector<Row> topics, tokens;
  for (int k = 0; k < 4; ++k) {
    Vector e(4, 0.0);
    e[k] = 1.0;
    topics.push_back({"t" + std::to_string(k), e});
    tokens.push_back({"w" + std::to_string(k), e});
  }
  const auto table = table_of(tokens);
  const auto p = build_partition(vocab_of(tokens), table, topics_of(topics), PartitionOptions{0.7});
  for (std::size_t k = 0; k < 4; ++k) EXPECT_EQ(p.list(k), std::vector<TokenId>{TokenId(k)});
  EXPECT_EQ(partition_stats(p).residual_fraction, 0.0);
}

TEST(BuildPartition, OrthogonalTokensAlternate) {
  const std::vector<Row> topics{{"a", {1, 0, 0}}, {"b", {0, 1, 0}}};
  std::vector<Row> tokens;
  for (int i = 0; i < 4; ++i) tokens.push_back({"w" + std::to_string(i), {0, 0, 1}});
  const auto table = table_of(tokens);
  const auto p = build_partition(vocab_of(tokens), table, topics_of(topics), PartitionOptions{0.7});
  EXPECT_EQ(p.list(0), (std::vector<TokenId>{0, 2}));
  EXPECT_EQ(p.list(1), (std::vector<TokenId>{1, 3}));
}

TEST(BuildPartition, StubMatchesBruteForce) {
  for (double tau : {0.3, 0.5, 0.7, 0.71, 0.9, 1.0}) {
    const auto p = stub_partition(tau);
    const auto expected = brute_force_assignment(stub_tokens(), stub_topics(), tau);
    for (TokenId t = 0; t < expected.size(); ++t) {
      EXPECT_EQ(p.topic_of(t), expected[t]) << "tau " << tau << " token " << t;
    }
    expect_disjoint_cover(p);
    expect_round_robin_balance(p);
  }
}

TEST(BuildPartition, TieGoesToLowestTopic) {
  // "gamma" = (1,1) sits at cosine 1/sqrt(2) from both axes.
  const auto p = stub_partition(0.7);
  EXPECT_EQ(p.topic_of(2), 0u);
  EXPECT_EQ(p.provenance(2), Provenance::similarity);
}

TEST(BuildPartition, TokensWithoutEmbeddingAreResidual) {
  auto rows = stub_tokens();
  const auto table = table_of(rows);
  rows.push_back({"unseen", {1.0, 0.0}});
  const auto p = build_partition(vocab_of(rows), table, topics_of(stub_topics()), PartitionOptions{0.7});
  EXPECT_EQ(p.provenance(6), Provenance::round_robin);
  EXPECT_EQ(p.topic_of(6), 1u);  // second residual after "delta"
}

TEST(BuildPartition, SubwordMarkerIsStrippedForLookup) {
  const std::vector<Row> rows{{"cat", {1, 0}}, {"dog", {0, 1}}};
  const auto table = table_of(rows);
  const Vocabulary vocab({"cat", "##dog", "dog"});
  const auto p = build_partition(vocab, table, topics_of(stub_topics()), PartitionOptions{0.9});
  EXPECT_EQ(p.topic_of(1), 1u);
  EXPECT_EQ(p.provenance(1), Provenance::similarity);
}

TEST(BuildPartition, RejectsBadTau) {
  const auto rows = stub_tokens();
  const auto table = table_of(rows);
  EXPECT_THROW(build_partition(vocab_of(rows), table, topics_of(stub_topics()), PartitionOptions{0.0}),
               DomainError);
  EXPECT_THROW(build_partition(vocab_of(rows), table, topics_of(stub_topics()), PartitionOptions{1.5}),
               DomainError);
}

TEST(BuildPartition, WarnsOnIdenticalTopicEmbeddings) {
  const auto rows = stub_tokens();
  const auto table = table_of(rows);
  std::vector<std::string> warnings;
  build_partition(vocab_of(rows), table, topics_of({{"a", {1, 0}}, {"b", {1, 0}}}),
                  PartitionOptions{0.7}, &warnings);
  EXPECT_EQ(warnings.size(), 1u);
}

TEST(BuildPartition, ThreadCountDoesNotChangeTheResult) {
  const auto rv = make_random_vocabulary(5000, 16, 4, 11);
  std::vector<std::string> names(rv.topic_names.begin(), rv.topic_names.end());
  const auto topics = make_topic_set(names, rv.embeddings);
  PartitionOptions one{0.5}, four{0.5};
  four.threads = 4;
  EXPECT_EQ(build_partition(rv.vocab, rv.embeddings, topics, one),
            build_partition(rv.vocab, rv.embeddings, topics, four));
}

TEST(PartitionStats, AllResidualIsBalanced) {
  std::vector<Row> tokens;
  for (int i = 0; i < 100; ++i) tokens.push_back({"w" + std::to_string(i), {0, 0, 1}});
  std::vector<Row> topics;
  for (int k = 0; k < 4; ++k) {
    Vector e{std::cos(k * 0.7), std::sin(k * 0.7), 0.0};
    topics.push_back({"t" + std::to_string(k), e});
  }
  const auto table = table_of(tokens);
  const auto s = partition_stats(
      build_partition(vocab_of(tokens), table, topics_of(topics), PartitionOptions{0.7}));
  EXPECT_EQ(s.sizes, (std::vector<std::size_t>{25, 25, 25, 25}));
  EXPECT_EQ(s.residual_fraction, 1.0);
  EXPECT_EQ(s.residual_count, 100u);
}

TEST(PartitionStats, StubSizesMatchBruteForce) {
  const auto expected = brute_force_assignment(stub_tokens(), stub_topics(), 0.7);
  const auto s = partition_stats(stub_partition());
  EXPECT_EQ(s.sizes[0], std::count(expected.begin(), expected.end(), 0u));
  EXPECT_EQ(s.sizes[1], std::count(expected.begin(), expected.end(), 1u));
  EXPECT_EQ(s.residual_count, 1u);
  // gamma is |G_i| / |V| exactly.
  EXPECT_EQ(s.gamma[0], 4.0 / 6.0);
  EXPECT_EQ(s.gamma[1], 2.0 / 6.0);
  EXPECT_NEAR(s.gamma[0] + s.gamma[1], 1.0, 1e-12);
}

TEST(PartitionFile, GoldenBytes) {
  std::ifstream f(TOPICMARK_GOLDEN_DIR "/stub_k2.tmk", std::ios::binary);
  ASSERT_TRUE(f) << "missing golden file";
  const std::string golden((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  std::ostringstream out;
  save_partition(stub_partition(), out);
  EXPECT_EQ(out.str(), golden);

  std::istringstream in(golden);
  const auto vocab = vocab_of(stub_tokens());
  EXPECT_EQ(load_partition(in, &vocab), stub_partition());
}

TEST(PartitionFile, RoundTrip) {
  const auto p = stub_partition();
  std::stringstream buf;
  save_partition(p, buf);
  EXPECT_EQ(load_partition(buf), p);
}

TEST(PartitionFile, RejectsOtherVocabulary) {
  std::stringstream buf;
  save_partition(stub_partition(), buf);
  const Vocabulary other({"alpha", "beta", "gamma", "delta", "eps", "eta"});
  try {
    load_partition(buf, &other);
    FAIL() << "expected a fingerprint error";
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("fingerprint"), std::string::npos);
  }
}

TEST(PartitionFile, TruncationReportsOffset) {
  std::ostringstream out;
  save_partition(stub_partition(), out);
  const std::string bytes = out.str();
  for (std::size_t cut : {std::size_t{3}, std::size_t{20}, bytes.size() - 9, bytes.size() - 1}) {
    std::istringstream in(bytes.substr(0, cut));
    try {
      load_partition(in);
      FAIL() << "cut at " << cut << " parsed";
    } catch (const ParseError& e) {
      EXPECT_LE(e.offset(), cut);
    }
  }
}

TEST(PartitionFile, CorruptionFailsChecksum) {
  std::ostringstream out;
  save_partition(stub_partition(), out);
  std::string bytes = out.str();
  bytes[bytes.size() - 10] ^= 0x01;  // flip a provenance bit
  std::istringstream in(bytes);
  EXPECT_THROW(load_partition(in), ParseError);
}
