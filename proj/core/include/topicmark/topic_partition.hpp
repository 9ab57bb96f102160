#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "topicmark/embedding_store.hpp"
#include "topicmark/text.hpp"

namespace topicmark {

struct Topic {
  std::string name;
  Vector embedding;

  friend bool operator==(const Topic&, const Topic&) = default;
};

/// Ordered predefined topics. At least two, unique names, non-zero embeddings
/// of a common dimension.
class TopicSet {
 public:
  TopicSet() = default;
  explicit TopicSet(std::vector<Topic> topics);

  std::size_t size() const noexcept { return topics_.size(); }
  std::size_t dim() const noexcept { return topics_.empty() ? 0 : topics_.front().embedding.size(); }
  const Topic& operator[](std::size_t i) const { return topics_.at(i); }
  const std::vector<Topic>& topics() const noexcept { return topics_; }

  /// Case-insensitive name lookup.
  std::optional<std::size_t> find(std::string_view name) const;

  friend bool operator==(const TopicSet&, const TopicSet&) = default;

 private:
  std::vector<Topic> topics_;
};

/// Looks each name up in the embedding table. Throws LoadError for a missing
/// name.
TopicSet make_topic_set(const std::vector<std::string>& names, const EmbeddingTable& table);

/// Topic names, one per line, `#` comments allowed.
std::vector<std::string> load_topic_names(std::istream& in);
std::vector<std::string> load_topic_names_file(const std::string& path);

enum class Provenance : std::uint8_t { similarity = 0, round_robin = 1 };

/// K disjoint green lists covering the whole vocabulary.
class TopicPartition {
 public:
  using TopicIndex = std::uint16_t;

  /// Validates shapes and builds the per-list token lists from `assignment`
  /// (token index -> list index).
  TopicPartition(TopicSet topics, double tau, std::uint64_t vocab_fingerprint,
                 SubwordPolicy subwords, std::vector<TopicIndex> assignment,
                 std::vector<Provenance> provenance);

  std::size_t topic_count() const noexcept { return topics_.size(); }
  std::size_t vocab_size() const noexcept { return assignment_.size(); }
  const TopicSet& topics() const noexcept { return topics_; }
  double tau() const noexcept { return tau_; }
  std::uint64_t vocab_fingerprint() const noexcept { return fingerprint_; }
  const SubwordPolicy& subwords() const noexcept { return subwords_; }

  /// Token indices of list i in ascending order.
  const std::vector<TokenId>& list(std::size_t i) const { return lists_.at(i); }
  /// |G_i| / |V|.
  double gamma(std::size_t i) const {
    return static_cast<double>(lists_.at(i).size()) / static_cast<double>(vocab_size());
  }
  std::size_t topic_of(TokenId token) const { return assignment_.at(token); }
  bool contains(std::size_t topic, TokenId token) const {
    return assignment_[token] == topic;
  }
  Provenance provenance(TokenId token) const { return provenance_.at(token); }
  const std::vector<TopicIndex>& assignment() const noexcept { return assignment_; }
  const std::vector<Provenance>& provenance() const noexcept { return provenance_; }

  friend bool operator==(const TopicPartition& a, const TopicPartition& b) {
    return a.topics_ == b.topics_ && a.tau_ == b.tau_ && a.fingerprint_ == b.fingerprint_ &&
           a.subwords_ == b.subwords_ && a.assignment_ == b.assignment_ &&
           a.provenance_ == b.provenance_;
  }

 private:
  TopicSet topics_;
  double tau_;
  std::uint64_t fingerprint_;
  SubwordPolicy subwords_;
  std::vector<TopicIndex> assignment_;
  std::vector<Provenance> provenance_;
  std::vector<std::vector<TokenId>> lists_;
};

struct PartitionOptions {
  double tau = 0.7;
  SubwordPolicy subwords;
  /// Worker threads for the similarity pass; 0 picks hardware concurrency.
  unsigned threads = 1;
};

/// Assigns each token to the topic of highest cosine similarity when that
/// similarity reaches tau (ties go to the lowest topic index). Everything
/// else, including tokens without an embedding, is dealt round-robin in
/// ascending vocabulary order: the j-th residual token joins list j mod K.
///
/// Non-fatal conditions (e.g. identical topic embeddings) are appended to
/// `warnings` when given.
TopicPartition build_partition(const Vocabulary& vocab, const EmbeddingTable& table,
                               const TopicSet& topics, const PartitionOptions& options,
                               std::vector<std::string>* warnings = nullptr);

struct PartitionStats {
  std::vector<std::size_t> sizes;
  std::vector<double> gamma;
  std::size_t residual_count = 0;
  double residual_fraction = 0.0;
};

PartitionStats partition_stats(const TopicPartition& p);

/// Binary container, layout in docs/partition_format.md.
void save_partition(const TopicPartition& p, std::ostream& out);
void save_partition_file(const TopicPartition& p, const std::string& path);

/// Throws ParseError on malformed or truncated input. When `vocab` is given,
/// also rejects a container whose fingerprint or size does not match it.
TopicPartition load_partition(std::istream& in, const Vocabulary* vocab = nullptr);
TopicPartition load_partition_file(const std::string& path, const Vocabulary* vocab = nullptr);

}  // namespace topicmark
