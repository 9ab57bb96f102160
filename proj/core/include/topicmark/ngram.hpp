#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "topicmark/embedding_store.hpp"
#include "topicmark/generator.hpp"
#include "topicmark/text.hpp"

namespace topicmark {

/// Count-based n-gram language model with Laplace smoothing and stupid
/// backoff, usable as a LogitProvider. Immutable after training.
///
/// For the longest suffix of the context that was seen in training (at most
/// order-1 tokens), P(w | ctx) = (c(ctx, w) + alpha) / (c(ctx) + alpha * |V|).
/// Each level of backoff multiplies the score by 0.4; the factor is constant
/// across the vocabulary, so it shifts logits without changing the softmax.
class NGramModel final : public LogitProvider {
 public:
  static constexpr double kBackoff = 0.4;

  NGramModel(std::size_t order, double alpha, Vocabulary vocab);

  /// Accumulates counts over every window of the token stream.
  void add_counts(std::span<const TokenId> tokens);

  std::size_t order() const noexcept { return order_; }
  double alpha() const noexcept { return alpha_; }
  const Vocabulary& vocab() const noexcept { return vocab_; }
  std::size_t vocab_size() const override { return vocab_.size(); }
  std::uint64_t training_tokens() const noexcept { return total_; }

  /// Smoothed conditional distribution at the longest seen context suffix;
  /// `backoff_levels` receives how many tokens of context were dropped.
  std::vector<double> probabilities(std::span<const TokenId> context,
                                    std::size_t* backoff_levels = nullptr) const;
  LogitVector logits(std::span<const TokenId> context) const;
  LogitVector next_logits(std::span<const TokenId> context) override { return logits(context); }

  void save(std::ostream& out) const;
  static NGramModel load(std::istream& in);

 private:
  struct ContextCounts {
    std::uint64_t total = 0;
    std::vector<std::pair<TokenId, std::uint32_t>> next;  // sorted by token after finalize()
  };
  using Table = std::unordered_map<std::string, ContextCounts>;

  static std::string key(std::span<const TokenId> ctx);
  void finalize();
  template <typename F>
  void fill(std::span<const TokenId> context, F&& sink, std::size_t* backoff_levels) const;

  std::size_t order_;
  double alpha_;
  Vocabulary vocab_;
  std::uint64_t total_ = 0;
  std::vector<Table> tables_;  // tables_[n] holds contexts of length n
};

/// Cache language model over another provider: the base distribution is mixed
/// with the unigram distribution of the cacheable tokens among the last
/// `window` context tokens, p = (1 - weight) p_base + weight p_cache. A short
/// n-gram context forgets the subject of a prompt within a few words; the
/// cache keeps recently used content words in play.
class CacheMixture final : public LogitProvider {
 public:
  /// `cacheable` (one flag per token, empty = all) selects which tokens the
  /// cache counts, typically content words only.
  CacheMixture(LogitProvider& base, double weight, std::size_t window = 200,
               std::vector<bool> cacheable = {});

  std::size_t vocab_size() const override { return base_.vocab_size(); }
  LogitVector next_logits(std::span<const TokenId> context) override;

 private:
  LogitProvider& base_;
  double weight_;
  std::size_t window_;
  std::vector<bool> cacheable_;
};

/// Flags the tokens whose surface is a content word (letters, not a stop word).
std::vector<bool> content_token_mask(const Vocabulary& vocab, const StopWords& stop_words);

/// Tokenizes `corpus` with the vocabulary (whole words only, OOV dropped) and
/// trains a model. Throws when the corpus yields fewer than `order` tokens.
NGramModel train_ngram(std::istream& corpus, std::size_t order, double alpha, Vocabulary vocab,
                       const SubwordPolicy& policy = SubwordPolicy{});
NGramModel train_ngram_tokens(std::span<const TokenId> tokens, std::size_t order, double alpha,
                              Vocabulary vocab);

NGramModel load_ngram_file(const std::string& path);
void save_ngram_file(const NGramModel& model, const std::string& path);

}  // namespace topicmark
