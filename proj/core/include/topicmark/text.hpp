#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "topicmark/embedding_store.hpp"

namespace topicmark {

/// How subword tokens mark word boundaries.
///
/// `continuation` (WordPiece style, marker "##"): a marked token continues the
/// previous word. `word_start` (SentencePiece style, marker "▁"): a marked
/// token begins a new word and unmarked tokens continue the previous one.
/// An empty marker means every token is a whole word.
struct SubwordPolicy {
  enum class Kind : std::uint8_t { continuation = 0, word_start = 1 };

  std::string marker = "##";
  Kind kind = Kind::continuation;

  bool has_marker(std::string_view token) const {
    return !marker.empty() && token.starts_with(marker);
  }
  /// Surface string used for embedding lookup.
  std::string_view strip(std::string_view token) const {
    return has_marker(token) ? token.substr(marker.size()) : token;
  }
  bool starts_word(std::string_view token) const {
    if (marker.empty()) return true;
    return kind == Kind::continuation ? !has_marker(token) : has_marker(token);
  }

  friend bool operator==(const SubwordPolicy&, const SubwordPolicy&) = default;
};

/// Lowercases and splits on whitespace. Sentence punctuation (. , ; : ! ?)
/// becomes its own word; quotes, brackets and other symbols are dropped.
std::vector<std::string> split_words(std::string_view text);

std::string join_words(std::span<const std::string> words);

/// Token surfaces joined by single spaces, with subword pieces glued back
/// into words and markers stripped.
std::string detokenize(std::span<const TokenId> tokens, const Vocabulary& vocab,
                       const SubwordPolicy& policy);

struct Tokenized {
  std::vector<TokenId> ids;
  std::size_t oov_words = 0;       // words with no exact or subword match
  std::size_t subword_words = 0;   // words that needed a subword split
};

/// Maps words onto the vocabulary: exact match first, then greedy
/// longest-prefix subword segmentation under `policy`. Unmatched words map
/// to `unk` when given, otherwise they are dropped. Both are counted.
Tokenized tokenize(std::string_view text, const Vocabulary& vocab,
                   const SubwordPolicy& policy,
                   std::optional<TokenId> unk = std::nullopt);
Tokenized tokenize_words(std::span<const std::string> words, const Vocabulary& vocab,
                         const SubwordPolicy& policy,
                         std::optional<TokenId> unk = std::nullopt);

class StopWords {
 public:
  StopWords() = default;
  explicit StopWords(std::unordered_set<std::string> words) : words_(std::move(words)) {}

  /// The bundled English list (core/data/stopwords_en.txt).
  static const StopWords& english();

  bool contains(std::string_view word) const { return words_.count(std::string(word)) > 0; }
  std::size_t size() const noexcept { return words_.size(); }
  void add(std::string word) { words_.insert(std::move(word)); }
  const std::unordered_set<std::string>& words() const noexcept { return words_; }

 private:
  std::unordered_set<std::string> words_;
};

/// One word per line, `#` starts a comment, blank lines ignored. Words are
/// lowercased.
StopWords parse_stop_words(std::istream& in);
StopWords load_stop_words_file(const std::string& path);

/// True for words made of letters (plus internal hyphens or apostrophes).
bool is_content_candidate(std::string_view word);

}  // namespace topicmark
