#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace topicmark {

using TokenId = std::uint32_t;
using Vector = std::vector<double>;

enum class CasefoldPolicy { exact, lowercase };

enum class EmbeddingFormat {
  text_vec,  // `word v1 ... vd` whitespace separated, optional `count dim` header
  tsv,       // `word\tv1\t...\tvd`
};

std::string ascii_lower(std::string_view s);

/// Dense word vectors keyed by surface string. Immutable once loaded; every
/// vector has length dim() and non-zero norm.
class EmbeddingTable {
 public:
  explicit EmbeddingTable(std::size_t dim,
                          CasefoldPolicy policy = CasefoldPolicy::exact);

  /// Adds a row. Returns false (and counts a duplicate) if the key already
  /// exists; the first occurrence is kept. Throws LoadError on a dimension
  /// mismatch or an all-zero vector.
  bool insert(std::string_view word, Vector values);

  /// nullptr when the word is absent. Never returns a default vector.
  const Vector* find(std::string_view word) const;
  bool contains(std::string_view word) const { return find(word) != nullptr; }

  std::size_t dim() const noexcept { return dim_; }
  std::size_t size() const noexcept { return words_.size(); }
  std::size_t duplicates() const noexcept { return duplicates_; }
  CasefoldPolicy casefold() const noexcept { return policy_; }

  /// Rows in insertion order.
  const std::vector<std::string>& words() const noexcept { return words_; }
  const Vector& vector_at(std::size_t row) const { return vectors_.at(row); }

 private:
  std::string key(std::string_view word) const;

  std::size_t dim_;
  CasefoldPolicy policy_;
  std::vector<std::string> words_;
  std::vector<Vector> vectors_;
  std::unordered_map<std::string, std::size_t> index_;
  std::size_t duplicates_ = 0;
};

EmbeddingTable load_embeddings(std::istream& in, EmbeddingFormat format,
                               CasefoldPolicy policy = CasefoldPolicy::exact);
EmbeddingTable load_embeddings_file(const std::string& path,
                                    EmbeddingFormat format,
                                    CasefoldPolicy policy = CasefoldPolicy::exact);

/// Picks tsv for `.tsv` files, text-vec otherwise.
EmbeddingFormat guess_embedding_format(std::string_view path);

/// Writes rows with shortest round-trip float formatting, so a reload yields
/// bit-identical doubles.
void write_embeddings(std::ostream& out, const EmbeddingTable& table,
                      EmbeddingFormat format, bool with_header = true);

double dot(std::span<const double> a, std::span<const double> b);
double l2_norm(std::span<const double> a);

/// Cosine similarity, summed in ascending index order. Throws DomainError on
/// length mismatch or zero-norm input.
double cosine(std::span<const double> a, std::span<const double> b);

/// Ordered, duplicate-free token list with its inverse index.
class Vocabulary {
 public:
  Vocabulary() = default;
  explicit Vocabulary(std::vector<std::string> tokens);

  std::size_t size() const noexcept { return tokens_.size(); }
  bool empty() const noexcept { return tokens_.empty(); }
  const std::string& token(TokenId id) const { return tokens_.at(id); }
  std::optional<TokenId> find(std::string_view token) const;
  const std::vector<std::string>& tokens() const noexcept { return tokens_; }

  /// 64-bit FNV-1a over the tokens in order (each followed by '\n').
  std::uint64_t fingerprint() const noexcept { return fingerprint_; }

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) {
    return a.tokens_ == b.tokens_;
  }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> index_;
  std::uint64_t fingerprint_ = 0;
};

/// One token per line; blank lines are not allowed (tokens must be non-empty).
Vocabulary load_vocabulary(std::istream& in);
Vocabulary load_vocabulary_file(const std::string& path);
void save_vocabulary(std::ostream& out, const Vocabulary& vocab);

std::string fingerprint_hex(std::uint64_t fp);

}  // namespace topicmark
