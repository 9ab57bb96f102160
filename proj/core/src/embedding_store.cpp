#include "topicmark/embedding_store.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "topicmark/error.hpp"

namespace topicmark {

namespace {

std::vector<std::string_view> split_fields(std::string_view line, bool tabs) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  if (tabs) {
    while (true) {
      std::size_t j = line.find('\t', i);
      out.push_back(line.substr(i, j == std::string_view::npos ? j : j - i));
      if (j == std::string_view::npos) break;
      i = j + 1;
    }
    return out;
  }
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    std::size_t j = i;
    while (j < line.size() && !std::isspace(static_cast<unsigned char>(line[j]))) ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

bool parse_double(std::string_view s, double& v) {
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  return ec == std::errc() && p == s.data() + s.size() && std::isfinite(v);
}

bool parse_size(std::string_view s, std::size_t& v) {
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  return ec == std::errc() && p == s.data() + s.size();
}

}  // namespace

std::string ascii_lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  }
  return out;
}

EmbeddingTable::EmbeddingTable(std::size_t dim, CasefoldPolicy policy)
    : dim_(dim), policy_(policy) {
  if (dim == 0) throw LoadError("embedding dimension must be positive");
}

std::string EmbeddingTable::key(std::string_view word) const {
  return policy_ == CasefoldPolicy::lowercase ? ascii_lower(word) : std::string(word);
}

bool EmbeddingTable::insert(std::string_view word, Vector values) {
  if (values.size() != dim_) {
    throw LoadError("vector for '" + std::string(word) + "' has length " +
                    std::to_string(values.size()) + ", expected " + std::to_string(dim_));
  }
  if (std::all_of(values.begin(), values.end(), [](double x) { return x == 0.0; })) {
    throw LoadError("zero vector for '" + std::string(word) + "'");
  }
  auto [it, inserted] = index_.try_emplace(key(word), words_.size());
  if (!inserted) {
    ++duplicates_;
    return false;
  }
  words_.emplace_back(word);
  vectors_.push_back(std::move(values));
  return true;
}

const Vector* EmbeddingTable::find(std::string_view word) const {
  auto it = index_.find(key(word));
  return it == index_.end() ? nullptr : &vectors_[it->second];
}

EmbeddingTable load_embeddings(std::istream& in, EmbeddingFormat format,
                               CasefoldPolicy policy) {
  const bool tabs = format == EmbeddingFormat::tsv;
  std::optional<EmbeddingTable> table;
  std::string line;
  std::size_t lineno = 0;
  bool seen_content = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto fields = split_fields(line, tabs);
    if (!tabs && !seen_content && fields.size() == 2) {
      std::size_t count = 0, dim = 0;
      if (parse_size(fields[0], count) && parse_size(fields[1], dim)) {
        seen_content = true;
        if (dim == 0) throw LoadError("line 1: header declares zero dimension");
        table.emplace(dim, policy);
        continue;
      }
    }
    seen_content = true;
    if (fields.size() < 2) {
      throw LoadError("line " + std::to_string(lineno) + ": expected a word followed by values");
    }
    const std::size_t dim = fields.size() - 1;
    if (!table) table.emplace(dim, policy);
    if (dim != table->dim()) {
      throw LoadError("line " + std::to_string(lineno) + ": dimension mismatch (" +
                      std::to_string(dim) + " values, expected " +
                      std::to_string(table->dim()) + ")");
    }
    Vector v(dim);
    for (std::size_t i = 0; i < dim; ++i) {
      if (!parse_double(fields[i + 1], v[i])) {
        throw LoadError("line " + std::to_string(lineno) + ": bad number '" +
                        std::string(fields[i + 1]) + "'");
      }
    }
    try {
      table->insert(fields[0], std::move(v));
    } catch (const LoadError& e) {
      throw LoadError("line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  if (!table || table->size() == 0) throw LoadError("empty embedding stream");
  return std::move(*table);
}

EmbeddingTable load_embeddings_file(const std::string& path, EmbeddingFormat format,
                                    CasefoldPolicy policy) {
  std::ifstream in(path);
  if (!in) throw LoadError("cannot open embeddings file: " + path);
  return load_embeddings(in, format, policy);
}

EmbeddingFormat guess_embedding_format(std::string_view path) {
  return path.ends_with(".tsv") ? EmbeddingFormat::tsv : EmbeddingFormat::text_vec;
}

void write_embeddings(std::ostream& out, const EmbeddingTable& table,
                      EmbeddingFormat format, bool with_header) {
  const char sep = format == EmbeddingFormat::tsv ? '\t' : ' ';
  if (with_header && format == EmbeddingFormat::text_vec) {
    out << table.size() << ' ' << table.dim() << '\n';
  }
  char buf[64];
  for (std::size_t r = 0; r < table.size(); ++r) {
    out << table.words()[r];
    for (double x : table.vector_at(r)) {
      auto [p, ec] = std::to_chars(buf, buf + sizeof buf, x);
      out << sep;
      out.write(buf, p - buf);
    }
    out << '\n';
  }
}

double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw DomainError("vector length mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double l2_norm(std::span<const double> a) {
  double s = 0.0;
  for (double x : a) s += x * x;
  return std::sqrt(s);
}

double cosine(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw DomainError("cosine: vector length mismatch");
  const double na = l2_norm(a);
  const double nb = l2_norm(b);
  if (na == 0.0 || nb == 0.0) throw DomainError("cosine: zero-norm vector");
  return std::clamp(dot(a, b) / (na * nb), -1.0, 1.0);
}

Vocabulary::Vocabulary(std::vector<std::string> tokens) : tokens_(std::move(tokens)) {
  index_.reserve(tokens_.size());
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    if (tokens_[i].empty()) throw LoadError("empty token at index " + std::to_string(i));
    if (!index_.emplace(tokens_[i], static_cast<TokenId>(i)).second) {
      throw LoadError("duplicate token '" + tokens_[i] + "' at index " + std::to_string(i));
    }
    for (unsigned char c : tokens_[i]) {
      h ^= c;
      h *= 0x100000001b3ULL;
    }
    h ^= static_cast<unsigned char>('\n');
    h *= 0x100000001b3ULL;
  }
  fingerprint_ = h;
}

std::optional<TokenId> Vocabulary::find(std::string_view token) const {
  auto it = index_.find(std::string(token));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

Vocabulary load_vocabulary(std::istream& in) {
  std::vector<std::string> tokens;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    tokens.push_back(line);
  }
  while (!tokens.empty() && tokens.back().empty()) tokens.pop_back();
  if (tokens.empty()) throw LoadError("empty vocabulary");
  return Vocabulary(std::move(tokens));
}

Vocabulary load_vocabulary_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw LoadError("cannot open vocabulary file: " + path);
  return load_vocabulary(in);
}

void save_vocabulary(std::ostream& out, const Vocabulary& vocab) {
  for (const auto& t : vocab.tokens()) out << t << '\n';
}

std::string fingerprint_hex(std::uint64_t fp) {
  static const char* digits = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i) {
    s[static_cast<std::size_t>(i)] = digits[fp & 0xF];
    fp >>= 4;
  }
  return s;
}

}  // namespace topicmark
