#include "topicmark/text.hpp"

#include <cctype>
#include <fstream>
#include <istream>
#include <sstream>

#include "topicmark/error.hpp"

namespace topicmark {

namespace detail {
extern const char* const kEnglishStopWords;
}

namespace {

bool is_sentence_punct(char c) {
  return c == '.' || c == ',' || c == ';' || c == ':' || c == '!' || c == '?';
}

bool is_word_char(char c) {
  const auto u = static_cast<unsigned char>(c);
  return std::isalnum(u) || c == '-' || c == '\'' || c == '_' || c == '#' || u >= 0x80;
}

}  // namespace

std::vector<std::string> split_words(std::string_view text) {
  std::vector<std::string> words;
  std::string cur;
  auto flush = [&] {
    // Trim hyphens/apostrophes hanging off either end.
    std::size_t b = 0, e = cur.size();
    while (b < e && (cur[b] == '-' || cur[b] == '\'')) ++b;
    while (e > b && (cur[e - 1] == '-' || cur[e - 1] == '\'')) --e;
    if (e > b) words.push_back(ascii_lower(std::string_view(cur).substr(b, e - b)));
    cur.clear();
  };
  for (char c : text) {
    if (is_word_char(c)) {
      cur.push_back(c);
    } else {
      flush();
      if (is_sentence_punct(c)) words.emplace_back(1, c);
    }
  }
  flush();
  return words;
}

std::string join_words(std::span<const std::string> words) {
  std::string out;
  for (std::size_t i = 0; i < words.size(); ++i) {
    if (i) out.push_back(' ');
    out += words[i];
  }
  return out;
}

std::string detokenize(std::span<const TokenId> tokens, const Vocabulary& vocab,
                       const SubwordPolicy& policy) {
  std::string out;
  bool first = true;
  for (TokenId id : tokens) {
    if (id >= vocab.size()) {
      throw Error("token index " + std::to_string(id) + " outside vocabulary of size " +
                  std::to_string(vocab.size()));
    }
    const std::string& surface = vocab.token(id);
    if (!first && policy.starts_word(surface)) out.push_back(' ');
    out += policy.strip(surface);
    first = false;
  }
  return out;
}

namespace {

// Greedy longest-prefix segmentation; empty result on failure.
std::vector<TokenId> segment(std::string_view word, const Vocabulary& vocab,
                             const SubwordPolicy& policy) {
  std::vector<TokenId> pieces;
  if (policy.marker.empty()) return pieces;
  std::size_t pos = 0;
  std::string probe;
  while (pos < word.size()) {
    bool found = false;
    for (std::size_t len = word.size() - pos; len > 0; --len) {
      const bool first = pos == 0;
      const bool marked = policy.kind == SubwordPolicy::Kind::continuation ? !first : first;
      probe.assign(marked ? policy.marker : std::string());
      probe.append(word.substr(pos, len));
      if (auto id = vocab.find(probe)) {
        pieces.push_back(*id);
        pos += len;
        found = true;
        break;
      }
    }
    if (!found) return {};
  }
  return pieces;
}

}  // namespace

Tokenized tokenize_words(std::span<const std::string> words, const Vocabulary& vocab,
                         const SubwordPolicy& policy, std::optional<TokenId> unk) {
  Tokenized out;
  out.ids.reserve(words.size());
  std::string probe;
  for (const auto& w : words) {
    if (policy.kind == SubwordPolicy::Kind::word_start && !policy.marker.empty()) {
      probe = policy.marker + w;
      if (auto id = vocab.find(probe)) {
        out.ids.push_back(*id);
        continue;
      }
    }
    if (auto id = vocab.find(w)) {
      out.ids.push_back(*id);
      continue;
    }
    auto pieces = segment(w, vocab, policy);
    if (!pieces.empty()) {
      ++out.subword_words;
      out.ids.insert(out.ids.end(), pieces.begin(), pieces.end());
      continue;
    }
    ++out.oov_words;
    if (unk) out.ids.push_back(*unk);
  }
  return out;
}

Tokenized tokenize(std::string_view text, const Vocabulary& vocab,
                   const SubwordPolicy& policy, std::optional<TokenId> unk) {
  const auto words = split_words(text);
  return tokenize_words(words, vocab, policy, unk);
}

StopWords parse_stop_words(std::istream& in) {
  std::unordered_set<std::string> words;
  std::string line;
  while (std::getline(in, line)) {
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    std::size_t b = 0, e = line.size();
    while (b < e && std::isspace(static_cast<unsigned char>(line[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(line[e - 1]))) --e;
    if (e > b) words.insert(ascii_lower(std::string_view(line).substr(b, e - b)));
  }
  return StopWords(std::move(words));
}

StopWords load_stop_words_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw LoadError("cannot open stop-word file: " + path);
  return parse_stop_words(in);
}

const StopWords& StopWords::english() {
  static const StopWords list = [] {
    std::istringstream in(detail::kEnglishStopWords);
    return parse_stop_words(in);
  }();
  return list;
}

bool is_content_candidate(std::string_view word) {
  if (word.empty()) return false;
  bool has_alpha = false;
  for (char c : word) {
    const auto u = static_cast<unsigned char>(c);
    if (std::isalpha(u) || u >= 0x80) {
      has_alpha = true;
    } else if (c != '-' && c != '\'' && c != '_') {
      return false;
    }
  }
  return has_alpha;
}

}  // namespace topicmark
