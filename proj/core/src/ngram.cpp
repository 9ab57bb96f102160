#include "topicmark/ngram.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <iterator>
#include <map>
#include <ostream>

#include "binary_io.hpp"

namespace topicmark {

NGramModel::NGramModel(std::size_t order, double alpha, Vocabulary vocab)
    : order_(order), alpha_(alpha), vocab_(std::move(vocab)), tables_(order) {
  if (order == 0) throw Error("n-gram order must be at least 1");
  if (!(alpha > 0.0) || !std::isfinite(alpha)) throw Error("Laplace alpha must be positive");
  if (vocab_.empty()) throw Error("n-gram model over an empty vocabulary");
}

std::string NGramModel::key(std::span<const TokenId> ctx) {
  std::string k(ctx.size() * sizeof(TokenId), '\0');
  for (std::size_t i = 0; i < ctx.size(); ++i) {
    for (std::size_t b = 0; b < sizeof(TokenId); ++b) {
      k[i * sizeof(TokenId) + b] = static_cast<char>((ctx[i] >> (8 * b)) & 0xFF);
    }
  }
  return k;
}

void NGramModel::add_counts(std::span<const TokenId> tokens) {
  for (TokenId t : tokens) {
    if (t >= vocab_.size()) throw Error("training token outside vocabulary");
  }
  // Temporary maps keyed by next token, folded into sorted vectors afterwards.
  std::vector<std::unordered_map<std::string, std::map<TokenId, std::uint32_t>>> acc(order_);
  for (std::size_t n = 0; n < order_; ++n) {
    for (auto& [k, cc] : tables_[n]) {
      auto& m = acc[n][k];
      for (auto [t, c] : cc.next) m[t] += c;
    }
  }
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    for (std::size_t n = 0; n < order_ && n <= i; ++n) {
      ++acc[n][key(tokens.subspan(i - n, n))][tokens[i]];
    }
  }
  total_ += tokens.size();
  for (std::size_t n = 0; n < order_; ++n) {
    Table t;
    t.reserve(acc[n].size());
    for (auto& [k, m] : acc[n]) {
      ContextCounts cc;
      for (auto [tok, c] : m) {
        cc.next.emplace_back(tok, c);
        cc.total += c;
      }
      t.emplace(k, std::move(cc));
    }
    tables_[n] = std::move(t);
  }
}

template <typename F>
void NGramModel::fill(std::span<const TokenId> context, F&& sink,
                      std::size_t* backoff_levels) const {
  const std::size_t max_ctx = std::min(order_ - 1, context.size());
  for (std::size_t len = max_ctx + 1; len-- > 0;) {
    const auto ctx = context.subspan(context.size() - len, len);
    auto it = tables_[len].find(key(ctx));
    if (it == tables_[len].end() || it->second.total == 0) continue;
    const std::size_t levels = (order_ - 1) - len;
    if (backoff_levels) *backoff_levels = levels;
    sink(it->second, levels);
    return;
  }
  // Untrained model: uniform.
  if (backoff_levels) *backoff_levels = order_ - 1;
  sink(ContextCounts{}, order_ - 1);
}

std::vector<double> NGramModel::probabilities(std::span<const TokenId> context,
                                              std::size_t* backoff_levels) const {
  std::vector<double> p(vocab_.size());
  fill(
      context,
      [&](const ContextCounts& cc, std::size_t) {
        const double denom = static_cast<double>(cc.total) + alpha_ * static_cast<double>(p.size());
        std::fill(p.begin(), p.end(), alpha_ / denom);
        for (auto [t, c] : cc.next) p[t] = (static_cast<double>(c) + alpha_) / denom;
      },
      backoff_levels);
  return p;
}

LogitVector NGramModel::logits(std::span<const TokenId> context) const {
  LogitVector out(vocab_.size());
  fill(
      context,
      [&](const ContextCounts& cc, std::size_t levels) {
        const double denom = static_cast<double>(cc.total) + alpha_ * static_cast<double>(out.size());
        const double shift = static_cast<double>(levels) * std::log(kBackoff) - std::log(denom);
        std::fill(out.begin(), out.end(), std::log(alpha_) + shift);
        for (auto [t, c] : cc.next) out[t] = std::log(static_cast<double>(c) + alpha_) + shift;
      },
      nullptr);
  return out;
}

namespace {
constexpr std::string_view kMagic{"TMKNGRM\0", 8};
constexpr std::uint32_t kVersion = 1;
}  // namespace

void NGramModel::save(std::ostream& out) const {
  detail::ByteWriter w;
  w.bytes(kMagic.data(), kMagic.size());
  w.u32(kVersion);
  w.u32(static_cast<std::uint32_t>(order_));
  w.f64(alpha_);
  w.u64(total_);
  w.u64(vocab_.size());
  for (const auto& t : vocab_.tokens()) w.str(t);
  for (std::size_t n = 0; n < order_; ++n) {
    // Sorted keys make the file byte-stable.
    std::vector<const Table::value_type*> rows;
    rows.reserve(tables_[n].size());
    for (const auto& row : tables_[n]) rows.push_back(&row);
    std::sort(rows.begin(), rows.end(), [](auto* a, auto* b) { return a->first < b->first; });
    w.u64(rows.size());
    for (const auto* row : rows) {
      w.bytes(row->first.data(), row->first.size());
      w.u32(static_cast<std::uint32_t>(row->second.next.size()));
      for (auto [t, c] : row->second.next) {
        w.u32(t);
        w.u32(c);
      }
    }
  }
  w.checksum();
  out.write(reinterpret_cast<const char*>(w.data().data()),
            static_cast<std::streamsize>(w.data().size()));
  if (!out) throw Error("failed writing n-gram model");
}

NGramModel NGramModel::load(std::istream& in) {
  auto r = detail::ByteReader::from_stream(in, "n-gram model");
  r.expect(kMagic);
  if (r.u32() != kVersion) r.fail("unsupported version");
  const std::uint32_t order = r.u32();
  const double alpha = r.f64();
  const std::uint64_t total = r.u64();
  const std::uint64_t V = r.u64();
  if (order == 0 || order > 16 || V == 0 || V > r.remaining()) r.fail("bad header");
  std::vector<std::string> tokens;
  tokens.reserve(V);
  for (std::uint64_t i = 0; i < V; ++i) tokens.push_back(r.str());
  NGramModel m(order, alpha, Vocabulary(std::move(tokens)));
  m.total_ = total;
  for (std::size_t n = 0; n < order; ++n) {
    const std::uint64_t rows = r.u64();
    for (std::uint64_t i = 0; i < rows; ++i) {
      const std::size_t klen = n * sizeof(TokenId);
      r.need(klen);
      std::string k(reinterpret_cast<const char*>(r.cursor()), klen);
      r.skip(klen);
      ContextCounts cc;
      const std::uint32_t cnt = r.u32();
      r.need(std::uint64_t{cnt} * 8);
      for (std::uint32_t j = 0; j < cnt; ++j) {
        const TokenId t = r.u32();
        const std::uint32_t c = r.u32();
        if (t >= V) r.fail("token out of range");
        cc.next.emplace_back(t, c);
        cc.total += c;
      }
      m.tables_[n].emplace(std::move(k), std::move(cc));
    }
  }
  r.verify_checksum();
  return m;
}

NGramModel train_ngram_tokens(std::span<const TokenId> tokens, std::size_t order, double alpha,
                              Vocabulary vocab) {
  if (tokens.empty()) throw Error("empty training corpus");
  if (tokens.size() < order) {
    throw Error("training corpus has " + std::to_string(tokens.size()) +
                " tokens, fewer than the model order " + std::to_string(order));
  }
  NGramModel m(order, alpha, std::move(vocab));
  m.add_counts(tokens);
  return m;
}

NGramModel train_ngram(std::istream& corpus, std::size_t order, double alpha, Vocabulary vocab,
                       const SubwordPolicy& policy) {
  std::string text((std::istreambuf_iterator<char>(corpus)), std::istreambuf_iterator<char>());
  auto tok = tokenize(text, vocab, policy);
  return train_ngram_tokens(tok.ids, order, alpha, std::move(vocab));
}

CacheMixture::CacheMixture(LogitProvider& base, double weight, std::size_t window,
                           std::vector<bool> cacheable)
    : base_(base), weight_(weight), window_(window), cacheable_(std::move(cacheable)) {
  if (!(weight >= 0.0 && weight < 1.0)) throw DomainError("cache weight must lie in [0, 1)");
  if (window == 0) throw DomainError("cache window must be positive");
  if (!cacheable_.empty() && cacheable_.size() != base.vocab_size()) {
    throw DomainError("cacheable mask does not match the vocabulary size");
  }
}

LogitVector CacheMixture::next_logits(std::span<const TokenId> context) {
  LogitVector base = base_.next_logits(context);
  if (weight_ == 0.0) return base;
  std::map<TokenId, std::size_t> counts;
  std::size_t total = 0;
  const std::size_t start = context.size() > window_ ? context.size() - window_ : 0;
  for (std::size_t i = start; i < context.size(); ++i) {
    const TokenId t = context[i];
    if (t < base.size() && (cacheable_.empty() || cacheable_[t])) {
      ++counts[t];
      ++total;
    }
  }
  if (total == 0) return base;
  auto p = softmax(base);
  for (auto& x : p) x *= 1.0 - weight_;
  for (const auto& [t, c] : counts) p[t] += weight_ * static_cast<double>(c) / static_cast<double>(total);
  constexpr double kFloor = -708.0;  // log of the smallest normal double
  for (std::size_t i = 0; i < p.size(); ++i) base[i] = p[i] > 0.0 ? std::log(p[i]) : kFloor;
  return base;
}

std::vector<bool> content_token_mask(const Vocabulary& vocab, const StopWords& stop_words) {
  std::vector<bool> mask(vocab.size());
  for (std::size_t i = 0; i < vocab.size(); ++i) {
    const auto& t = vocab.token(static_cast<TokenId>(i));
    mask[i] = is_content_candidate(t) && !stop_words.contains(t);
  }
  return mask;
}

NGramModel load_ngram_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("cannot open model file: " + path);
  return NGramModel::load(in);
}

void save_ngram_file(const NGramModel& model, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open for writing: " + path);
  model.save(out);
}

}  // namespace topicmark
