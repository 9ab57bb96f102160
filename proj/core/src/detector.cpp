#include "topicmark/detector.hpp"

#include <cmath>
#include <limits>

#include "topicmark/error.hpp"

namespace topicmark {

double z_score(std::size_t green, std::size_t n, double gamma) {
  if (n == 0) throw DomainError("z-score: no scoreable tokens");
  if (green > n) throw DomainError("z-score: green count exceeds token count");
  if (!(gamma > 0.0 && gamma < 1.0)) throw DomainError("z-score: gamma must lie in (0, 1)");
  const double nd = static_cast<double>(n);
  return (static_cast<double>(green) - gamma * nd) / std::sqrt(nd * gamma * (1.0 - gamma));
}

const char* to_string(Scheme s) {
  switch (s) {
    case Scheme::strict_embed: return "strict-embed";
    case Scheme::strict_kmeans: return "strict-kmeans";
    case Scheme::sliding: return "sliding";
    case Scheme::max_z: return "max-z";
    case Scheme::oracle: return "oracle";
  }
  return "?";
}

Scheme parse_scheme(std::string_view s) {
  if (s == "strict-embed" || s == "strict") return Scheme::strict_embed;
  if (s == "strict-kmeans") return Scheme::strict_kmeans;
  if (s == "sliding") return Scheme::sliding;
  if (s == "max-z") return Scheme::max_z;
  if (s == "oracle") return Scheme::oracle;
  throw Error("unknown detection scheme '" + std::string(s) + "'");
}

namespace {

void check_tokens(std::span<const TokenId> tokens, const TopicPartition& p, std::size_t min_tokens) {
  if (tokens.size() < std::max<std::size_t>(min_tokens, 1)) {
    throw Error("text has " + std::to_string(tokens.size()) +
                " tokens, below the minimum scoreable length " + std::to_string(min_tokens));
  }
  for (TokenId t : tokens) {
    if (t >= p.vocab_size()) {
      throw Error("token " + std::to_string(t) + " outside the partition vocabulary");
    }
  }
}

std::size_t count_green(std::span<const TokenId> tokens, const TopicPartition& p, std::size_t topic) {
  std::size_t g = 0;
  for (TokenId t : tokens) g += p.contains(topic, t) ? 1 : 0;
  return g;
}

void finish(DetectionReport& r, const TopicPartition& p, std::span<const TokenId> tokens) {
  r.green = count_green(tokens, p, r.topic_index);
  r.scored = tokens.size();
  r.gamma_used = p.gamma(r.topic_index);
  r.z = z_score(r.green, r.scored, r.gamma_used);
  r.verdict = r.z > r.threshold;
}

const DetectorContext& require_inference(const DetectorContext& ctx) {
  if (!ctx.partition || !ctx.vocab || !ctx.embeddings || !ctx.stop_words) {
    throw Error("topic-aware detection needs partition, vocabulary, embeddings and stop words");
  }
  if (ctx.vocab->size() != ctx.partition->vocab_size()) {
    throw Error("vocabulary does not match the partition");
  }
  return ctx;
}

std::optional<TopicChoice> infer(std::span<const TokenId> tokens, const DetectorContext& ctx,
                                 InferenceMethod method) {
  const std::string text =
      detokenize_for_inference(tokens, *ctx.vocab, ctx.partition->subwords());
  if (split_words(text).empty()) return std::nullopt;
  const auto kws = extract_keywords(text, *ctx.embeddings, *ctx.stop_words, ctx.max_keywords);
  if (kws.empty()) return std::nullopt;
  try {
    return choose_topic(kws, ctx.partition->topics(), method);
  } catch (const TopicUndeterminable&) {
    return std::nullopt;
  }
}

}  // namespace

DetectionReport detect_with_topic(std::span<const TokenId> tokens, const TopicPartition& partition,
                                  std::size_t topic, double threshold, std::size_t min_tokens) {
  if (topic >= partition.topic_count()) throw Error("topic index out of range");
  check_tokens(tokens, partition, min_tokens);
  DetectionReport r;
  r.scheme = Scheme::oracle;
  r.threshold = threshold;
  r.topic_index = topic;
  finish(r, partition, tokens);
  return r;
}

DetectionReport detect_max_z(std::span<const TokenId> tokens, const TopicPartition& partition,
                             double threshold, std::size_t min_tokens) {
  check_tokens(tokens, partition, min_tokens);
  DetectionReport r;
  r.scheme = Scheme::max_z;
  r.threshold = threshold;
  r.scored = tokens.size();
  r.per_topic_z.resize(partition.topic_count());
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < partition.topic_count(); ++i) {
    const std::size_t g = count_green(tokens, partition, i);
    const double z = z_score(g, tokens.size(), partition.gamma(i));
    r.per_topic_z[i] = z;
    if (z > best) {
      best = z;
      r.topic_index = i;
      r.green = g;
    }
  }
  r.gamma_used = partition.gamma(r.topic_index);
  r.z = best;
  r.verdict = r.z > r.threshold;
  return r;
}

DetectionReport detect_strict(std::span<const TokenId> tokens, const DetectorContext& ctx,
                              InferenceMethod method, double threshold) {
  require_inference(ctx);
  const auto& p = *ctx.partition;
  check_tokens(tokens, p, ctx.min_tokens);
  auto choice = infer(tokens, ctx, method);
  Scheme scheme = method == InferenceMethod::kmeans ? Scheme::strict_kmeans : Scheme::strict_embed;
  if (method == InferenceMethod::automatic && choice && choice->method == ChoiceMethod::kmeans) {
    scheme = Scheme::strict_kmeans;
  }
  if (!choice) {
    auto r = detect_max_z(tokens, p, threshold, ctx.min_tokens);
    r.scheme = scheme;
    r.fell_back_to_max_z = true;
    return r;
  }
  DetectionReport r;
  r.scheme = scheme;
  r.threshold = threshold;
  r.topic_index = choice->topic_index;
  r.topic_method = choice->method;
  finish(r, p, tokens);
  return r;
}

DetectionReport detect_sliding(std::span<const TokenId> tokens, const DetectorContext& ctx,
                               std::size_t window, double threshold) {
  require_inference(ctx);
  if (window == 0) throw Error("sliding window size must be positive");
  const auto& p = *ctx.partition;
  check_tokens(tokens, p, ctx.min_tokens);

  DetectionReport r;
  r.scheme = Scheme::sliding;
  r.threshold = threshold;
  std::vector<std::size_t> votes(p.topic_count(), 0);
  std::size_t voted = 0;
  for (std::size_t start = 0, w = 0; start < tokens.size(); start += window, ++w) {
    const auto win = tokens.subspan(start, std::min(window, tokens.size() - start));
    WindowVote v;
    v.window = w;
    if (auto choice = infer(win, ctx, InferenceMethod::automatic)) {
      v.topic = choice->topic_index;
      v.z = z_score(count_green(win, p, *v.topic), win.size(), p.gamma(*v.topic));
      ++votes[*v.topic];
      ++voted;
    }
    r.per_window.push_back(v);
  }
  if (voted == 0) {
    auto fallback = detect_max_z(tokens, p, threshold, ctx.min_tokens);
    fallback.scheme = Scheme::sliding;
    fallback.fell_back_to_max_z = true;
    fallback.per_window = std::move(r.per_window);
    return fallback;
  }
  std::size_t best = 0;
  for (std::size_t i = 1; i < votes.size(); ++i) {
    if (votes[i] > votes[best]) best = i;
  }
  r.topic_index = best;
  finish(r, p, tokens);
  return r;
}

std::string detokenize_for_inference(std::span<const TokenId> tokens, const Vocabulary& vocab,
                                     const SubwordPolicy& policy) {
  return detokenize(tokens, vocab, policy);
}

DetectionReport run_detector(std::span<const TokenId> tokens, const DetectorContext& ctx,
                             const DetectorConfig& config, std::optional<std::size_t> oracle_topic) {
  if (!ctx.partition) throw Error("detector context has no partition");
  switch (config.scheme) {
    case Scheme::strict_embed:
      return detect_strict(tokens, ctx, InferenceMethod::embedding_average, config.threshold);
    case Scheme::strict_kmeans:
      return detect_strict(tokens, ctx, InferenceMethod::kmeans, config.threshold);
    case Scheme::sliding:
      return detect_sliding(tokens, ctx, config.window, config.threshold);
    case Scheme::max_z:
      return detect_max_z(tokens, *ctx.partition, config.threshold, ctx.min_tokens);
    case Scheme::oracle:
      if (!oracle_topic) throw Error("oracle detection needs the generation topic");
      return detect_with_topic(tokens, *ctx.partition, *oracle_topic, config.threshold,
                               ctx.min_tokens);
  }
  throw Error("unhandled detection scheme");
}

}  // namespace topicmark
