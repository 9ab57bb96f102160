#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "topicmark/embedding_store.hpp"
#include "topicmark/error.hpp"
#include "topicmark/rng.hpp"
#include "topicmark/topic_inference.hpp"
#include "topicmark/topic_partition.hpp"

namespace topicmark {

using LogitVector = std::vector<double>;

/// Any next-token scoring source. Must return vocab_size() finite scores and
/// be deterministic for a given context.
class LogitProvider {
 public:
  virtual ~LogitProvider() = default;
  virtual std::size_t vocab_size() const = 0;
  virtual LogitVector next_logits(std::span<const TokenId> context) = 0;
};

struct SamplerConfig {
  bool greedy = false;
  std::optional<std::size_t> top_k;
  double temperature = 1.0;

  /// Accepts "greedy", "top-k:K", "temperature:T" and comma-joined
  /// combinations such as "top-k:50,temperature:0.7".
  static SamplerConfig parse(std::string_view spec);
  std::string to_string() const;
};

/// Numerically stable softmax in double precision.
std::vector<double> softmax(std::span<const double> logits);

/// Greedy takes the argmax (lowest index on ties) without consuming a draw.
/// Otherwise logits are divided by the temperature, optionally truncated to
/// the k highest (ties keep the lower index), renormalized and sampled by
/// inverse CDF in index order with one uniform draw.
TokenId sample(std::span<const double> logits, const SamplerConfig& sampler, CounterRng& rng);

class GenerationError : public Error {
 public:
  GenerationError(const std::string& what, std::size_t step)
      : Error(what + " at step " + std::to_string(step)), step_(step) {}
  std::size_t step() const noexcept { return step_; }

 private:
  std::size_t step_;
};

struct GenerationConfig {
  double delta = 2.0;
  std::size_t max_tokens = 200;
  std::size_t length_tolerance = 5;
  SamplerConfig sampler{false, 50, 1.0};
  std::uint64_t seed = 0;
  std::optional<TokenId> eos_token;
};

struct TraceStep {
  std::size_t step = 0;
  TokenId token = 0;
  std::size_t topic = 0;
  bool green = false;
  double logit_before = 0.0;
  double logit_after = 0.0;
};

struct GenerationTrace {
  std::optional<std::size_t> topic;  // empty for unwatermarked runs
  std::vector<TraceStep> steps;
  bool stopped_at_eos = false;
  /// Output shorter than max_tokens - length_tolerance.
  bool short_output = false;

  /// One JSON object per line.
  void write_jsonl(std::ostream& out) const;
};

struct GenerationResult {
  std::vector<TokenId> tokens;  // excludes the prompt and any EOS token
  GenerationTrace trace;
};

/// Adds delta to every logit whose token lies in list `topic`.
void apply_bias(std::span<double> logits, const TopicPartition& partition, std::size_t topic,
                double delta);

/// Watermarked generation: the green list is fixed once from `choice` before
/// the loop, delta is added to its logits at every step, then the sampler
/// picks the next token.
GenerationResult generate(LogitProvider& provider, const TopicPartition& partition,
                          const TopicChoice& choice, const GenerationConfig& cfg,
                          std::span<const TokenId> prompt);

/// Same loop with no bias step.
GenerationResult generate_unwatermarked(LogitProvider& provider, const GenerationConfig& cfg,
                                        std::span<const TokenId> prompt);

}  // namespace topicmark
