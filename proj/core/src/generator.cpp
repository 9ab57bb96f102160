#include "topicmark/generator.hpp"

#include <algorithm>
#include <charconv>
#include <functional>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>

#include <nlohmann/json.hpp>

namespace topicmark {

double CounterRng::normal() noexcept {
  double u1 = uniform();
  const double u2 = uniform();
  if (u1 <= 0.0) u1 = 0x1.0p-53;
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
}

SamplerConfig SamplerConfig::parse(std::string_view spec) {
  SamplerConfig cfg;
  std::size_t pos = 0;
  bool any = false;
  while (pos <= spec.size()) {
    const std::size_t comma = spec.find(',', pos);
    std::string_view part = spec.substr(pos, comma == std::string_view::npos ? comma : comma - pos);
    pos = comma == std::string_view::npos ? spec.size() + 1 : comma + 1;
    if (part.empty()) continue;
    any = true;
    if (part == "greedy") {
      cfg.greedy = true;
      continue;
    }
    const std::size_t colon = part.find(':');
    if (colon == std::string_view::npos) throw Error("bad sampler spec '" + std::string(spec) + "'");
    const std::string_view key = part.substr(0, colon);
    const std::string_view val = part.substr(colon + 1);
    if (key == "top-k") {
      std::size_t k = 0;
      auto [p, ec] = std::from_chars(val.data(), val.data() + val.size(), k);
      if (ec != std::errc() || p != val.data() + val.size() || k == 0) {
        throw Error("top-k needs a positive integer");
      }
      cfg.top_k = k;
    } else if (key == "temperature") {
      double t = 0.0;
      auto [p, ec] = std::from_chars(val.data(), val.data() + val.size(), t);
      if (ec != std::errc() || p != val.data() + val.size() || !(t > 0.0)) {
        throw Error("temperature must be positive");
      }
      cfg.temperature = t;
    } else {
      throw Error("unknown sampler component '" + std::string(key) + "'");
    }
  }
  if (!any) throw Error("empty sampler spec");
  return cfg;
}

std::string SamplerConfig::to_string() const {
  if (greedy) return "greedy";
  std::string s;
  if (top_k) s = "top-k:" + std::to_string(*top_k);
  if (temperature != 1.0 || s.empty()) {
    char buf[32];
    auto [p, ec] = std::to_chars(buf, buf + sizeof buf, temperature);
    if (!s.empty()) s += ',';
    s += "temperature:" + std::string(buf, p);
  }
  return s;
}

std::vector<double> softmax(std::span<const double> logits) {
  std::vector<double> p(logits.begin(), logits.end());
  if (p.empty()) return p;
  const double m = *std::max_element(p.begin(), p.end());
  double z = 0.0;
  for (double& x : p) {
    x = std::exp(x - m);
    z += x;
  }
  for (double& x : p) x /= z;
  return p;
}

TokenId sample(std::span<const double> logits, const SamplerConfig& sampler, CounterRng& rng) {
  if (logits.empty()) throw Error("sampling from an empty logit vector");
  if (sampler.greedy) {
    return static_cast<TokenId>(std::max_element(logits.begin(), logits.end()) - logits.begin());
  }
  if (!(sampler.temperature > 0.0)) throw Error("temperature must be positive");
  std::vector<double> scaled(logits.begin(), logits.end());
  if (sampler.temperature != 1.0) {
    for (double& x : scaled) x /= sampler.temperature;
  }
  std::vector<std::uint32_t> kept;  // candidate ids in ascending order
  if (sampler.top_k && *sampler.top_k < scaled.size()) {
    // The k largest logits, ties at the cut going to the lowest ids.
    const std::size_t k = *sampler.top_k;
    std::vector<double> values(scaled);
    std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(k - 1), values.end(),
                     std::greater<>());
    const double cut = values[k - 1];
    std::size_t at_cut = k - static_cast<std::size_t>(
                                 std::count_if(scaled.begin(), scaled.end(), [&](double x) { return x > cut; }));
    kept.reserve(k);
    for (std::size_t i = 0; i < scaled.size(); ++i) {
      if (scaled[i] > cut) {
        kept.push_back(static_cast<std::uint32_t>(i));
      } else if (scaled[i] == cut && at_cut > 0) {
        kept.push_back(static_cast<std::uint32_t>(i));
        --at_cut;
      }
    }
  } else {
    kept.resize(scaled.size());
    std::iota(kept.begin(), kept.end(), 0u);
  }
  std::vector<double> kept_logits(kept.size());
  for (std::size_t i = 0; i < kept.size(); ++i) kept_logits[i] = scaled[kept[i]];
  const auto p = softmax(kept_logits);
  const double u = rng.uniform();
  double acc = 0.0;
  std::size_t last_positive = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] <= 0.0) continue;
    last_positive = i;
    acc += p[i];
    if (u < acc) return static_cast<TokenId>(kept[i]);
  }
  return static_cast<TokenId>(kept[last_positive]);
}

void GenerationTrace::write_jsonl(std::ostream& out) const {
  for (const auto& s : steps) {
    nlohmann::json j{{"step", s.step},
                     {"token", s.token},
                     {"green", s.green},
                     {"logit_before", s.logit_before},
                     {"logit_after", s.logit_after}};
    if (topic) j["topic"] = s.topic;
    out << j.dump() << '\n';
  }
}

void apply_bias(std::span<double> logits, const TopicPartition& partition, std::size_t topic,
                double delta) {
  for (TokenId id : partition.list(topic)) logits[id] += delta;
}

namespace {

GenerationResult run_loop(LogitProvider& provider, const TopicPartition* partition,
                          std::optional<std::size_t> topic, const GenerationConfig& cfg,
                          std::span<const TokenId> prompt) {
  if (prompt.empty()) throw Error("generation needs a non-empty prompt");
  if (cfg.max_tokens == 0) throw Error("max_tokens must be positive");
  if (!(cfg.delta >= 0.0) || !std::isfinite(cfg.delta)) throw Error("delta must be finite and >= 0");
  const std::size_t V = provider.vocab_size();
  if (partition && partition->vocab_size() != V) {
    throw Error("provider vocabulary (" + std::to_string(V) + ") differs from partition (" +
                std::to_string(partition->vocab_size()) + ")");
  }
  for (TokenId t : prompt) {
    if (t >= V) throw Error("prompt token " + std::to_string(t) + " outside vocabulary");
  }

  GenerationResult out;
  out.trace.topic = topic;
  std::vector<TokenId> context(prompt.begin(), prompt.end());
  CounterRng rng(cfg.seed);
  for (std::size_t step = 0; step < cfg.max_tokens; ++step) {
    LogitVector logits = provider.next_logits(context);
    if (logits.size() != V) {
      throw GenerationError("provider returned " + std::to_string(logits.size()) +
                                " logits for a vocabulary of " + std::to_string(V),
                            step);
    }
    for (double x : logits) {
      if (!std::isfinite(x)) throw GenerationError("non-finite logit", step);
    }
    LogitVector biased = logits;
    if (partition) apply_bias(biased, *partition, *topic, cfg.delta);
    const TokenId next = sample(biased, cfg.sampler, rng);

    TraceStep ts;
    ts.step = step;
    ts.token = next;
    ts.topic = topic.value_or(0);
    ts.green = partition ? partition->contains(*topic, next) : false;
    ts.logit_before = logits[next];
    ts.logit_after = biased[next];
    out.trace.steps.push_back(ts);

    if (cfg.eos_token && next == *cfg.eos_token) {
      out.trace.stopped_at_eos = true;
      break;
    }
    out.tokens.push_back(next);
    context.push_back(next);
  }
  out.trace.short_output =
      out.tokens.size() + cfg.length_tolerance < cfg.max_tokens;
  return out;
}

}  // namespace

GenerationResult generate(LogitProvider& provider, const TopicPartition& partition,
                          const TopicChoice& choice, const GenerationConfig& cfg,
                          std::span<const TokenId> prompt) {
  if (choice.topic_index >= partition.topic_count()) {
    throw Error("chosen topic index " + std::to_string(choice.topic_index) +
                " outside partition with " + std::to_string(partition.topic_count()) + " lists");
  }
  return run_loop(provider, &partition, choice.topic_index, cfg, prompt);
}

GenerationResult generate_unwatermarked(LogitProvider& provider, const GenerationConfig& cfg,
                                        std::span<const TokenId> prompt) {
  return run_loop(provider, nullptr, std::nullopt, cfg, prompt);
}

}  // namespace topicmark
