#include "topicmark/synthetic.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <unordered_map>
#include <unordered_set>

#include "topicmark/error.hpp"
#include "topicmark/rng.hpp"

namespace topicmark {

const std::vector<std::string>& topic_inventory() {
  static const std::vector<std::string> names{
      "animals",     "technology",   "sports",      "medicine",       "politics",
      "entertainment", "education",  "finance",     "science",        "law",
      "food",        "travel",       "environment", "religion",       "fashion",
      "history",     "art",          "military",    "gaming",         "literature",
      "parenting",   "space",        "transportation", "psychology",  "agriculture",
      "housing",     "cryptocurrency", "architecture", "economics",   "fitness",
      "relationships", "mythology"};
  return names;
}

std::vector<std::string> topic_inventory(std::size_t k) {
  const auto& all = topic_inventory();
  if (k < 2 || k > all.size()) throw DomainError("topic inventory holds between 2 and 32 topics");
  return {all.begin(), all.begin() + static_cast<std::ptrdiff_t>(k)};
}

namespace {

Vector random_unit(std::size_t dim, CounterRng& rng) {
  Vector v(dim);
  double n = 0.0;
  do {
    for (auto& x : v) x = rng.normal();
    n = l2_norm(v);
  } while (n < 1e-9);
  for (auto& x : v) x /= n;
  return v;
}

// A unit vector whose cosine with the unit vector `t` is exactly `c`.
Vector at_cosine(const Vector& t, double c, CounterRng& rng) {
  Vector u = random_unit(t.size(), rng);
  const double proj = dot(u, t);
  for (std::size_t i = 0; i < u.size(); ++i) u[i] -= proj * t[i];
  const double n = l2_norm(u);
  const double s = std::sqrt(std::max(0.0, 1.0 - c * c));
  Vector v(t.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = c * t[i] + s * u[i] / n;
  return v;
}

// Pronounceable, unique pseudo-words.
class WordForge {
 public:
  explicit WordForge(std::uint64_t seed) : rng_(seed) {}
  void reserve(const std::string& w) { used_.insert(w); }
  std::string make() {
    static constexpr char kCons[] = "bcdfghjklmnprstvz";
    static constexpr char kVow[] = "aeiou";
    while (true) {
      const std::size_t syllables = 2 + rng_.below(3);
      std::string w;
      for (std::size_t s = 0; s < syllables; ++s) {
        w += kCons[rng_.below(sizeof kCons - 1)];
        w += kVow[rng_.below(sizeof kVow - 1)];
      }
      if (rng_.below(3) == 0) w += kCons[rng_.below(sizeof kCons - 1)];
      if (used_.insert(w).second) return w;
    }
  }

 private:
  CounterRng rng_;
  std::unordered_set<std::string> used_;
};

// Zipf-weighted sampler over a fixed list.
class ZipfPool {
 public:
  ZipfPool() = default;
  ZipfPool(std::vector<std::string> words, double s) : words_(std::move(words)) {
    double acc = 0.0;
    for (std::size_t r = 0; r < words_.size(); ++r) {
      acc += 1.0 / std::pow(static_cast<double>(r + 1), s);
      cdf_.push_back(acc);
    }
  }
  bool empty() const { return words_.empty(); }
  const std::string& draw(CounterRng& rng) const {
    const double u = rng.uniform() * cdf_.back();
    auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
    if (it == cdf_.end()) --it;
    return words_[static_cast<std::size_t>(it - cdf_.begin())];
  }

 private:
  std::vector<std::string> words_;
  std::vector<double> cdf_;
};

constexpr int kPosCount = 4;  // noun, verb, adjective, adverb

const std::vector<std::string> kDeterminers{"the", "a", "this", "every", "each", "some", "our", "their"};
const std::vector<std::string> kPrepositions{"of", "with", "in", "near", "under", "for", "from", "about", "on"};
const std::vector<std::string> kConjunctions{"and", "but", "while"};
const std::vector<std::string> kRelatives{"that"};
const std::vector<std::string> kPunctuation{".", ","};

struct Lexicon {
  // pools[topic][pos]; the generic pools are stored at index `topics`.
  std::vector<std::array<ZipfPool, kPosCount>> pools;
  std::vector<std::array<ZipfPool, kPosCount>> variant_pools;
};

class Grammar {
 public:
  Grammar(const Lexicon& lex, const SyntheticOptions& opt) : lex_(lex), opt_(opt) {}

  // Appends one sentence about `topic` to `out`.
  void sentence(std::size_t topic, CounterRng& rng, std::vector<std::string>& out) const {
    clause(topic, rng, out);
    if (rng.uniform() < 0.2) {
      out.push_back(",");
      out.push_back(kConjunctions[rng.below(kConjunctions.size())]);
      clause(topic, rng, out);
    }
    out.push_back(".");
  }

 private:
  void clause(std::size_t topic, CounterRng& rng, std::vector<std::string>& out) const {
    noun_phrase(topic, rng, out);
    if (rng.uniform() < 0.3) out.push_back(content(topic, 3, rng));
    out.push_back(content(topic, 1, rng));
    noun_phrase(topic, rng, out);
    for (double p : {0.6, 0.35}) {
      if (rng.uniform() >= p) break;
      out.push_back(kPrepositions[rng.below(kPrepositions.size())]);
      noun_phrase(topic, rng, out);
    }
    if (rng.uniform() < 0.3) {
      out.push_back("that");
      out.push_back(content(topic, 1, rng));
      noun_phrase(topic, rng, out);
    }
  }

  void noun_phrase(std::size_t topic, CounterRng& rng, std::vector<std::string>& out) const {
    out.push_back(kDeterminers[rng.below(kDeterminers.size())]);
    if (rng.uniform() < 0.4) out.push_back(content(topic, 2, rng));
    out.push_back(content(topic, 0, rng));
  }

  const std::string& content(std::size_t topic, int pos, CounterRng& rng) const {
    const auto p = static_cast<std::size_t>(pos);
    if (rng.uniform() < opt_.topic_rate && !lex_.pools[topic][p].empty()) {
      if (rng.uniform() < 0.1 && !lex_.variant_pools[topic][p].empty()) {
        return lex_.variant_pools[topic][p].draw(rng);
      }
      return lex_.pools[topic][p].draw(rng);
    }
    return lex_.pools[opt_.topics][p].draw(rng);
  }

  const Lexicon& lex_;
  const SyntheticOptions& opt_;
};

void append_words(std::string& text, const std::vector<std::string>& words) {
  for (std::size_t i = 0; i < words.size(); ++i) {
    if (i) text += ' ';
    text += words[i];
  }
}

std::string joined(const std::vector<std::string>& words, std::size_t begin, std::size_t end) {
  std::string s;
  for (std::size_t i = begin; i < end; ++i) {
    if (i > begin) s += ' ';
    s += words[i];
  }
  return s;
}

}  // namespace

SyntheticWorld make_synthetic_world(const SyntheticOptions& opt) {
  if (opt.topics < 2 || opt.topics > topic_inventory().size()) {
    throw DomainError("synthetic world needs between 2 and 32 topics");
  }
  if (opt.prompt_topics < 1 || opt.prompt_topics > opt.topics) {
    throw DomainError("prompt topics must lie in [1, topics]");
  }
  if (!(opt.topic_cos_min > 0.0 && opt.topic_cos_min <= opt.topic_cos_max && opt.topic_cos_max < 1.0)) {
    throw DomainError("topic cosine range must satisfy 0 < min <= max < 1");
  }
  SyntheticWorld world;
  world.topic_names = topic_inventory(opt.topics);
  world.embeddings = EmbeddingTable(opt.dim);

  CounterRng vec_rng(derive_seed(opt.seed, 1));
  CounterRng draw_rng(derive_seed(opt.seed, 2));
  WordForge forge(derive_seed(opt.seed, 3));
  for (const auto& w : StopWords::english().words()) forge.reserve(w);
  for (const auto& n : topic_inventory()) forge.reserve(n);

  std::vector<std::string> vocab_tokens = kPunctuation;
  for (const auto* group : {&kDeterminers, &kPrepositions, &kConjunctions, &kRelatives}) {
    for (const auto& w : *group) {
      vocab_tokens.push_back(w);
      world.embeddings.insert(w, random_unit(opt.dim, vec_rng));
    }
  }

  const std::array<std::size_t, kPosCount> per_topic{opt.nouns_per_topic, opt.verbs_per_topic,
                                                     opt.adjectives_per_topic, opt.adverbs_per_topic};
  const std::array<std::size_t, kPosCount> generic{opt.generic_nouns, opt.generic_verbs,
                                                   opt.generic_adjectives, opt.generic_adverbs};
  const std::array<PosTag, kPosCount> tags{PosTag::noun, PosTag::verb, PosTag::adjective, PosTag::adverb};

  Lexicon lex;
  lex.pools.resize(opt.topics + 1);
  lex.variant_pools.resize(opt.topics + 1);
  std::vector<std::string> content_words;
  auto& res = world.resources;
  res.stop_words = StopWords::english();

  for (std::size_t t = 0; t < opt.topics; ++t) {
    const Vector topic_vec = random_unit(opt.dim, vec_rng);
    world.embeddings.insert(world.topic_names[t], topic_vec);
    content_words.push_back(world.topic_names[t]);
    res.pos[world.topic_names[t]] = PosTag::noun;
    for (int p = 0; p < kPosCount; ++p) {
      std::vector<std::string> words, variants;
      for (std::size_t i = 0; i < per_topic[static_cast<std::size_t>(p)]; ++i) {
        const std::string w = forge.make();
        const std::string v = forge.make();
        const double c = opt.topic_cos_min + (opt.topic_cos_max - opt.topic_cos_min) * vec_rng.uniform();
        const double cv =
            opt.variant_cos_min + (opt.variant_cos_max - opt.variant_cos_min) * vec_rng.uniform();
        world.embeddings.insert(w, at_cosine(topic_vec, c, vec_rng));
        world.embeddings.insert(v, at_cosine(topic_vec, cv, vec_rng));
        res.pos[w] = res.pos[v] = tags[static_cast<std::size_t>(p)];
        res.synonyms[w].push_back(v);
        res.synonyms[v].push_back(w);
        words.push_back(w);
        variants.push_back(v);
        content_words.push_back(w);
        content_words.push_back(v);
      }
      // The topic name itself is a common but not dominant noun.
      if (p == 0) words.insert(words.begin() + static_cast<std::ptrdiff_t>(std::min<std::size_t>(4, words.size())), world.topic_names[t]);
      lex.pools[t][static_cast<std::size_t>(p)] = ZipfPool(words, opt.zipf_exponent);
      lex.variant_pools[t][static_cast<std::size_t>(p)] = ZipfPool(variants, opt.zipf_exponent);
    }
  }
  for (int p = 0; p < kPosCount; ++p) {
    std::vector<std::string> words;
    for (std::size_t i = 0; i < generic[static_cast<std::size_t>(p)]; ++i) {
      const std::string w = forge.make();
      world.embeddings.insert(w, random_unit(opt.dim, vec_rng));
      res.pos[w] = tags[static_cast<std::size_t>(p)];
      words.push_back(w);
      content_words.push_back(w);
    }
    // Same-part-of-speech generic synonyms, two per word.
    for (std::size_t i = 0; i < words.size() && words.size() > 2; ++i) {
      auto& syns = res.synonyms[words[i]];
      while (syns.size() < 2) {
        const auto& s = words[draw_rng.below(words.size())];
        if (s != words[i] && std::find(syns.begin(), syns.end(), s) == syns.end()) syns.push_back(s);
      }
    }
    lex.pools[opt.topics][static_cast<std::size_t>(p)] = ZipfPool(words, opt.zipf_exponent);
  }

  // Content words enter the vocabulary in a shuffled order so that vocabulary
  // position carries no topic information.
  for (std::size_t i = content_words.size(); i > 1; --i) {
    std::swap(content_words[i - 1], content_words[draw_rng.below(i)]);
  }
  vocab_tokens.insert(vocab_tokens.end(), content_words.begin(), content_words.end());
  world.vocab = Vocabulary(std::move(vocab_tokens));

  const Grammar grammar(lex, opt);

  // Training corpus: one document per line, topics drawn uniformly.
  CounterRng corpus_rng(derive_seed(opt.seed, 4));
  std::map<std::string, std::size_t> counts;
  std::vector<std::string> words;
  while (world.corpus.size() < opt.corpus_bytes) {
    const std::size_t topic = corpus_rng.below(opt.topics);
    const std::size_t target = 120 + corpus_rng.below(130);
    words.clear();
    while (words.size() < target) grammar.sentence(topic, corpus_rng, words);
    for (const auto& w : words) ++counts[w];
    append_words(world.corpus, words);
    world.corpus += '\n';
  }

  // Held-out documents split into a prompt prefix and a continuation.
  CounterRng held_rng(derive_seed(opt.seed, 5));
  for (std::size_t d = 0; d < opt.heldout_docs; ++d) {
    const std::size_t topic = d % opt.prompt_topics;
    words.clear();
    while (words.size() < opt.prompt_words + opt.continuation_words) {
      grammar.sentence(topic, held_rng, words);
    }
    const std::string id = "doc" + std::to_string(d);
    world.prompts.push_back({id, joined(words, 0, opt.prompt_words)});
    world.clean.push_back(
        {id, joined(words, opt.prompt_words, opt.prompt_words + opt.continuation_words)});
    world.heldout_topics.push_back(topic);
  }

  std::vector<std::pair<std::string, std::size_t>> ranked(counts.begin(), counts.end());
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  for (std::size_t i = 0; i < ranked.size() && res.high_freq_words.size() < 100; ++i) {
    res.high_freq_words.push_back(ranked[i].first);
  }
  return world;
}

void SyntheticWorld::save(const std::string& dir, std::size_t k_topics) const {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  auto open = [&](const char* name) {
    std::ofstream out(fs::path(dir) / name, std::ios::binary);
    if (!out) throw Error("cannot write " + (fs::path(dir) / name).string());
    return out;
  };
  {
    auto out = open("vocab.txt");
    save_vocabulary(out, vocab);
  }
  {
    auto out = open("embeddings.vec");
    write_embeddings(out, embeddings, EmbeddingFormat::text_vec);
  }
  {
    auto out = open("inventory.txt");
    for (const auto& n : topic_names) out << n << '\n';
  }
  {
    auto out = open("topics.txt");
    for (std::size_t i = 0; i < std::min(k_topics, topic_names.size()); ++i) out << topic_names[i] << '\n';
  }
  {
    auto out = open("corpus.txt");
    out << corpus;
  }
  {
    auto out = open("prompts.tsv");
    for (const auto& d : prompts) out << d.id << '\t' << d.text << '\n';
  }
  {
    auto out = open("clean.tsv");
    for (const auto& d : clean) out << d.id << '\t' << d.text << '\n';
  }
  resources.save_dir((fs::path(dir) / "resources").string());
}

RandomVocabulary make_random_vocabulary(std::size_t size, std::size_t dim, std::size_t topics,
                                        std::uint64_t seed) {
  if (size < topics + 1) throw DomainError("vocabulary too small");
  RandomVocabulary out;
  out.topic_names = topic_inventory(topics);
  out.embeddings = EmbeddingTable(dim);
  CounterRng rng(seed);
  std::vector<Vector> topic_vecs;
  for (const auto& n : out.topic_names) {
    topic_vecs.push_back(random_unit(dim, rng));
    out.embeddings.insert(n, topic_vecs.back());
  }
  std::vector<std::string> tokens;
  std::vector<std::string> whole;
  std::unordered_set<std::string> seen;
  tokens.reserve(size);
  for (std::size_t i = 0; tokens.size() < size; ++i) {
    const double u = rng.uniform();
    if (u < 0.05 && !whole.empty()) {
      // Continuation piece sharing the surface (and so the embedding) of a whole word.
      std::string piece = "##" + whole[rng.below(whole.size())];
      if (seen.insert(piece).second) tokens.push_back(std::move(piece));
      continue;
    }
    std::string w = "w" + std::to_string(i);
    if (u < 0.35) {
      out.embeddings.insert(w, at_cosine(topic_vecs[rng.below(topics)], 0.3 + 0.65 * rng.uniform(), rng));
    } else {
      out.embeddings.insert(w, random_unit(dim, rng));
    }
    seen.insert(w);
    whole.push_back(w);
    tokens.push_back(std::move(w));
  }
  out.vocab = Vocabulary(std::move(tokens));
  return out;
}

}  // namespace topicmark
