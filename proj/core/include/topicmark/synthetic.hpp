#pragma once

// A self-contained synthetic "world" for desk-scale experiments: a vocabulary
// of pseudo-words with topic-structured embeddings, a grammar-generated
// training corpus, held-out prompts and human-style continuations, and the
// lexical resources the perturbation attacks need. Everything is a pure
// function of the options (including the seed).

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "topicmark/attack.hpp"
#include "topicmark/embedding_store.hpp"

namespace topicmark {

/// The 32 broad topics used for topic-count scaling, in the order that the
/// K = 4 / 8 / 16 / 32 inventories extend each other.
const std::vector<std::string>& topic_inventory();
/// First k names of the inventory; k must be 4, 8, 16 or 32 (or any k in [2, 32]).
std::vector<std::string> topic_inventory(std::size_t k);

struct SyntheticOptions {
  std::uint64_t seed = 20240917;
  std::size_t dim = 64;
  std::size_t topics = 32;                 // how many inventory topics get their own words
  std::size_t nouns_per_topic = 36;
  std::size_t verbs_per_topic = 18;
  std::size_t adjectives_per_topic = 14;
  std::size_t adverbs_per_topic = 6;
  double topic_cos_min = 0.35;             // cosine of a topic word to its topic
  double topic_cos_max = 0.85;
  double variant_cos_min = 0.30;           // cosine of a topic word's synonym
  double variant_cos_max = 0.60;
  std::size_t generic_nouns = 800;
  std::size_t generic_verbs = 400;
  std::size_t generic_adjectives = 300;
  std::size_t generic_adverbs = 100;
  double topic_rate = 0.18;                // share of content slots filled with topic words
  double zipf_exponent = 0.9;
  std::size_t corpus_bytes = 1'200'000;    // minimum size of the training corpus
  std::size_t heldout_docs = 200;
  std::size_t prompt_topics = 4;           // held-out documents use the first N topics
  std::size_t prompt_words = 50;
  std::size_t continuation_words = 200;
};

struct SyntheticWorld {
  Vocabulary vocab;
  EmbeddingTable embeddings{1};
  std::vector<std::string> topic_names;    // the first `topics` inventory entries
  std::string corpus;                      // training text, one document per line
  std::vector<Document> prompts;           // held-out prompt prefixes
  std::vector<Document> clean;             // human continuations of those prompts
  std::vector<std::size_t> heldout_topics; // topic index of each held-out document
  LexicalResources resources;

  /// Writes vocab.txt, embeddings.vec, inventory.txt, topics.txt (first
  /// `k_topics` names), corpus.txt, prompts.tsv, clean.tsv and resources/.
  void save(const std::string& dir, std::size_t k_topics = 4) const;
};

SyntheticWorld make_synthetic_world(const SyntheticOptions& options = {});

/// A large vocabulary with random embeddings for partition property tests:
/// `size` tokens, a share of them pulled towards `topic_vectors`, and a few
/// "##"-marked continuation pieces that share the surface of a whole word.
struct RandomVocabulary {
  Vocabulary vocab;
  EmbeddingTable embeddings{1};
  std::vector<std::string> topic_names;
};

RandomVocabulary make_random_vocabulary(std::size_t size, std::size_t dim, std::size_t topics,
                                        std::uint64_t seed);

}  // namespace topicmark
