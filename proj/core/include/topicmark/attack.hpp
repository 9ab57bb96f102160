#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "topicmark/detector.hpp"
#include "topicmark/text.hpp"

namespace topicmark {

enum class PerturbMode { random, targeted };

const char* to_string(PerturbMode m);
PerturbMode parse_perturb_mode(std::string_view s);

/// Edit budget for one text: total = floor(percent * n / 100), split as
/// floor(total/3) insertions, floor(total/3) deletions, and the remainder as
/// substitutions.
struct PerturbationPlan {
  double percent = 0.0;
  std::size_t total_edits = 0;
  std::size_t insertions = 0;
  std::size_t deletions = 0;
  std::size_t substitutions = 0;
  PerturbMode mode = PerturbMode::random;
  std::uint64_t seed = 0;

  static PerturbationPlan make(double percent, std::size_t text_length, PerturbMode mode,
                               std::uint64_t seed);
};

enum class PosTag { noun, verb, adjective, adverb, other };

/// Maps Penn-style tags by first letter (N, V, J, R); anything else is other.
PosTag parse_pos_tag(std::string_view tag);

struct LexicalResources {
  std::vector<std::string> high_freq_words;  // insertion / substitution pool
  std::unordered_map<std::string, std::vector<std::string>> synonyms;
  std::unordered_map<std::string, PosTag> pos;
  StopWords stop_words;

  PosTag tag(std::string_view word) const;
  bool targetable(std::string_view word) const;

  /// Reads high_freq.txt, synonyms.tsv, pos.tsv and (optionally)
  /// stopwords.txt from `dir`; missing stop words fall back to the bundled
  /// English list.
  static LexicalResources load_dir(const std::string& dir);
  void save_dir(const std::string& dir) const;
};

struct PerturbResult {
  std::vector<std::string> words;
  /// Targeted mode found no taggable word and ran in random mode.
  bool fell_back_to_random = false;
  /// Targeted mode ran out of non-stop-word positions; fewer edits applied.
  std::size_t edits_skipped = 0;
  std::size_t synonym_substitutions = 0;
};

/// Applies the plan to a word sequence. Positions for substitutions, then
/// deletions, then insertions are drawn against the original indexing from a
/// stream seeded by plan.seed. Targeted mode only touches non-stop-words
/// tagged N/V/J/R, substitutes synonyms when available, and inserts next to
/// those words. Throws when the plan needs more deletions than there are words.
PerturbResult perturb(std::span<const std::string> text, const PerturbationPlan& plan,
                      const LexicalResources& res);

struct DegradationLevel {
  double percent = 0.0;
  double verdict_rate = 0.0;
  double mean_z = 0.0;
};

struct DegradationTrial {
  std::size_t level = 0;
  std::size_t sample = 0;
  std::size_t trial = 0;
  double z = 0.0;
  bool verdict = false;
};

struct DegradationCurve {
  std::vector<DegradationLevel> levels;
  std::vector<DegradationTrial> trials;  // raw per-trial log
};

struct DegradationOptions {
  std::vector<double> levels{5, 10, 15, 20, 25, 30, 35, 40, 45, 50};
  std::size_t trials = 20;
  PerturbMode mode = PerturbMode::random;
  std::uint64_t seed = 0;
};

/// Perturbs each sample `trials` times per level, re-tokenizes, and detects.
/// `oracle_topics` (one per sample) is only used by Scheme::oracle.
DegradationCurve degradation_curve(const std::vector<std::vector<TokenId>>& samples,
                                   const DetectorContext& ctx, const DetectorConfig& detector,
                                   const LexicalResources& res, const DegradationOptions& options,
                                   const std::vector<std::size_t>& oracle_topics = {});

struct Document {
  std::string id;
  std::string text;
};

/// `id<TAB>text` per line.
std::vector<Document> read_documents(std::istream& in);
std::vector<Document> read_documents_file(const std::string& path);

struct ParaphrasePair {
  std::string id;
  std::vector<TokenId> original;
  std::vector<TokenId> paraphrased;
  std::size_t paraphrase_oov = 0;
};

struct AttackCorpus {
  std::vector<ParaphrasePair> pairs;
  std::size_t total_oov = 0;
};

/// Pairs externally produced rewrites with their originals by id and
/// tokenizes both. Every document must have exactly one partner.
AttackCorpus ingest_paraphrases(const std::vector<Document>& originals,
                                const std::vector<Document>& paraphrased, const Vocabulary& vocab,
                                const SubwordPolicy& policy,
                                std::optional<TokenId> unk = std::nullopt);

}  // namespace topicmark
