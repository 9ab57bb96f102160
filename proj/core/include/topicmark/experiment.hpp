#pragma once

// Batch experiments driven by a declarative JSON manifest. Paths inside the
// manifest are resolved relative to the manifest's directory.
//
//   {
//     "vocab": "world/vocab.txt",
//     "embeddings": "world/embeddings.vec",
//     "partition": "k4.tmk",
//     "model": "world.ngram",
//     "prompts": "world/prompts.tsv",
//     "clean": "world/clean.tsv",
//     "resources": "world/resources",              // needed by attacks / degradation
//     "limit": 100,                                // optional cap on documents
//     "generation": {"delta": 3.0, "sampler": "top-k:50", "max_tokens": 200,
//                    "tolerance": 5, "seed": 7, "cache_weight": 0.0},
//     "attacks": [{"name": "random-20", "mode": "random", "percent": 20, "seed": 1}],
//     "paraphrases": "paraphrased.tsv",            // optional, id<TAB>text
//     "detectors": [{"scheme": "max-z"}, {"scheme": "sliding", "window": 50}],
//     "metrics": {"fpr_levels": [0.01, 0.1], "tpr_convention": "conservative"},
//     "degradation": {"levels": [5, 10], "trials": 20, "modes": ["random", "targeted"],
//                     "scheme": "max-z", "samples": 20, "seed": 3}
//   }

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "topicmark/attack.hpp"
#include "topicmark/detector.hpp"
#include "topicmark/eval.hpp"
#include "topicmark/generator.hpp"

namespace topicmark {

struct AttackSpec {
  std::string name;
  PerturbMode mode = PerturbMode::random;
  double percent = 0.0;
  std::uint64_t seed = 0;
};

struct DegradationSpec {
  std::vector<double> levels{5, 10, 15, 20, 25, 30, 35, 40, 45, 50};
  std::size_t trials = 20;
  std::vector<PerturbMode> modes{PerturbMode::random, PerturbMode::targeted};
  DetectorConfig detector;
  std::size_t samples = 20;
  std::uint64_t seed = 0;
};

struct ExperimentManifest {
  std::filesystem::path vocab, embeddings, partition, model, prompts, clean;
  std::optional<std::filesystem::path> resources, paraphrases;
  std::optional<std::size_t> limit;
  GenerationConfig generation;
  double cache_weight = 0.0;        // CacheMixture over the n-gram model when > 0
  std::size_t cache_window = 200;
  std::vector<AttackSpec> attacks;
  std::vector<DetectorConfig> detectors{DetectorConfig{}};
  std::vector<double> fpr_levels{0.01, 0.10};
  TprConvention tpr_convention = TprConvention::conservative;
  std::optional<DegradationSpec> degradation;

  /// Every file or directory the run needs.
  std::vector<std::filesystem::path> artifacts() const;
};

/// Parses manifest JSON; relative paths resolve against `base_dir`.
ExperimentManifest parse_manifest(const std::string& json_text,
                                  const std::filesystem::path& base_dir);
ExperimentManifest load_manifest(const std::filesystem::path& path);

/// One scored document.
struct RawRecord {
  std::string group;     // "none", an attack name, or "paraphrase"
  std::string detector;  // scheme name
  std::string doc;
  Label label = Label::clean;
  double z = 0.0;
  bool verdict = false;
  std::size_t topic = 0;
  std::size_t green = 0;
  std::size_t scored = 0;
  double gamma = 0.0;
};

/// JSON-lines form of the raw log (one record per line, fixed key order).
std::string raw_record_json(const RawRecord& r);
RawRecord parse_raw_record(const std::string& line);

struct ExperimentResult {
  std::vector<MetricsReport> reports;  // one per (group, detector), group = "attack/scheme"
  std::vector<RawRecord> raw;
  std::vector<std::pair<std::string, DegradationCurve>> degradation;  // keyed by mode
};

/// Re-aggregates a raw log into the reports run_experiment would emit.
std::vector<MetricsReport> aggregate_raw(const std::vector<RawRecord>& raw,
                                         const std::vector<DetectorConfig>& detectors,
                                         const std::vector<double>& fpr_levels,
                                         TprConvention convention);

/// Runs the manifest. Fails before doing any work if an artifact is missing.
/// When `out_dir` is given, writes metrics.json and raw.jsonl there, plus
/// roc.csv and degradation.csv when `plot` is set.
ExperimentResult run_experiment(const ExperimentManifest& manifest,
                                const std::optional<std::filesystem::path>& out_dir = std::nullopt,
                                bool plot = false);

std::string metrics_json(const ExperimentResult& result);

}  // namespace topicmark
