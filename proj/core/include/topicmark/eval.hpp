#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "topicmark/detector.hpp"

namespace topicmark {

enum class Label { watermarked, clean };

struct ScoredDoc {
  std::string id;
  double score = 0.0;
  Label label = Label::clean;
};

using ScoredCorpus = std::vector<ScoredDoc>;

/// Area under the ROC curve. Equal scores form a single threshold step, which
/// is the Mann-Whitney statistic with half credit for ties. Throws unless both
/// labels are present.
double roc_auc(std::span<const ScoredDoc> corpus);

struct F1Result {
  double f1 = 0.0;
  double threshold = 0.0;  // predict watermarked iff score > threshold
};

/// Best F1 over thresholds at -inf, +inf and the midpoints between adjacent
/// distinct scores. Ties in F1 keep the lowest threshold.
F1Result best_f1(std::span<const ScoredDoc> corpus);

enum class TprConvention {
  conservative,  // smallest observed score whose FPR stays within budget
  interpolate,   // linear interpolation on the ROC curve at the budget
};

/// TPR at the FPR budget `fpr_level` in (0, 1).
double tpr_at_fpr(std::span<const ScoredDoc> corpus, double fpr_level,
                  TprConvention convention = TprConvention::conservative);

/// Predict-positive-iff-score>threshold rates.
struct Rates {
  double tpr = 0.0;
  double fpr = 0.0;
};
Rates rates_at(std::span<const ScoredDoc> corpus, double threshold);

struct Summary {
  double mean = 0.0;
  double sd = 0.0;  // sample standard deviation; 0 for a single value
  std::size_t count = 0;
};
Summary summarize(std::span<const double> xs);

struct FprResult {
  double fpr = 0.0;
  std::size_t false_positives = 0;
  std::size_t total = 0;
  Summary z;
};

/// Runs the detector over clean documents and counts positive verdicts.
FprResult fpr_on_clean(const std::vector<std::vector<TokenId>>& clean_docs,
                       const DetectorContext& ctx, const DetectorConfig& detector);

struct MetricsReport {
  std::string group;  // detector / attack label
  std::size_t n_watermarked = 0;
  std::size_t n_clean = 0;
  double roc_auc = 0.0;
  double best_f1 = 0.0;
  double best_f1_threshold = 0.0;
  std::map<double, double> tpr_at;  // FPR budget -> TPR
  double threshold = kDefaultThreshold;
  double fpr_at_threshold = 0.0;
  double tpr_at_threshold = 0.0;
  Summary z_watermarked;
  Summary z_clean;
};

/// Every metric for one scored corpus. `fpr_levels` defaults to 1% and 10%.
MetricsReport compute_metrics(std::span<const ScoredDoc> corpus, double threshold,
                              const std::vector<double>& fpr_levels = {0.01, 0.10},
                              TprConvention convention = TprConvention::conservative);

struct ScalingInput {
  std::size_t k = 0;
  const TopicPartition* partition = nullptr;
  std::vector<std::vector<TokenId>> samples;
};

struct ScalingRow {
  std::size_t k = 0;
  Summary z;
  Summary seconds;  // per-sample detection wall clock
};

struct ScalingOptions {
  double threshold = kDefaultThreshold;
  std::size_t repetitions = 10;
  std::size_t warmup = 2;
};

/// Max-z detection over each K's samples. Timing covers detection only:
/// warmup passes are discarded, then each repetition times one pass over all
/// samples and records the per-sample mean. Throws if the partitions were
/// built over different vocabularies.
std::vector<ScalingRow> scaling_study(const std::vector<ScalingInput>& inputs,
                                      const ScalingOptions& options = {});

}  // namespace topicmark
