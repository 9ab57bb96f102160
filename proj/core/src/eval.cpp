#include "topicmark/eval.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>

#include "topicmark/error.hpp"

namespace topicmark {

namespace {

struct Counts {
  std::size_t pos = 0;
  std::size_t neg = 0;
};

Counts count_labels(std::span<const ScoredDoc> corpus) {
  Counts c;
  for (const auto& d : corpus) {
    if (std::isnan(d.score)) throw Error("NaN score in corpus");
    (d.label == Label::watermarked ? c.pos : c.neg)++;
  }
  if (c.pos == 0 || c.neg == 0) {
    throw Error("metric needs both watermarked and clean documents");
  }
  return c;
}

// Score groups in descending order: (score, positives, negatives).
struct Group {
  double score;
  std::size_t pos;
  std::size_t neg;
};

std::vector<Group> groups_descending(std::span<const ScoredDoc> corpus) {
  std::vector<std::pair<double, bool>> v;
  v.reserve(corpus.size());
  for (const auto& d : corpus) v.emplace_back(d.score, d.label == Label::watermarked);
  std::sort(v.begin(), v.end(), [](auto& a, auto& b) { return a.first > b.first; });
  std::vector<Group> g;
  for (const auto& [s, pos] : v) {
    if (g.empty() || g.back().score != s) g.push_back({s, 0, 0});
    (pos ? g.back().pos : g.back().neg)++;
  }
  return g;
}

}  // namespace

double roc_auc(std::span<const ScoredDoc> corpus) {
  const Counts c = count_labels(corpus);
  // Twice the trapezoid area, kept integral: each group adds
  // neg_g * (2 * positives_above + pos_g).
  std::uint64_t twice_area = 0;
  std::uint64_t tp_above = 0;
  for (const auto& g : groups_descending(corpus)) {
    twice_area += g.neg * (2 * tp_above + g.pos);
    tp_above += g.pos;
  }
  return static_cast<double>(twice_area) / (2.0 * static_cast<double>(c.pos) * static_cast<double>(c.neg));
}

Rates rates_at(std::span<const ScoredDoc> corpus, double threshold) {
  const Counts c = count_labels(corpus);
  std::size_t tp = 0, fp = 0;
  for (const auto& d : corpus) {
    if (d.score > threshold) (d.label == Label::watermarked ? tp : fp)++;
  }
  return {static_cast<double>(tp) / static_cast<double>(c.pos),
          static_cast<double>(fp) / static_cast<double>(c.neg)};
}

F1Result best_f1(std::span<const ScoredDoc> corpus) {
  const Counts c = count_labels(corpus);
  auto groups = groups_descending(corpus);
  std::reverse(groups.begin(), groups.end());  // ascending
  auto f1 = [&](std::size_t tp, std::size_t fp) {
    const std::size_t fn = c.pos - tp;
    const std::size_t denom = 2 * tp + fp + fn;
    return denom == 0 ? 0.0 : 2.0 * static_cast<double>(tp) / static_cast<double>(denom);
  };
  // Threshold -inf: everything predicted positive.
  std::size_t tp = c.pos, fp = c.neg;
  F1Result best{f1(tp, fp), -std::numeric_limits<double>::infinity()};
  for (std::size_t i = 0; i < groups.size(); ++i) {
    tp -= groups[i].pos;
    fp -= groups[i].neg;
    const double t = i + 1 < groups.size()
                         ? groups[i].score + (groups[i + 1].score - groups[i].score) / 2.0
                         : std::numeric_limits<double>::infinity();
    const double v = f1(tp, fp);
    if (v > best.f1) best = {v, t};
  }
  return best;
}

double tpr_at_fpr(std::span<const ScoredDoc> corpus, double fpr_level, TprConvention convention) {
  if (!(fpr_level > 0.0 && fpr_level < 1.0)) throw DomainError("FPR level must lie in (0, 1)");
  const Counts c = count_labels(corpus);
  const auto groups = groups_descending(corpus);
  const double P = static_cast<double>(c.pos), N = static_cast<double>(c.neg);

  if (convention == TprConvention::conservative) {
    // Threshold at each distinct score s predicts positive for scores > s.
    // Walking downward, FPR only grows; stop before it exceeds the budget.
    std::size_t tp = 0, fp = 0;  // counts strictly above the current threshold
    double tpr = 0.0;            // threshold +inf
    for (const auto& g : groups) {
      if (static_cast<double>(fp) / N > fpr_level) break;
      tpr = static_cast<double>(tp) / P;
      tp += g.pos;
      fp += g.neg;
    }
    return tpr;
  }

  // ROC vertices from (0,0), including each score group in turn.
  double prev_fpr = 0.0, prev_tpr = 0.0;
  std::size_t tp = 0, fp = 0;
  for (const auto& g : groups) {
    tp += g.pos;
    fp += g.neg;
    const double f = static_cast<double>(fp) / N, t = static_cast<double>(tp) / P;
    if (f >= fpr_level) {
      if (f == prev_fpr) return t;
      return prev_tpr + (t - prev_tpr) * (fpr_level - prev_fpr) / (f - prev_fpr);
    }
    prev_fpr = f;
    prev_tpr = t;
  }
  return 1.0;
}

Summary summarize(std::span<const double> xs) {
  Summary s;
  s.count = xs.size();
  if (xs.empty()) return s;
  s.mean = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
  if (xs.size() > 1) {
    double ss = 0.0;
    for (double x : xs) ss += (x - s.mean) * (x - s.mean);
    s.sd = std::sqrt(ss / static_cast<double>(xs.size() - 1));
  }
  return s;
}

FprResult fpr_on_clean(const std::vector<std::vector<TokenId>>& clean_docs,
                       const DetectorContext& ctx, const DetectorConfig& detector) {
  if (clean_docs.empty()) throw Error("FPR analysis needs clean documents");
  if (detector.scheme == Scheme::oracle) throw Error("FPR analysis cannot use oracle detection");
  FprResult r;
  std::vector<double> zs;
  zs.reserve(clean_docs.size());
  for (const auto& doc : clean_docs) {
    const auto report = run_detector(doc, ctx, detector);
    zs.push_back(report.z);
    r.false_positives += report.verdict ? 1 : 0;
  }
  r.total = clean_docs.size();
  r.fpr = static_cast<double>(r.false_positives) / static_cast<double>(r.total);
  r.z = summarize(zs);
  return r;
}

MetricsReport compute_metrics(std::span<const ScoredDoc> corpus, double threshold,
                              const std::vector<double>& fpr_levels, TprConvention convention) {
  MetricsReport m;
  std::vector<double> zw, zc;
  for (const auto& d : corpus) (d.label == Label::watermarked ? zw : zc).push_back(d.score);
  m.n_watermarked = zw.size();
  m.n_clean = zc.size();
  m.z_watermarked = summarize(zw);
  m.z_clean = summarize(zc);
  m.roc_auc = roc_auc(corpus);
  const auto f1 = best_f1(corpus);
  m.best_f1 = f1.f1;
  m.best_f1_threshold = f1.threshold;
  for (double level : fpr_levels) m.tpr_at[level] = tpr_at_fpr(corpus, level, convention);
  m.threshold = threshold;
  const auto rates = rates_at(corpus, threshold);
  m.fpr_at_threshold = rates.fpr;
  m.tpr_at_threshold = rates.tpr;
  return m;
}

std::vector<ScalingRow> scaling_study(const std::vector<ScalingInput>& inputs,
                                      const ScalingOptions& options) {
  if (inputs.empty()) throw Error("scaling study needs at least one K");
  if (options.repetitions == 0) throw Error("scaling study needs at least one repetition");
  for (const auto& in : inputs) {
    if (!in.partition) throw Error("scaling input without a partition");
    if (in.samples.empty()) throw Error("scaling input without samples");
    if (in.partition->vocab_fingerprint() != inputs.front().partition->vocab_fingerprint()) {
      throw Error("scaling study partitions were built over different vocabularies (" +
                  fingerprint_hex(in.partition->vocab_fingerprint()) + " vs " +
                  fingerprint_hex(inputs.front().partition->vocab_fingerprint()) + ")");
    }
  }
  std::vector<ScalingRow> rows;
  volatile double sink = 0.0;
  for (const auto& in : inputs) {
    ScalingRow row;
    row.k = in.k;
    std::vector<double> zs;
    for (const auto& s : in.samples) zs.push_back(detect_max_z(s, *in.partition, options.threshold).z);
    row.z = summarize(zs);

    auto pass = [&] {
      double acc = 0.0;
      for (const auto& s : in.samples) acc += detect_max_z(s, *in.partition, options.threshold).z;
      sink = sink + acc;
    };
    for (std::size_t w = 0; w < options.warmup; ++w) pass();
    std::vector<double> secs;
    for (std::size_t r = 0; r < options.repetitions; ++r) {
      const auto t0 = std::chrono::steady_clock::now();
      pass();
      const auto t1 = std::chrono::steady_clock::now();
      secs.push_back(std::chrono::duration<double>(t1 - t0).count() /
                     static_cast<double>(in.samples.size()));
    }
    row.seconds = summarize(secs);
    rows.push_back(row);
  }
  return rows;
}

}  // namespace topicmark
