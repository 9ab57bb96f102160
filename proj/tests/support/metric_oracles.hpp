#pragma once

// Exhaustive reference implementations of the detection metrics. They count
// directly from the definitions (every pair, every candidate threshold) and
// share no code with the library.

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <vector>

#include "topicmark/eval.hpp"

namespace topicmark::oracle {

inline double auc(const std::vector<ScoredDoc>& c) {
  double concordant = 0, ties = 0, pos = 0, neg = 0;
  for (const auto& a : c) (a.label == Label::watermarked ? pos : neg) += 1;
  for (const auto& p : c) {
    if (p.label != Label::watermarked) continue;
    for (const auto& n : c) {
      if (n.label != Label::clean) continue;
      if (p.score > n.score) concordant += 1;
      else if (p.score == n.score) ties += 1;
    }
  }
  return (concordant + 0.5 * ties) / (pos * neg);
}

struct Confusion {
  double tp = 0, fp = 0, fn = 0, tn = 0;
};

inline Confusion confusion(const std::vector<ScoredDoc>& c, double t) {
  Confusion m;
  for (const auto& d : c) {
    const bool predicted = d.score > t;
    if (d.label == Label::watermarked) (predicted ? m.tp : m.fn) += 1;
    else (predicted ? m.fp : m.tn) += 1;
  }
  return m;
}

/// Thresholds -inf, +inf and every midpoint between adjacent distinct scores.
inline std::vector<double> candidate_thresholds(const std::vector<ScoredDoc>& c) {
  std::set<double> s;
  for (const auto& d : c) s.insert(d.score);
  std::vector<double> u(s.begin(), s.end()), t{-std::numeric_limits<double>::infinity()};
  for (std::size_t i = 0; i + 1 < u.size(); ++i) t.push_back(u[i] + (u[i + 1] - u[i]) / 2.0);
  t.push_back(std::numeric_limits<double>::infinity());
  return t;
}

inline F1Result best_f1(const std::vector<ScoredDoc>& c) {
  F1Result best{-1.0, 0.0};
  for (double t : candidate_thresholds(c)) {  // ascending, so ties keep the lowest
    const auto m = confusion(c, t);
    const double denom = 2 * m.tp + m.fp + m.fn;
    const double f1 = denom == 0 ? 0.0 : 2 * m.tp / denom;
    if (f1 > best.f1) best = {f1, t};
  }
  return best;
}

/// Smallest observed score (or +inf) whose FPR stays within the budget.
inline double tpr_conservative(const std::vector<ScoredDoc>& c, double level) {
  std::vector<double> ts{std::numeric_limits<double>::infinity()};
  for (const auto& d : c) ts.push_back(d.score);
  double best_t = std::numeric_limits<double>::infinity();
  for (double t : ts) {
    const auto m = confusion(c, t);
    if (m.fp / (m.fp + m.tn) <= level && t < best_t) best_t = t;
  }
  const auto m = confusion(c, best_t);
  return m.tp / (m.tp + m.fn);
}

/// Linear interpolation between the ROC vertices that bracket the budget;
/// vertices are (0,0) then one per distinct score, positives being >= score.
inline double tpr_interpolated(const std::vector<ScoredDoc>& c, double level) {
  std::set<double, std::greater<>> scores;
  for (const auto& d : c) scores.insert(d.score);
  std::vector<std::pair<double, double>> roc{{0.0, 0.0}};
  for (double s : scores) {
    double tp = 0, fp = 0, p = 0, n = 0;
    for (const auto& d : c) {
      const bool w = d.label == Label::watermarked;
      (w ? p : n) += 1;
      if (d.score >= s) (w ? tp : fp) += 1;
    }
    roc.push_back({fp / n, tp / p});
  }
  for (std::size_t i = 1; i < roc.size(); ++i) {
    const auto [f0, t0] = roc[i - 1];
    const auto [f1, t1] = roc[i];
    if (f1 >= level) return f1 == f0 ? t1 : t0 + (t1 - t0) * (level - f0) / (f1 - f0);
  }
  return 1.0;
}

}  // namespace topicmark::oracle
