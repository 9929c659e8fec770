#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "extrap/energy.hpp"
#include "extrap/errors.hpp"
#include "extrap/vocab.hpp"

namespace extrap {

// Improvement direction of a task's score.
enum class Direction { kHigher, kLower };

// For each threshold, the fraction of scores at or beyond it in the
// improvement direction.
inline std::vector<double> threshold_fractions(const std::vector<double>& scores,
                                               const std::vector<double>& thresholds,
                                               Direction dir = Direction::kHigher) {
  if (scores.empty()) throw ContractError("threshold_fractions: no scores");
  std::vector<double> out;
  out.reserve(thresholds.size());
  for (double th : thresholds) {
    long n = 0;
    for (double s : scores) {
      n += (dir == Direction::kHigher) ? (s >= th) : (s <= th);
    }
    out.push_back(static_cast<double>(n) / scores.size());
  }
  return out;
}

// Fraction strictly beyond the training-range boundary in the improvement
// direction.
inline double extrapolation_rate(const std::vector<double>& scores,
                                 const Interval& range,
                                 Direction dir = Direction::kHigher) {
  if (!(range.lo < range.hi)) throw ContractError("extrapolation_rate: bad range");
  if (scores.empty()) throw ContractError("extrapolation_rate: no scores");
  long n = 0;
  for (double s : scores) {
    n += (dir == Direction::kHigher) ? (s > range.hi) : (s < range.lo);
  }
  return static_cast<double>(n) / scores.size();
}

// Fraction inside-or-beyond the favorable training boundary (the Table 2
// "Training" column analog).
inline double training_range_rate(const std::vector<double>& scores,
                                  const Interval& range,
                                  Direction dir = Direction::kHigher) {
  if (scores.empty()) throw ContractError("training_range_rate: no scores");
  long n = 0;
  for (double s : scores) {
    n += (dir == Direction::kHigher) ? (s >= range.lo) : (s <= range.hi);
  }
  return static_cast<double>(n) / scores.size();
}

struct DiversityReport {
  double unique_fraction = 0.0;
  double mean_overlap4 = 0.0;  // mean ordered-pair 4-gram precision
};

namespace detail {

inline std::map<std::array<int, 4>, int> four_grams(const TokenSeq& x) {
  std::map<std::array<int, 4>, int> g;
  if (x.size() < 4) return g;
  for (std::size_t i = 0; i + 4 <= x.size(); ++i) {
    ++g[{x[i], x[i + 1], x[i + 2], x[i + 3]}];
  }
  return g;
}

}  // namespace detail

// Unique fraction plus clipped 4-gram precision averaged over ordered
// pairs; a pair contributes 0 when either side is shorter than 4 tokens.
inline DiversityReport diversity(const std::vector<TokenSeq>& outputs) {
  if (outputs.size() < 2) throw ContractError("diversity: need at least 2 outputs");
  DiversityReport rep;
  std::set<TokenSeq> distinct(outputs.begin(), outputs.end());
  rep.unique_fraction = static_cast<double>(distinct.size()) / outputs.size();

  std::vector<std::map<std::array<int, 4>, int>> grams;
  grams.reserve(outputs.size());
  for (const auto& x : outputs) grams.push_back(detail::four_grams(x));

  double total = 0.0;
  long pairs = 0;
  for (std::size_t i = 0; i < outputs.size(); ++i) {
    long count_i = 0;
    for (const auto& [g, c] : grams[i]) count_i += c;
    for (std::size_t j = 0; j < outputs.size(); ++j) {
      if (i == j) continue;
      ++pairs;
      if (count_i == 0 || grams[j].empty()) continue;
      long clipped = 0;
      for (const auto& [g, c] : grams[i]) {
        auto it = grams[j].find(g);
        if (it != grams[j].end()) clipped += std::min(c, it->second);
      }
      total += static_cast<double>(clipped) / count_i;
    }
  }
  rep.mean_overlap4 = pairs > 0 ? total / pairs : 0.0;
  return rep;
}

struct MetricsReport {
  long samples = 0;
  std::vector<double> thresholds;
  std::vector<double> threshold_fracs;
  double training_rate = 0.0;
  double extrapolation = 0.0;
  double mean_iterations = 0.0;
  double median_iterations = 0.0;
  double unique_fraction = 0.0;
  double mean_overlap4 = 0.0;
};

inline double median_of(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

// Assemble the full report from oracle scores of final states plus
// iteration counts and the outputs themselves.
inline MetricsReport compute_metrics(const std::vector<double>& oracle_scores,
                                     const std::vector<double>& iterations,
                                     const std::vector<TokenSeq>& outputs,
                                     const Interval& range,
                                     const std::vector<double>& thresholds,
                                     Direction dir = Direction::kHigher) {
  MetricsReport r;
  r.samples = static_cast<long>(oracle_scores.size());
  r.thresholds = thresholds;
  r.threshold_fracs = threshold_fractions(oracle_scores, thresholds, dir);
  r.training_rate = training_range_rate(oracle_scores, range, dir);
  r.extrapolation = extrapolation_rate(oracle_scores, range, dir);
  double mean = 0.0;
  for (double it : iterations) mean += it;
  r.mean_iterations = iterations.empty() ? 0.0 : mean / iterations.size();
  r.median_iterations = median_of(iterations);
  if (outputs.size() >= 2) {
    auto d = diversity(outputs);
    r.unique_fraction = d.unique_fraction;
    r.mean_overlap4 = d.mean_overlap4;
  }
  return r;
}

}  // namespace extrap
