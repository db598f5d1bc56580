#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "prs/partitioning.hpp"
#include "prs/replay_memory.hpp"
#include "prs/types.hpp"

namespace prs {

//! The seven standard multi-label classification scores.
struct MultilabelMetrics {
  double c_precision = 0.0;
  double c_recall = 0.0;
  double c_f1 = 0.0;
  double o_precision = 0.0;
  double o_recall = 0.0;
  double o_f1 = 0.0;
  double map = 0.0;
  //! Classes in scope that had no positive label and were therefore left out
  //! of the per-class averages.
  std::vector<ClassId> skipped;
};

namespace detail {

inline double safe_ratio(double num, double den) {
  return den > 0.0 ? num / den : 0.0;
}

inline double f1_of(double p, double r) {
  return p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0;
}

//! Average precision of one class's score ranking.
//!
//! Ties are resolved pessimistically: every positive in a tied block is
//! scored with the precision at the end of the block, i.e. after all tied
//! negatives have been counted into the denominator. With all scores equal
//! this reduces to the class prevalence.
inline double average_precision(const std::vector<double>& scores,
                                const std::vector<std::uint8_t>& positives) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return scores[a] > scores[b];
  });

  double sum = 0.0;
  std::size_t total_positives = 0;
  std::size_t seen = 0;
  std::size_t seen_positives = 0;
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    std::size_t block_positives = 0;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) {
      if (positives[order[j]]) ++block_positives;
      ++j;
    }
    seen += j - i;
    seen_positives += block_positives;
    sum += static_cast<double>(block_positives) *
           static_cast<double>(seen_positives) / static_cast<double>(seen);
    total_positives += block_positives;
    i = j;
  }
  return total_positives > 0 ? sum / static_cast<double>(total_positives) : 0.0;
}

}  // namespace detail

//! Compute C-P/C-R/C-F1 (macro), O-P/O-R/O-F1 (micro) and mAP.
//!
//! Predictions are scores >= threshold. The macro averages and mAP cover the
//! classes in scope that appear at least once in the labels; the micro pool
//! covers every (sample, class) pair in scope. `class_subset`, when given,
//! restricts the scope to those class ids; otherwise the scope is every
//! column of `scores`.
inline MultilabelMetrics multilabel_metrics(
    const std::vector<std::vector<double>>& scores,
    const std::vector<MultiHotLabel>& labels, double threshold,
    const std::vector<ClassId>* class_subset = nullptr) {
  if (scores.empty() || labels.empty())
    throw DimensionError("metrics require at least one sample");
  if (scores.size() != labels.size())
    throw DimensionError("scores and labels row counts differ");
  const std::size_t num_classes = scores.front().size();
  for (const auto& row : scores)
    if (row.size() != num_classes)
      throw DimensionError("ragged score matrix");

  std::vector<ClassId> scope;
  if (class_subset) {
    scope = *class_subset;
  } else {
    scope.resize(num_classes);
    std::iota(scope.begin(), scope.end(), ClassId{0});
  }

  MultilabelMetrics out;
  double micro_tp = 0.0, micro_fp = 0.0, micro_fn = 0.0;
  double macro_p = 0.0, macro_r = 0.0, macro_f1 = 0.0, map_sum = 0.0;
  std::size_t present = 0;

  std::vector<double> class_scores(labels.size());
  std::vector<std::uint8_t> class_positives(labels.size());
  for (ClassId c : scope) {
    if (c >= num_classes)
      throw DimensionError("class id " + std::to_string(c) +
                           " outside the score matrix");
    std::size_t tp = 0, fp = 0, fn = 0, positives = 0;
    for (std::size_t n = 0; n < labels.size(); ++n) {
      const bool truth = labels[n].test(c);
      const bool predicted = scores[n][c] >= threshold;
      if (truth && predicted) ++tp;
      if (!truth && predicted) ++fp;
      if (truth && !predicted) ++fn;
      if (truth) ++positives;
      class_scores[n] = scores[n][c];
      class_positives[n] = truth ? 1 : 0;
    }
    micro_tp += static_cast<double>(tp);
    micro_fp += static_cast<double>(fp);
    micro_fn += static_cast<double>(fn);
    if (positives == 0) {
      out.skipped.push_back(c);
      continue;
    }
    ++present;
    const double p = detail::safe_ratio(static_cast<double>(tp),
                                        static_cast<double>(tp + fp));
    const double r = detail::safe_ratio(static_cast<double>(tp),
                                        static_cast<double>(tp + fn));
    macro_p += p;
    macro_r += r;
    macro_f1 += detail::f1_of(p, r);
    map_sum += detail::average_precision(class_scores, class_positives);
  }

  if (present > 0) {
    out.c_precision = macro_p / static_cast<double>(present);
    out.c_recall = macro_r / static_cast<double>(present);
    out.c_f1 = macro_f1 / static_cast<double>(present);
    out.map = map_sum / static_cast<double>(present);
  }
  out.o_precision = detail::safe_ratio(micro_tp, micro_tp + micro_fp);
  out.o_recall = detail::safe_ratio(micro_tp, micro_tp + micro_fn);
  out.o_f1 = detail::f1_of(out.o_precision, out.o_recall);
  return out;
}

//! Per-checkpoint, per-task history of one metric. values[k][j] is the
//! metric on task j measured after training through task k (defined for
//! j <= k).
struct PerformanceMatrix {
  std::string metric;
  std::vector<std::vector<double>> values;
};

//! Normalized forgetting after checkpoint k (0-based, k >= 1): the mean over
//! past tasks of the relative drop from the task's best historical value to
//! its current value. Tasks whose historical values are all zero contribute
//! zero (nothing was learned, so nothing was forgotten).
inline double normalized_forgetting(const PerformanceMatrix& perf,
                                    std::size_t k) {
  if (k < 1 || k >= perf.values.size())
    throw ContractError("forgetting needs at least two checkpoints");
  double sum = 0.0;
  for (std::size_t j = 0; j < k; ++j) {
    if (j >= perf.values[k].size()) continue;
    double worst = -std::numeric_limits<double>::infinity();
    bool defined = false;
    for (std::size_t l = j; l < k; ++l) {
      if (j >= perf.values[l].size()) continue;
      const double past = perf.values[l][j];
      if (past == 0.0) continue;
      defined = true;
      worst = std::max(worst, (past - perf.values[k][j]) / std::abs(past));
    }
    sum += defined ? worst : 0.0;
  }
  return sum / static_cast<double>(k);
}

//! L1 distance between the normalized memory class distribution and the
//! target ratios; lies in [0, 2].
inline double memory_distribution_distance(const ReplayMemory& memory,
                                           const TargetPartition& target) {
  if (memory.empty())
    throw ContractError("distribution distance requires a non-empty memory");
  const double total = static_cast<double>(memory.total_label_count());
  double distance = 0.0;
  for (ClassId c : target.observed)
    distance += std::abs(static_cast<double>(memory.class_count(c)) / total -
                         target.ratios[c]);
  return distance;
}

//! Trace of the covariance of the given vectors: the sum over coordinates of
//! the population variance (normalized by the number of vectors).
inline double gradient_variance_trace(
    const std::vector<std::vector<double>>& gradients) {
  if (gradients.empty())
    throw DimensionError("variance trace requires at least one vector");
  const std::size_t dim = gradients.front().size();
  for (const auto& g : gradients)
    if (g.size() != dim) throw DimensionError("gradient dimensions differ");

  std::vector<double> mean(dim, 0.0);
  for (const auto& g : gradients)
    for (std::size_t i = 0; i < dim; ++i) mean[i] += g[i];
  for (double& m : mean) m /= static_cast<double>(gradients.size());

  double trace = 0.0;
  for (const auto& g : gradients)
    for (std::size_t i = 0; i < dim; ++i) {
      const double d = g[i] - mean[i];
      trace += d * d;
    }
  return trace / static_cast<double>(gradients.size());
}

}  // namespace prs
