#pragma once

// Independent brute-force reference implementations used to cross-check the
// library. Everything here recomputes from first principles with per-item
// loops and must stay decoupled from the code paths under test.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <set>
#include <vector>

#include "prs/curation.hpp"
#include "prs/metrics.hpp"
#include "prs/replay_memory.hpp"
#include "prs/types.hpp"

namespace oracles {

using prs::ClassId;
using prs::SampleId;

//! Recount the memory's class counts straight from the stored labels.
inline std::vector<std::size_t> recount_class_counts(
    const prs::ReplayMemory& memory, std::size_t num_classes) {
  std::vector<std::size_t> counts(num_classes, 0);
  for (const auto& [id, ex] : memory.samples())
    for (ClassId c = 0; c < num_classes; ++c)
      if (ex.label.test(c)) ++counts[c];
  return counts;
}

//! Brute-force candidate set: score every carrier of over_class by the
//! number of classes that are not over-occupied and absent from its label.
inline std::vector<SampleId> candidate_set(const prs::ReplayMemory& memory,
                                           ClassId over_class,
                                           const std::vector<double>& ratios,
                                           std::size_t num_classes) {
  const std::vector<std::size_t> counts =
      recount_class_counts(memory, num_classes);
  double total = 0.0;
  for (std::size_t l : counts) total += static_cast<double>(l);

  std::vector<double> delta(num_classes);
  for (ClassId c = 0; c < num_classes; ++c)
    delta[c] = static_cast<double>(counts[c]) - ratios[c] * total;

  std::vector<SampleId> carriers;
  for (const auto& [id, ex] : memory.samples())
    if (ex.label.test(over_class)) carriers.push_back(id);

  std::vector<long> scores;
  long best = std::numeric_limits<long>::min();
  for (SampleId id : carriers) {
    const auto& label = memory.at(id).label;
    long score = 0;
    for (ClassId c = 0; c < num_classes; ++c)
      if (delta[c] <= 0.0 && !label.test(c)) ++score;
    scores.push_back(score);
    best = std::max(best, score);
  }
  std::vector<SampleId> out;
  for (std::size_t i = 0; i < carriers.size(); ++i)
    if (scores[i] == best) out.push_back(carriers[i]);
  return out;
}

//! Brute-force removal scoring: every candidate's post-removal distance to
//! the target ratios; returns the whole argmin set.
inline std::vector<SampleId> removal_argmin(
    const prs::ReplayMemory& memory, const std::vector<SampleId>& candidates,
    const std::vector<double>& ratios, std::size_t num_classes) {
  std::vector<double> distances;
  double best = std::numeric_limits<double>::infinity();
  for (SampleId k : candidates) {
    std::vector<double> counts(num_classes, 0.0);
    for (const auto& [id, ex] : memory.samples()) {
      if (id == k) continue;
      for (ClassId c = 0; c < num_classes; ++c)
        if (ex.label.test(c)) counts[c] += 1.0;
    }
    double total = 0.0;
    for (double v : counts) total += v;
    double distance = 0.0;
    for (ClassId c = 0; c < num_classes; ++c)
      distance += std::abs(counts[c] - ratios[c] * total);
    distances.push_back(distance);
    best = std::min(best, distance);
  }
  std::vector<SampleId> out;
  for (std::size_t i = 0; i < candidates.size(); ++i)
    if (distances[i] == best) out.push_back(candidates[i]);
  return out;
}

//! Counting reference for the multi-label metrics, O(N^2 C) on purpose.
struct MetricCounts {
  double c_p = 0, c_r = 0, c_f1 = 0, o_p = 0, o_r = 0, o_f1 = 0, map = 0;
};

inline MetricCounts multilabel_metrics(
    const std::vector<std::vector<double>>& scores,
    const std::vector<prs::MultiHotLabel>& labels, double threshold,
    const std::vector<ClassId>& scope) {
  MetricCounts out;
  double tp_all = 0, predicted_all = 0, truth_all = 0;
  std::size_t present = 0;
  for (ClassId c : scope) {
    double tp = 0, predicted = 0, truth = 0;
    for (std::size_t n = 0; n < labels.size(); ++n) {
      const bool pos = labels[n].test(c);
      const bool pred = scores[n][c] >= threshold;
      if (pos) ++truth;
      if (pred) ++predicted;
      if (pos && pred) ++tp;
    }
    tp_all += tp;
    predicted_all += predicted;
    truth_all += truth;
    if (truth == 0) continue;
    ++present;
    const double p = predicted > 0 ? tp / predicted : 0.0;
    const double r = tp / truth;
    out.c_p += p;
    out.c_r += r;
    out.c_f1 += (p + r > 0 ? 2 * p * r / (p + r) : 0.0);

    // AP: each positive contributes precision over everything scoring at
    // least as high as it does (ties included on both sides).
    double ap = 0.0;
    for (std::size_t n = 0; n < labels.size(); ++n) {
      if (!labels[n].test(c)) continue;
      double at_least = 0, pos_at_least = 0;
      for (std::size_t m = 0; m < labels.size(); ++m) {
        if (scores[m][c] >= scores[n][c]) {
          ++at_least;
          if (labels[m].test(c)) ++pos_at_least;
        }
      }
      ap += pos_at_least / at_least;
    }
    out.map += ap / truth;
  }
  if (present > 0) {
    out.c_p /= static_cast<double>(present);
    out.c_r /= static_cast<double>(present);
    out.c_f1 /= static_cast<double>(present);
    out.map /= static_cast<double>(present);
  }
  out.o_p = predicted_all > 0 ? tp_all / predicted_all : 0.0;
  out.o_r = truth_all > 0 ? tp_all / truth_all : 0.0;
  out.o_f1 = out.o_p + out.o_r > 0
                 ? 2 * out.o_p * out.o_r / (out.o_p + out.o_r)
                 : 0.0;
  return out;
}

//! Literal transcription of the bottom-up clustering with per-image loops.
struct ClusteringState {
  std::vector<std::uint64_t> elem;
  std::map<std::pair<std::size_t, std::size_t>, std::uint64_t> co;
  std::pair<std::size_t, std::size_t> merged;
  std::vector<std::vector<ClassId>> groups;  // after the merge
};

inline bool subset_of(const std::vector<ClassId>& labels,
                      const std::vector<ClassId>& group) {
  return std::includes(group.begin(), group.end(), labels.begin(),
                       labels.end());
}

inline std::vector<ClusteringState> clustering_steps(
    const prs::AnnotationCorpus& corpus, std::size_t ngroups, double beta) {
  std::vector<std::vector<ClassId>> label_sets;
  for (const auto& image : corpus.images)
    label_sets.push_back(corpus.label_ids(image));

  std::vector<std::vector<ClassId>> groups;
  for (ClassId c = 0; c < corpus.class_vocab.size(); ++c) groups.push_back({c});

  std::vector<ClusteringState> states;
  while (groups.size() > ngroups) {
    ClusteringState state;
    state.elem.assign(groups.size(), 0);
    for (const auto& labels : label_sets)
      for (std::size_t g = 0; g < groups.size(); ++g)
        if (subset_of(labels, groups[g])) ++state.elem[g];

    for (const auto& labels : label_sets) {
      for (std::size_t j = 0; j + 1 < groups.size(); ++j) {
        for (std::size_t k = j + 1; k < groups.size(); ++k) {
          if (subset_of(labels, groups[j]) || subset_of(labels, groups[k]))
            continue;
          std::vector<ClassId> merged;
          std::merge(groups[j].begin(), groups[j].end(), groups[k].begin(),
                     groups[k].end(), std::back_inserter(merged));
          if (subset_of(labels, merged)) ++state.co[{j, k}];
        }
      }
    }

    double best = -std::numeric_limits<double>::infinity();
    std::pair<std::size_t, std::size_t> best_pair{0, 1};
    bool found = false;
    for (std::size_t j = 0; j + 1 < groups.size(); ++j) {
      for (std::size_t k = j + 1; k < groups.size(); ++k) {
        const auto it = state.co.find({j, k});
        const std::uint64_t co = it == state.co.end() ? 0 : it->second;
        double score;
        if (co == 0) {
          score = -std::numeric_limits<double>::infinity();
        } else {
          const double sum =
              static_cast<double>(state.elem[j] + state.elem[k]);
          score = std::log(static_cast<double>(co)) - beta * sum * sum;
        }
        if (!found || score > best) {
          best = score;
          best_pair = {j, k};
          found = true;
        }
      }
    }
    state.merged = best_pair;
    std::vector<ClassId> merged;
    std::merge(groups[best_pair.first].begin(), groups[best_pair.first].end(),
               groups[best_pair.second].begin(), groups[best_pair.second].end(),
               std::back_inserter(merged));
    groups[best_pair.first] = merged;
    groups.erase(groups.begin() +
                 static_cast<std::ptrdiff_t>(best_pair.second));
    state.groups = groups;
    states.push_back(std::move(state));
  }
  return states;
}

//! Central finite difference of a scalar function of one parameter.
template <class F>
double central_difference(F&& f, double& param, double h = 1e-6) {
  const double original = param;
  param = original + h;
  const double up = f();
  param = original - h;
  const double down = f();
  param = original;
  return (up - down) / (2.0 * h);
}

}  // namespace oracles
