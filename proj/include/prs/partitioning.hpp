#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <vector>

#include "prs/replay_memory.hpp"
#include "prs/reservoir.hpp"
#include "prs/running_stats.hpp"
#include "prs/types.hpp"

namespace prs {

//! Per-class target memory allocation.
//!
//! `ratios[c]` is the desired share of the memory for class c and is defined
//! only for observed classes (zero elsewhere); `quotas[c]` is the share scaled
//! by the memory capacity, kept real-valued. `observed` lists the class ids
//! with at least one observation, ascending.
struct TargetPartition {
  double rho = 0.0;
  std::vector<double> ratios;
  std::vector<double> quotas;
  std::vector<ClassId> observed;
};

//! Signed per-class over/under-occupancy of the memory relative to the
//! target ratios. Entries for unobserved classes are zero.
struct DeltaVector {
  std::vector<double> values;
  std::vector<ClassId> observed;
};

//! Compute the target partition from running class frequencies.
//!
//! ratios[c] = count(c)^rho / sum_j count(j)^rho over observed classes.
//! rho = 0 allocates every observed class equally; rho = 1 allocates
//! proportionally to the observed frequencies.
inline TargetPartition compute_partition(const RunningStats& stats, double rho,
                                         std::size_t memory_size) {
  if (!std::isfinite(rho)) throw ConfigError("rho must be finite");
  if (stats.unique_classes() == 0)
    throw EmptyStatsError("partition undefined without observed classes");

  TargetPartition partition;
  partition.rho = rho;
  partition.ratios.assign(stats.num_classes(), 0.0);
  partition.quotas.assign(stats.num_classes(), 0.0);

  double norm = 0.0;
  for (ClassId c = 0; c < stats.num_classes(); ++c) {
    const std::uint64_t n = stats.count(c);
    if (n == 0) continue;
    partition.observed.push_back(c);
    const double weight = std::pow(static_cast<double>(n), rho);
    partition.ratios[c] = weight;
    norm += weight;
  }
  for (ClassId c : partition.observed) {
    partition.ratios[c] /= norm;
    partition.quotas[c] = static_cast<double>(memory_size) * partition.ratios[c];
  }
  return partition;
}

//! Admission probability of an example into the memory.
//!
//! s = sum over the example's set classes of (quota_c / count_c) * w_c, where
//! w is the softmax of the negated running counts restricted to the set
//! classes. The exponentials are shifted by the smallest count among the set
//! classes, which leaves w unchanged but avoids underflow for large counts.
//! The result is clamped to [0, 1] so it can drive a Bernoulli draw.
inline double sample_in_probability(const LabeledExample& example,
                                    const RunningStats& stats,
                                    const TargetPartition& partition) {
  const std::vector<ClassId> set_classes = example.label.ids();
  if (set_classes.empty())
    throw EmptyLabelError("admission probability undefined for empty label");

  std::uint64_t min_count = std::numeric_limits<std::uint64_t>::max();
  for (ClassId c : set_classes) {
    if (stats.count(c) == 0)
      throw ContractError("stats must include the example before sampling");
    min_count = std::min(min_count, stats.count(c));
  }

  double weight_norm = 0.0;
  double value = 0.0;
  for (ClassId c : set_classes) {
    const double n = static_cast<double>(stats.count(c));
    const double w = std::exp(-(n - static_cast<double>(min_count)));
    weight_norm += w;
    value += (partition.quotas[c] / n) * w;
  }
  return std::clamp(value / weight_norm, 0.0, 1.0);
}

//! Distance of the current memory composition from the target ratios:
//! delta_c = l_c - ratio_c * sum_j l_j. The scaling uses the total label
//! count rather than the capacity because samples carry multiple labels.
inline DeltaVector delta_vector(const ReplayMemory& memory,
                                const TargetPartition& partition) {
  DeltaVector delta;
  delta.values.assign(partition.ratios.size(), 0.0);
  delta.observed = partition.observed;
  const double total = static_cast<double>(memory.total_label_count());
  for (ClassId c : partition.observed)
    delta.values[c] =
        static_cast<double>(memory.class_count(c)) - partition.ratios[c] * total;
  return delta;
}

//! Pick the class to shrink among the over-occupied ones (delta > 0) with
//! probability softmax(delta), shifted by the maximum for stability.
//! Returns nullopt when no class over-occupies the memory.
template <class URBG>
std::optional<ClassId> select_out_class(const DeltaVector& delta, URBG& rng) {
  std::vector<ClassId> positive;
  double max_delta = -std::numeric_limits<double>::infinity();
  for (ClassId c : delta.observed) {
    if (delta.values[c] > 0.0) {
      positive.push_back(c);
      max_delta = std::max(max_delta, delta.values[c]);
    }
  }
  if (positive.empty()) return std::nullopt;

  std::vector<double> weights;
  weights.reserve(positive.size());
  for (ClassId c : positive)
    weights.push_back(std::exp(delta.values[c] - max_delta));
  std::discrete_distribution<std::size_t> pick(weights.begin(), weights.end());
  return positive[pick(rng)];
}

//! Candidate samples for removal: among the stored samples carrying
//! `over_class`, those whose labels avoid the under-occupied classes the
//! most. Formally the argmax set of (negated label) . q, with q_c = 1 iff
//! delta_c <= 0, so samples with fewer extra labels score higher.
inline std::vector<SampleId> candidate_set(const ReplayMemory& memory,
                                           ClassId over_class,
                                           const DeltaVector& delta) {
  const std::set<SampleId>& carriers = memory.class_members(over_class);
  if (carriers.empty())
    throw ContractError("candidate_set requires a stored sample of class " +
                        std::to_string(over_class));

  std::vector<SampleId> best;
  std::ptrdiff_t best_score = -1;
  for (SampleId id : carriers) {
    const MultiHotLabel& label = memory.at(id).label;
    std::ptrdiff_t score = 0;
    for (ClassId c : delta.observed)
      if (delta.values[c] <= 0.0 && !label.test(c)) ++score;
    if (score > best_score) {
      best_score = score;
      best.assign(1, id);
    } else if (score == best_score) {
      best.push_back(id);
    }
  }
  return best;
}

//! Choose the candidate whose removal leaves the memory closest to the
//! target ratios: argmin over candidates of sum_c |l'_c - ratio_c * sum l'|,
//! where l' are the class counts after the hypothetical removal. Ties are
//! broken uniformly at random.
template <class URBG>
SampleId select_removal(const ReplayMemory& memory,
                        const std::vector<SampleId>& candidates,
                        const TargetPartition& partition, URBG& rng) {
  if (candidates.empty())
    throw ContractError("select_removal requires a non-empty candidate set");

  std::vector<SampleId> best;
  double best_distance = std::numeric_limits<double>::infinity();
  for (SampleId id : candidates) {
    const MultiHotLabel& label = memory.at(id).label;
    const double remaining_total =
        static_cast<double>(memory.total_label_count() - label.count());
    double distance = 0.0;
    for (ClassId c : partition.observed) {
      const double remaining =
          static_cast<double>(memory.class_count(c)) - (label.test(c) ? 1.0 : 0.0);
      distance += std::abs(remaining - partition.ratios[c] * remaining_total);
    }
    if (distance < best_distance) {
      best_distance = distance;
      best.assign(1, id);
    } else if (distance == best_distance) {
      best.push_back(id);
    }
  }
  if (best.size() == 1) return best.front();
  std::uniform_int_distribution<std::size_t> pick(0, best.size() - 1);
  return best[pick(rng)];
}

//! One partitioning reservoir-sampling step.
//!
//! Below capacity the example is stored outright. Once the memory is full,
//! the target partition is recomputed from the running stats (which must
//! already include this example), the example is admitted with probability
//! sample_in_probability, and on admission one stored sample is evicted via
//! select_out_class -> candidate_set -> select_removal. If no class
//! over-occupies the memory, the eviction falls back to a uniformly random
//! sample of the class with the largest stored count.
template <class URBG>
StepOutcome prs_step(ReplayMemory& memory, const RunningStats& stats,
                     const LabeledExample& example, double rho, URBG& rng) {
  if (!memory.full()) {
    memory.insert(example);
    return {StepEvent::kFill, 1.0, std::nullopt, std::nullopt};
  }

  const TargetPartition partition =
      compute_partition(stats, rho, memory.capacity());
  const double s = sample_in_probability(example, stats, partition);
  if (!std::bernoulli_distribution(s)(rng))
    return {StepEvent::kReject, s, std::nullopt, std::nullopt};

  const DeltaVector delta = delta_vector(memory, partition);
  const std::optional<ClassId> over_class = select_out_class(delta, rng);
  SampleId victim;
  if (over_class) {
    const std::vector<SampleId> candidates =
        candidate_set(memory, *over_class, delta);
    victim = select_removal(memory, candidates, partition, rng);
  } else {
    // No over-occupied class right after recomputing the partition; evict
    // from the class currently holding the most samples.
    ClassId fullest = 0;
    std::size_t fullest_count = 0;
    for (ClassId c = 0; c < memory.num_classes(); ++c) {
      if (memory.class_count(c) > fullest_count) {
        fullest_count = memory.class_count(c);
        fullest = c;
      }
    }
    const std::set<SampleId>& members = memory.class_members(fullest);
    std::uniform_int_distribution<std::size_t> pick(0, members.size() - 1);
    victim = *std::next(members.begin(),
                        static_cast<std::ptrdiff_t>(pick(rng)));
  }
  memory.remove(victim);
  memory.insert(example);
  return {StepEvent::kAdmit, s, victim, over_class};
}

}  // namespace prs
