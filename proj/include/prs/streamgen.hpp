#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "prs/types.hpp"

namespace prs {

//! A stream element together with the schedule slot that produced it.
struct TaggedExample {
  LabeledExample example;
  int task = 0;
};

using Stream = std::vector<TaggedExample>;

//! Configuration of a synthetic long-tailed multi-label stream.
struct StreamConfig {
  std::size_t num_classes = 0;
  double alpha = 0.6;        // Pareto power; larger is flatter
  std::size_t n_max = 1000;  // size of the largest class
  std::size_t feature_dim = 8;
  double noise_sigma = 0.1;
  //! Ordered schedule of disjoint class-id sets; classes outside every task
  //! are not emitted.
  std::vector<std::vector<ClassId>> tasks;
  //! cooccurrence[c][j]: probability that an example with primary class c
  //! additionally carries class j. Must be square with a zero diagonal;
  //! leave empty for single-label streams.
  std::vector<std::vector<double>> cooccurrence;
  std::uint64_t seed = 0;
  //! When positive, a balanced single-label test set with this many examples
  //! per class can be generated alongside the stream.
  std::size_t test_per_class = 0;

  void validate() const {
    if (num_classes == 0) throw ConfigError("num_classes: must be >= 1");
    if (!(alpha > 0.0)) throw ConfigError("alpha: must be > 0");
    if (n_max == 0) throw ConfigError("n_max: must be >= 1");
    if (feature_dim == 0) throw ConfigError("feature_dim: must be >= 1");
    if (noise_sigma < 0.0) throw ConfigError("noise_sigma: must be >= 0");
    if (tasks.empty()) throw ConfigError("tasks: at least one task required");
    std::vector<bool> seen(num_classes, false);
    for (const auto& task : tasks) {
      if (task.empty()) throw ConfigError("tasks: empty task set");
      for (ClassId c : task) {
        if (c >= num_classes)
          throw ConfigError("tasks: class id " + std::to_string(c) +
                            " outside 0.." + std::to_string(num_classes - 1));
        if (seen[c])
          throw ConfigError("tasks: class id " + std::to_string(c) +
                            " appears in more than one task");
        seen[c] = true;
      }
    }
    if (!cooccurrence.empty()) {
      if (cooccurrence.size() != num_classes)
        throw ConfigError("cooccurrence: must be num_classes x num_classes");
      for (std::size_t i = 0; i < cooccurrence.size(); ++i) {
        if (cooccurrence[i].size() != num_classes)
          throw ConfigError("cooccurrence: must be num_classes x num_classes");
        if (cooccurrence[i][i] != 0.0)
          throw ConfigError("cooccurrence: diagonal must be zero");
        for (double p : cooccurrence[i])
          if (p < 0.0 || p > 1.0)
            throw ConfigError("cooccurrence: entries must lie in [0, 1]");
      }
    }
  }
};

//! Long-tailed class sizes: size_i = round(n_max * (i+1)^(-1/alpha)),
//! floored at 1. Class 0 is the head of the tail curve.
inline std::vector<std::size_t> pareto_class_sizes(std::size_t num_classes,
                                                   double alpha,
                                                   std::size_t n_max) {
  std::vector<std::size_t> sizes;
  sizes.reserve(num_classes);
  for (std::size_t i = 0; i < num_classes; ++i) {
    const double raw = static_cast<double>(n_max) *
                       std::pow(static_cast<double>(i + 1), -1.0 / alpha);
    sizes.push_back(
        static_cast<std::size_t>(std::max(1.0, std::round(raw))));
  }
  return sizes;
}

namespace detail {

inline std::mt19937_64 salted_rng(std::uint64_t seed, std::uint64_t salt) {
  std::seed_seq seq{seed, salt};
  return std::mt19937_64(seq);
}

}  // namespace detail

//! Deterministic unit prototype vector per class, derived from the seed.
inline std::vector<std::vector<double>> class_prototypes(
    const StreamConfig& config) {
  auto rng = detail::salted_rng(config.seed, 0x70726f746f);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<std::vector<double>> prototypes(
      config.num_classes, std::vector<double>(config.feature_dim));
  for (auto& proto : prototypes) {
    double norm_sq = 0.0;
    for (double& x : proto) {
      x = normal(rng);
      norm_sq += x * x;
    }
    if (norm_sq < 1e-24) {
      proto[0] = 1.0;
      continue;
    }
    const double inv = 1.0 / std::sqrt(norm_sq);
    for (double& x : proto) x *= inv;
  }
  return prototypes;
}

//! Materialize the stream: per task (in schedule order), each class
//! contributes exactly its Pareto size as primary-class examples, shuffled
//! within the task. Extra labels are drawn from the primary class's
//! cooccurrence row, restricted to classes of the same task so tasks stay
//! mutually exclusive. Features are the mean of the set classes' prototypes
//! plus Gaussian noise.
inline Stream gen_stream(const StreamConfig& config) {
  config.validate();
  const std::vector<std::size_t> sizes =
      pareto_class_sizes(config.num_classes, config.alpha, config.n_max);
  const std::vector<std::vector<double>> prototypes = class_prototypes(config);

  auto rng = detail::salted_rng(config.seed, 0x73747265616d);
  std::normal_distribution<double> noise(0.0, config.noise_sigma);

  Stream stream;
  SampleId next_id = 0;
  for (std::size_t t = 0; t < config.tasks.size(); ++t) {
    std::vector<ClassId> primaries;
    for (ClassId c : config.tasks[t])
      primaries.insert(primaries.end(), sizes[c], c);
    std::shuffle(primaries.begin(), primaries.end(), rng);

    for (ClassId primary : primaries) {
      MultiHotLabel label(config.num_classes);
      label.set(primary);
      if (!config.cooccurrence.empty()) {
        for (ClassId other : config.tasks[t]) {
          if (other == primary) continue;
          const double p = config.cooccurrence[primary][other];
          if (p > 0.0 && std::bernoulli_distribution(p)(rng)) label.set(other);
        }
      }
      const std::vector<ClassId> set_classes = label.ids();
      std::vector<double> features(config.feature_dim, 0.0);
      for (ClassId c : set_classes)
        for (std::size_t d = 0; d < config.feature_dim; ++d)
          features[d] += prototypes[c][d];
      for (double& x : features) {
        x /= static_cast<double>(set_classes.size());
        x += noise(rng);
      }
      stream.push_back(
          {LabeledExample{next_id++, std::move(features), std::move(label)},
           static_cast<int>(t)});
    }
  }
  return stream;
}

//! Balanced single-label held-out set: test_per_class examples for every
//! scheduled class, tagged with the class's task. Uses its own RNG stream so
//! generating it never perturbs the training stream.
inline Stream gen_balanced_test(const StreamConfig& config) {
  config.validate();
  if (config.test_per_class == 0)
    throw ConfigError("test_per_class: must be >= 1 to generate a test set");
  const std::vector<std::vector<double>> prototypes = class_prototypes(config);

  auto rng = detail::salted_rng(config.seed, 0x74657374);
  std::normal_distribution<double> noise(0.0, config.noise_sigma);

  Stream test;
  SampleId next_id = 0;
  for (std::size_t t = 0; t < config.tasks.size(); ++t) {
    for (ClassId c : config.tasks[t]) {
      for (std::size_t k = 0; k < config.test_per_class; ++k) {
        MultiHotLabel label(config.num_classes);
        label.set(c);
        std::vector<double> features = prototypes[c];
        for (double& x : features) x += noise(rng);
        test.push_back(
            {LabeledExample{next_id++, std::move(features), std::move(label)},
             static_cast<int>(t)});
      }
    }
  }
  return test;
}

}  // namespace prs
