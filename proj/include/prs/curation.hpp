#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <random>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "prs/types.hpp"

namespace prs {

//! One annotated image: an external id plus its class-name labels.
struct AnnotationImage {
  std::string id;
  std::vector<std::string> labels;
};

//! A multi-label annotation corpus with an ordered class vocabulary.
struct AnnotationCorpus {
  std::vector<AnnotationImage> images;
  std::vector<std::string> class_vocab;

  //! Build a corpus whose vocabulary is the sorted set of label names.
  static AnnotationCorpus build(std::vector<AnnotationImage> images) {
    std::set<std::string> names;
    for (const auto& image : images) {
      if (image.labels.empty())
        throw ConfigError("image " + image.id + " has an empty label set");
      names.insert(image.labels.begin(), image.labels.end());
    }
    AnnotationCorpus corpus;
    corpus.images = std::move(images);
    corpus.class_vocab.assign(names.begin(), names.end());
    return corpus;
  }

  //! Label set of one image as sorted, deduplicated vocab indices.
  std::vector<ClassId> label_ids(const AnnotationImage& image) const {
    std::vector<ClassId> ids;
    for (const std::string& name : image.labels) {
      auto it = std::lower_bound(class_vocab.begin(), class_vocab.end(), name);
      if (it == class_vocab.end() || *it != name)
        throw ConfigError("image " + image.id + " uses unknown label '" +
                          name + "'");
      ids.push_back(static_cast<ClassId>(it - class_vocab.begin()));
    }
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
    return ids;
  }
};

//! Disjoint class groups produced by the clustering; indices into the vocab.
struct GroupSet {
  std::vector<std::vector<ClassId>> groups;
};

//! Score for merging two groups: ln(co) - beta * (elem_j + elem_k)^2, where
//! co is the number of images the merge would newly capture and elem_* are
//! the images each group already captures. Merges that capture nothing score
//! -infinity and are only taken when every pair does.
inline double merge_score(std::uint64_t co, std::uint64_t elem_j,
                          std::uint64_t elem_k, double beta) {
  if (co == 0) return -std::numeric_limits<double>::infinity();
  const double total = static_cast<double>(elem_j + elem_k);
  return std::log(static_cast<double>(co)) - beta * total * total;
}

//! elem/co tables of one merge iteration, for cross-checking bookkeeping
//! against a from-scratch recount.
struct ClusteringIteration {
  std::vector<std::uint64_t> elem;
  std::map<std::pair<std::size_t, std::size_t>, std::uint64_t> co;
  std::pair<std::size_t, std::size_t> merged;
};

namespace detail {

//! Distinct label sets with multiplicities; equivalent to looping over the
//! images but much cheaper on corpora with repeated label combinations.
inline std::map<std::vector<ClassId>, std::uint64_t> labelset_counts(
    const AnnotationCorpus& corpus) {
  std::map<std::vector<ClassId>, std::uint64_t> counts;
  for (const auto& image : corpus.images) ++counts[corpus.label_ids(image)];
  return counts;
}

struct GroupTables {
  std::vector<std::uint64_t> elem;
  std::map<std::pair<std::size_t, std::size_t>, std::uint64_t> co;
};

//! Count, for the current grouping, how many images each group fully
//! captures (elem) and how many images each pair would newly capture (co).
//! Groups partition the vocabulary, so an image's label set lies inside a
//! group union iff it touches no other group.
inline GroupTables group_tables(
    const std::map<std::vector<ClassId>, std::uint64_t>& labelsets,
    const std::vector<std::vector<ClassId>>& groups,
    std::size_t vocab_size) {
  std::vector<std::size_t> group_of(vocab_size);
  for (std::size_t g = 0; g < groups.size(); ++g)
    for (ClassId c : groups[g]) group_of[c] = g;

  GroupTables tables;
  tables.elem.assign(groups.size(), 0);
  for (const auto& [labels, count] : labelsets) {
    std::set<std::size_t> touched;
    for (ClassId c : labels) touched.insert(group_of[c]);
    if (touched.size() == 1) {
      tables.elem[*touched.begin()] += count;
    } else if (touched.size() == 2) {
      auto it = touched.begin();
      const std::size_t j = *it++;
      const std::size_t k = *it;
      tables.co[{j, k}] += count;
    }
  }
  return tables;
}

inline std::uint64_t co_of(const GroupTables& tables, std::size_t j,
                           std::size_t k) {
  auto it = tables.co.find({std::min(j, k), std::max(j, k)});
  return it == tables.co.end() ? 0 : it->second;
}

inline void merge_groups(std::vector<std::vector<ClassId>>& groups,
                         std::size_t j, std::size_t k) {
  std::vector<ClassId> merged;
  std::merge(groups[j].begin(), groups[j].end(), groups[k].begin(),
             groups[k].end(), std::back_inserter(merged));
  groups[j] = std::move(merged);
  groups.erase(groups.begin() + static_cast<std::ptrdiff_t>(k));
}

}  // namespace detail

//! Bottom-up class clustering: starting from singleton groups, repeatedly
//! merge the pair with the highest merge_score until `ngroups` remain. Score
//! ties pick the lexicographically smallest group-index pair. Afterwards,
//! while any group has fewer than `min_classes` classes, the smallest such
//! group is merged with its best-scoring partner (which lowers the group
//! count further).
inline GroupSet hierarchical_class_clustering(
    const AnnotationCorpus& corpus, std::size_t ngroups, double beta,
    std::size_t min_classes = 1,
    std::vector<ClusteringIteration>* trace = nullptr) {
  const std::size_t vocab_size = corpus.class_vocab.size();
  if (ngroups == 0 || ngroups > vocab_size)
    throw ConfigError("ngroups must lie in 1..vocabulary size");
  if (min_classes == 0) min_classes = 1;
  if (min_classes * ngroups > vocab_size)
    throw InfeasibleConstraintError(
        "cannot form " + std::to_string(ngroups) + " groups of at least " +
        std::to_string(min_classes) + " classes from " +
        std::to_string(vocab_size) + " classes");

  const auto labelsets = detail::labelset_counts(corpus);
  std::vector<std::vector<ClassId>> groups(vocab_size);
  for (ClassId c = 0; c < vocab_size; ++c) groups[c] = {c};

  while (groups.size() > ngroups) {
    const auto tables = detail::group_tables(labelsets, groups, vocab_size);
    double best = -std::numeric_limits<double>::infinity();
    std::size_t best_j = 0, best_k = 1;
    bool found = false;
    for (std::size_t j = 0; j + 1 < groups.size(); ++j) {
      for (std::size_t k = j + 1; k < groups.size(); ++k) {
        const double score = merge_score(detail::co_of(tables, j, k),
                                         tables.elem[j], tables.elem[k], beta);
        if (!found || score > best) {
          best = score;
          best_j = j;
          best_k = k;
          found = true;
        }
      }
    }
    if (trace) trace->push_back({tables.elem, tables.co, {best_j, best_k}});
    detail::merge_groups(groups, best_j, best_k);
  }

  // Enforce the per-group class minimum by forced merges.
  while (groups.size() > 1) {
    std::size_t smallest = groups.size();
    for (std::size_t g = 0; g < groups.size(); ++g)
      if (groups[g].size() < min_classes &&
          (smallest == groups.size() ||
           groups[g].size() < groups[smallest].size()))
        smallest = g;
    if (smallest == groups.size()) break;

    const auto tables = detail::group_tables(labelsets, groups, vocab_size);
    double best = -std::numeric_limits<double>::infinity();
    std::size_t best_partner = groups.size();
    for (std::size_t g = 0; g < groups.size(); ++g) {
      if (g == smallest) continue;
      const double score =
          merge_score(detail::co_of(tables, smallest, g),
                      tables.elem[smallest], tables.elem[g], beta);
      if (best_partner == groups.size() || score > best) {
        best = score;
        best_partner = g;
      }
    }
    const std::size_t j = std::min(smallest, best_partner);
    const std::size_t k = std::max(smallest, best_partner);
    if (trace) trace->push_back({tables.elem, tables.co, {j, k}});
    detail::merge_groups(groups, j, k);
  }

  GroupSet out;
  out.groups = std::move(groups);
  return out;
}

//! Result of routing images to tasks by label-set containment.
struct TaskAssignment {
  std::vector<AnnotationCorpus> tasks;
  std::vector<std::string> dropped_ids;
};

//! An image belongs to task g iff its label set lies inside group g; images
//! spanning several groups are dropped and reported.
inline TaskAssignment assign_tasks(const AnnotationCorpus& corpus,
                                   const GroupSet& groups) {
  std::vector<std::size_t> group_of(corpus.class_vocab.size(),
                                    groups.groups.size());
  for (std::size_t g = 0; g < groups.groups.size(); ++g)
    for (ClassId c : groups.groups[g]) group_of[c] = g;

  TaskAssignment assignment;
  assignment.tasks.resize(groups.groups.size());
  for (auto& task : assignment.tasks) task.class_vocab = corpus.class_vocab;

  for (const auto& image : corpus.images) {
    std::set<std::size_t> touched;
    for (ClassId c : corpus.label_ids(image)) touched.insert(group_of[c]);
    if (touched.size() == 1 && *touched.begin() < assignment.tasks.size())
      assignment.tasks[*touched.begin()].images.push_back(image);
    else
      assignment.dropped_ids.push_back(image.id);
  }
  return assignment;
}

//! Train/test indices into a task corpus's image list.
struct TrainTestSplit {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

//! Greedy balanced test extraction: walk the classes present in the corpus
//! from rarest to most frequent and add seed-shuffled carrier images until
//! each class is covered by at least k test images. An image counts toward
//! all of its classes, so the test set can be smaller than classes * k.
inline TrainTestSplit balanced_test_split(const AnnotationCorpus& corpus,
                                          std::size_t k_per_class,
                                          std::uint64_t seed) {
  std::map<ClassId, std::vector<std::size_t>> carriers;
  for (std::size_t i = 0; i < corpus.images.size(); ++i)
    for (ClassId c : corpus.label_ids(corpus.images[i]))
      carriers[c].push_back(i);

  std::vector<std::string> deficient;
  for (const auto& [c, images] : carriers)
    if (images.size() < k_per_class + 1)
      deficient.push_back(corpus.class_vocab[c]);
  if (!deficient.empty()) {
    std::string msg = "classes with fewer than k+1 images:";
    for (const auto& name : deficient) msg += " " + name;
    throw DeficientClassError(msg);
  }

  std::vector<ClassId> order;
  for (const auto& [c, images] : carriers) order.push_back(c);
  std::stable_sort(order.begin(), order.end(), [&](ClassId a, ClassId b) {
    return carriers[a].size() < carriers[b].size();
  });

  std::mt19937_64 rng(seed);
  std::map<ClassId, std::size_t> coverage;
  std::set<std::size_t> test;
  for (ClassId c : order) {
    if (coverage[c] >= k_per_class) continue;
    std::vector<std::size_t> pool = carriers[c];
    std::shuffle(pool.begin(), pool.end(), rng);
    for (std::size_t i : pool) {
      if (coverage[c] >= k_per_class) break;
      if (test.count(i)) continue;
      test.insert(i);
      for (ClassId covered : corpus.label_ids(corpus.images[i]))
        ++coverage[covered];
    }
  }

  TrainTestSplit split;
  for (std::size_t i = 0; i < corpus.images.size(); ++i)
    (test.count(i) ? split.test : split.train).push_back(i);
  return split;
}

enum class Tier { kMinority, kModerate, kMajority };

inline std::string tier_name(Tier tier) {
  switch (tier) {
    case Tier::kMinority: return "minority";
    case Tier::kModerate: return "moderate";
    case Tier::kMajority: return "majority";
  }
  return "?";
}

//! Class tiers by training-set size: minority below `minority_below`,
//! majority above `majority_above`, moderate in between (inclusive).
inline std::vector<Tier> tier_split(const std::vector<std::size_t>& sizes,
                                    std::size_t minority_below = 200,
                                    std::size_t majority_above = 900) {
  std::vector<Tier> tiers;
  tiers.reserve(sizes.size());
  for (std::size_t size : sizes) {
    if (size < minority_below)
      tiers.push_back(Tier::kMinority);
    else if (size > majority_above)
      tiers.push_back(Tier::kMajority);
    else
      tiers.push_back(Tier::kModerate);
  }
  return tiers;
}

}  // namespace prs
