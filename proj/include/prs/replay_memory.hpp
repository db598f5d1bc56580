#pragma once

#include <cstdint>
#include <iterator>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "prs/types.hpp"

namespace prs {

//! Bounded replay store with a per-class index.
//!
//! Holds at most `capacity` samples. For every stored sample the index maps
//! each of its label bits to the sample id, so `class_count(c)` is the number
//! of stored samples carrying class c. Iteration orders (samples, class
//! members) are by ascending id, which keeps downstream randomized choices
//! reproducible under a fixed seed.
class ReplayMemory {
 public:
  explicit ReplayMemory(std::size_t capacity) : capacity_(capacity) {}

  std::size_t capacity() const { return capacity_; }
  std::size_t size() const { return samples_.size(); }
  bool full() const { return samples_.size() >= capacity_; }
  bool empty() const { return samples_.empty(); }

  void insert(const LabeledExample& example) {
    if (samples_.size() >= capacity_)
      throw CapacityError("memory full (capacity " +
                          std::to_string(capacity_) + ")");
    auto [it, inserted] = samples_.emplace(example.id, example);
    if (!inserted)
      throw DuplicateIdError("sample id " + std::to_string(example.id) +
                             " already stored");
    if (example.label.size() > class_index_.size()) {
      class_index_.resize(example.label.size());
      class_counts_.resize(example.label.size(), 0);
    }
    for (ClassId c : example.label.ids()) {
      class_index_[c].insert(example.id);
      ++class_counts_[c];
      ++total_labels_;
    }
  }

  //! Remove and return a stored sample.
  LabeledExample remove(SampleId id) {
    auto it = samples_.find(id);
    if (it == samples_.end())
      throw UnknownIdError("sample id " + std::to_string(id) + " not stored");
    LabeledExample out = std::move(it->second);
    for (ClassId c : out.label.ids()) {
      class_index_[c].erase(id);
      --class_counts_[c];
      --total_labels_;
    }
    samples_.erase(it);
    return out;
  }

  bool contains(SampleId id) const { return samples_.count(id) != 0; }

  const LabeledExample& at(SampleId id) const {
    auto it = samples_.find(id);
    if (it == samples_.end())
      throw UnknownIdError("sample id " + std::to_string(id) + " not stored");
    return it->second;
  }

  //! Stored samples keyed by id (ascending).
  const std::map<SampleId, LabeledExample>& samples() const {
    return samples_;
  }

  //! Number of stored samples whose label carries class c (l_c).
  std::size_t class_count(ClassId c) const {
    return c < class_counts_.size() ? class_counts_[c] : 0;
  }

  const std::vector<std::size_t>& class_counts() const {
    return class_counts_;
  }

  //! Ids of stored samples carrying class c, ascending.
  const std::set<SampleId>& class_members(ClassId c) const {
    static const std::set<SampleId> kEmpty;
    return c < class_index_.size() ? class_index_[c] : kEmpty;
  }

  //! Sum of class counts (total label occurrences in the memory).
  std::size_t total_label_count() const { return total_labels_; }

  std::size_t num_classes() const { return class_counts_.size(); }

  //! Id of the k-th stored sample in ascending id order.
  SampleId nth_id(std::size_t k) const {
    if (k >= samples_.size())
      throw UnknownIdError("sample index " + std::to_string(k) +
                           " out of range");
    return std::next(samples_.begin(), static_cast<std::ptrdiff_t>(k))->first;
  }

 private:
  std::size_t capacity_;
  std::map<SampleId, LabeledExample> samples_;
  std::vector<std::set<SampleId>> class_index_;
  std::vector<std::size_t> class_counts_;
  std::size_t total_labels_ = 0;
};

}  // namespace prs
