#pragma once

#include <cstdint>
#include <vector>

#include "prs/types.hpp"

namespace prs {

//! Running class-frequency statistics over a stream.
//!
//! Tracks the per-class observation count, the number of datapoints seen
//! (one per update, regardless of how many labels the datapoint carries)
//! and the number of distinct classes observed so far. The class universe
//! grows on demand when a label with a previously unseen class id arrives.
class RunningStats {
 public:
  void update(const MultiHotLabel& label) {
    if (label.size() > per_class_count_.size())
      per_class_count_.resize(label.size(), 0);
    for (ClassId c : label.ids()) {
      if (per_class_count_[c] == 0) ++unique_classes_;
      ++per_class_count_[c];
    }
    ++total_seen_;
  }

  //! Observation count of class c (0 for ids beyond the seen universe).
  std::uint64_t count(ClassId c) const {
    return c < per_class_count_.size() ? per_class_count_[c] : 0;
  }

  const std::vector<std::uint64_t>& per_class_count() const {
    return per_class_count_;
  }

  //! Number of datapoints observed.
  std::uint64_t total_seen() const { return total_seen_; }

  //! Number of classes with at least one observation.
  std::size_t unique_classes() const { return unique_classes_; }

  //! Current universe size (largest class id seen + 1).
  std::size_t num_classes() const { return per_class_count_.size(); }

 private:
  std::vector<std::uint64_t> per_class_count_;
  std::uint64_t total_seen_ = 0;
  std::size_t unique_classes_ = 0;
};

}  // namespace prs
