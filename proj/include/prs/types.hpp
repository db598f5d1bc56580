#pragma once

#include <algorithm>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace prs {

inline constexpr const char* kVersion = "0.1.0";

using ClassId = std::uint32_t;
using SampleId = std::uint64_t;

//! Base class for all library errors.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct CapacityError : Error {
  using Error::Error;
};
struct DuplicateIdError : Error {
  using Error::Error;
};
struct UnknownIdError : Error {
  using Error::Error;
};
struct EmptyLabelError : Error {
  using Error::Error;
};
struct EmptyStatsError : Error {
  using Error::Error;
};
struct DimensionError : Error {
  using Error::Error;
};
struct DivergenceError : Error {
  using Error::Error;
};
struct ConfigError : Error {
  using Error::Error;
};
struct DeficientClassError : Error {
  using Error::Error;
};
struct InfeasibleConstraintError : Error {
  using Error::Error;
};
//! Raised when a caller violates a documented precondition.
struct ContractError : Error {
  using Error::Error;
};

//! Fixed-length binary label vector indexed by dense class ids 0..C-1.
class MultiHotLabel {
 public:
  MultiHotLabel() = default;
  explicit MultiHotLabel(std::size_t num_classes) : bits_(num_classes, 0) {}

  static MultiHotLabel from_ids(std::size_t num_classes,
                                const std::vector<ClassId>& ids) {
    MultiHotLabel label(num_classes);
    for (ClassId c : ids) label.set(c);
    return label;
  }

  void set(ClassId c) {
    if (c >= bits_.size())
      throw DimensionError("class id " + std::to_string(c) +
                           " out of range for label of size " +
                           std::to_string(bits_.size()));
    bits_[c] = 1;
  }

  //! True iff bit c is set; ids beyond the label length read as unset,
  //! which lets labels from a smaller class universe mix with a grown one.
  bool test(ClassId c) const { return c < bits_.size() && bits_[c] != 0; }

  std::size_t size() const { return bits_.size(); }

  std::size_t count() const {
    return static_cast<std::size_t>(
        std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
  }

  bool any() const {
    return std::any_of(bits_.begin(), bits_.end(),
                       [](std::uint8_t b) { return b != 0; });
  }

  //! Set class ids in ascending order.
  std::vector<ClassId> ids() const {
    std::vector<ClassId> out;
    for (std::size_t c = 0; c < bits_.size(); ++c)
      if (bits_[c]) out.push_back(static_cast<ClassId>(c));
    return out;
  }

  //! Extend the class universe; new bits start unset. Shrinking is refused.
  void resize(std::size_t num_classes) {
    if (num_classes < bits_.size())
      throw DimensionError("label universe cannot shrink");
    bits_.resize(num_classes, 0);
  }

  bool operator==(const MultiHotLabel&) const = default;

 private:
  std::vector<std::uint8_t> bits_;
};

//! One stream element: a feature vector plus its multi-hot label.
struct LabeledExample {
  SampleId id = 0;
  std::vector<double> features;
  MultiHotLabel label;
};

}  // namespace prs
