#pragma once

#include <optional>
#include <random>

#include "prs/replay_memory.hpp"
#include "prs/running_stats.hpp"
#include "prs/types.hpp"

namespace prs {

enum class StepEvent { kFill, kAdmit, kReject };

//! What a single memory-policy step did, for trace logs and tests.
struct StepOutcome {
  StepEvent event = StepEvent::kFill;
  double admit_probability = 1.0;
  std::optional<SampleId> victim;
  std::optional<ClassId> over_class;  // set by the partitioned policy only
};

//! One conventional reservoir-sampling step (Vitter's Algorithm R).
//!
//! `stats` must already include this example, so the admission probability is
//! capacity / total_seen. Below capacity the example is stored outright;
//! afterwards it replaces a uniformly random stored sample on success.
template <class URBG>
StepOutcome crs_step(ReplayMemory& memory, const RunningStats& stats,
                     const LabeledExample& example, URBG& rng) {
  if (!memory.full()) {
    memory.insert(example);
    return {StepEvent::kFill, 1.0, std::nullopt, std::nullopt};
  }
  const double p = static_cast<double>(memory.capacity()) /
                   static_cast<double>(stats.total_seen());
  if (!std::bernoulli_distribution(p)(rng))
    return {StepEvent::kReject, p, std::nullopt, std::nullopt};
  std::uniform_int_distribution<std::size_t> pick(0, memory.size() - 1);
  const SampleId victim = memory.nth_id(pick(rng));
  memory.remove(victim);
  memory.insert(example);
  return {StepEvent::kAdmit, p, victim, std::nullopt};
}

}  // namespace prs
