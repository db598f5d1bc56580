#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "prs/curation.hpp"
#include "prs/metrics.hpp"
#include "prs/model.hpp"
#include "prs/partitioning.hpp"
#include "prs/replay_memory.hpp"
#include "prs/reservoir.hpp"
#include "prs/running_stats.hpp"
#include "prs/streamgen.hpp"
#include "prs/types.hpp"

namespace prs {

enum class Method { kFinetune, kCrs, kPrs, kMultitask };

inline std::string method_name(Method m) {
  switch (m) {
    case Method::kFinetune: return "finetune";
    case Method::kCrs: return "crs";
    case Method::kPrs: return "prs";
    case Method::kMultitask: return "multitask";
  }
  return "?";
}

inline Method method_from_string(const std::string& name) {
  if (name == "finetune") return Method::kFinetune;
  if (name == "crs") return Method::kCrs;
  if (name == "prs") return Method::kPrs;
  if (name == "multitask") return Method::kMultitask;
  throw ConfigError("method: expected finetune|crs|prs|multitask, got '" +
                    name + "'");
}

struct ExperimentConfig {
  Method method = Method::kFinetune;
  double rho = 0.0;
  std::size_t memory_size = 2000;
  std::size_t batch_size = 10;
  std::size_t replay_batch = 10;
  double learning_rate = 1e-3;
  double threshold = 0.5;
  std::uint64_t seed = 0;
  std::size_t minority_below = 200;
  std::size_t majority_above = 900;
  //! Metric feeding the forgetting measure (one of the seven metric names).
  std::string forgetting_metric = "C-F1";
  std::size_t hidden_units = 0;  // 0 selects the linear model
  bool record_trace = false;
  bool record_grad_variance = false;
};

struct MetricRow {
  int checkpoint = 0;
  int task = -1;  // -1 aggregates the whole test set
  std::string tier;
  std::string metric;
  double value = 0.0;
};

struct TraceRow {
  std::uint64_t step = 0;
  StepEvent event = StepEvent::kFill;
  std::optional<SampleId> victim;
  double probability = 1.0;
  std::optional<ClassId> over_class;
};

struct EpisodeLog {
  std::vector<MetricRow> rows;
  PerformanceMatrix perf;  // per-task history of the forgetting metric
  std::vector<TraceRow> trace;
};

struct ExperimentResult {
  EpisodeLog log;
  ReplayMemory memory{0};
  RunningStats stats;
};

namespace detail {

inline double metric_by_name(const MultilabelMetrics& m,
                             const std::string& name) {
  if (name == "C-P") return m.c_precision;
  if (name == "C-R") return m.c_recall;
  if (name == "C-F1") return m.c_f1;
  if (name == "O-P") return m.o_precision;
  if (name == "O-R") return m.o_recall;
  if (name == "O-F1") return m.o_f1;
  if (name == "mAP") return m.map;
  throw ConfigError("unknown metric name '" + name + "'");
}

inline void append_metric_rows(std::vector<MetricRow>& rows, int checkpoint,
                               int task, const std::string& tier,
                               const MultilabelMetrics& m) {
  rows.push_back({checkpoint, task, tier, "C-P", m.c_precision});
  rows.push_back({checkpoint, task, tier, "C-R", m.c_recall});
  rows.push_back({checkpoint, task, tier, "C-F1", m.c_f1});
  rows.push_back({checkpoint, task, tier, "O-P", m.o_precision});
  rows.push_back({checkpoint, task, tier, "O-R", m.o_recall});
  rows.push_back({checkpoint, task, tier, "O-F1", m.o_f1});
  rows.push_back({checkpoint, task, tier, "mAP", m.map});
}

template <class URBG>
std::vector<LabeledExample> draw_replay(const ReplayMemory& memory,
                                        std::size_t batch, URBG& rng) {
  std::vector<LabeledExample> out;
  if (memory.empty() || batch == 0) return out;
  std::vector<SampleId> ids;
  ids.reserve(memory.size());
  for (const auto& [id, ex] : memory.samples()) ids.push_back(id);
  out.reserve(batch);
  if (ids.size() >= batch) {
    // Uniform without replacement via a partial Fisher-Yates pass.
    for (std::size_t i = 0; i < batch; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, ids.size() - 1);
      std::swap(ids[i], ids[pick(rng)]);
      out.push_back(memory.at(ids[i]));
    }
  } else {
    std::uniform_int_distribution<std::size_t> pick(0, ids.size() - 1);
    for (std::size_t i = 0; i < batch; ++i)
      out.push_back(memory.at(ids[pick(rng)]));
  }
  return out;
}

}  // namespace detail

//! Run one online continual-learning episode with the given model.
//!
//! The stream is consumed once, in batches of config.batch_size cut at task
//! boundaries. Each batch step first draws a uniform replay batch from the
//! memory, performs a single gradient step on the concatenated batches, and
//! then feeds every input example through the memory policy. Metrics on the
//! held-out set are recorded after each task and at the end of the stream.
//! The multitask reference shuffles the whole stream first and evaluates
//! once at the end.
template <class Model>
ExperimentResult run_experiment_with(Model model, const Stream& stream,
                                     const Stream& test,
                                     const ExperimentConfig& config) {
  if (stream.empty()) throw ConfigError("stream: must be non-empty");
  if (config.batch_size == 0) throw ConfigError("batch_size: must be >= 1");
  if (config.memory_size == 0) throw ConfigError("memory_size: must be >= 1");
  detail::metric_by_name(MultilabelMetrics{}, config.forgetting_metric);

  const bool uses_memory =
      config.method == Method::kCrs || config.method == Method::kPrs;
  const bool single_checkpoint = config.method == Method::kMultitask;

  // Class universe, per-class training sizes and tiers from the stream.
  std::size_t num_classes = 0;
  for (const auto& ex : stream)
    num_classes = std::max(num_classes, ex.example.label.size());
  for (const auto& ex : test)
    num_classes = std::max(num_classes, ex.example.label.size());
  std::vector<std::size_t> class_sizes(num_classes, 0);
  for (const auto& ex : stream)
    for (ClassId c : ex.example.label.ids()) ++class_sizes[c];
  const std::vector<Tier> tiers =
      tier_split(class_sizes, config.minority_below, config.majority_above);
  std::map<Tier, std::vector<ClassId>> tier_classes;
  for (ClassId c = 0; c < num_classes; ++c)
    tier_classes[tiers[c]].push_back(c);

  // Task ordinals by first appearance in the (unshuffled) stream.
  std::vector<int> task_order;
  std::map<int, std::size_t> ordinal_of;
  for (const auto& ex : stream) {
    if (!ordinal_of.count(ex.task)) {
      ordinal_of[ex.task] = task_order.size();
      task_order.push_back(ex.task);
    }
  }
  std::map<int, std::vector<std::size_t>> test_by_task;
  for (std::size_t i = 0; i < test.size(); ++i)
    test_by_task[test[i].task].push_back(i);

  std::mt19937_64 rng(config.seed);
  Stream order = stream;
  if (config.method == Method::kMultitask)
    std::shuffle(order.begin(), order.end(), rng);

  model.ensure_classes(num_classes);

  ExperimentResult result;
  result.memory = ReplayMemory(config.memory_size);
  result.log.perf.metric = config.forgetting_metric;

  auto evaluate_checkpoint = [&](std::size_t tasks_seen) {
    const int k = static_cast<int>(result.log.perf.values.size());
    std::vector<std::vector<double>> scores(test.size());
    std::vector<MultiHotLabel> labels(test.size());
    for (std::size_t i = 0; i < test.size(); ++i) {
      scores[i] = model.predict(test[i].example.features);
      labels[i] = test[i].example.label;
    }

    auto emit = [&](const std::vector<std::size_t>& indices, int task_column,
                    double* perf_cell) {
      if (indices.empty()) return;
      std::vector<std::vector<double>> s;
      std::vector<MultiHotLabel> l;
      s.reserve(indices.size());
      l.reserve(indices.size());
      for (std::size_t i : indices) {
        s.push_back(scores[i]);
        l.push_back(labels[i]);
      }
      const MultilabelMetrics overall =
          multilabel_metrics(s, l, config.threshold);
      detail::append_metric_rows(result.log.rows, k, task_column, "overall",
                                 overall);
      for (Tier tier : {Tier::kMajority, Tier::kModerate, Tier::kMinority}) {
        const auto it = tier_classes.find(tier);
        if (it == tier_classes.end() || it->second.empty()) continue;
        detail::append_metric_rows(
            result.log.rows, k, task_column, tier_name(tier),
            multilabel_metrics(s, l, config.threshold, &it->second));
      }
      if (perf_cell)
        *perf_cell = detail::metric_by_name(overall, config.forgetting_metric);
    };

    std::vector<double> perf_row(tasks_seen, 0.0);
    for (std::size_t j = 0; j < tasks_seen; ++j) {
      const auto it = test_by_task.find(task_order[j]);
      if (it == test_by_task.end()) continue;
      emit(it->second, static_cast<int>(j), &perf_row[j]);
    }
    std::vector<std::size_t> all(test.size());
    std::iota(all.begin(), all.end(), std::size_t{0});
    emit(all, -1, nullptr);
    result.log.perf.values.push_back(std::move(perf_row));

    if (config.record_grad_variance && uses_memory &&
        !result.memory.empty()) {
      std::vector<std::vector<double>> grads;
      std::size_t taken = 0;
      for (const auto& [id, ex] : result.memory.samples()) {
        grads.push_back(model.example_gradient(ex));
        if (++taken >= 64) break;
      }
      result.log.rows.push_back({k, -1, "overall", "grad-var",
                                 gradient_variance_trace(grads)});
    }
    if (k >= 1)
      result.log.rows.push_back(
          {k, -1, "overall", "forget",
           normalized_forgetting(result.log.perf, static_cast<std::size_t>(k))});
  };

  auto process_batch = [&](const std::vector<LabeledExample>& batch) {
    std::vector<LabeledExample> replay;
    if (uses_memory)
      replay = detail::draw_replay(result.memory, config.replay_batch, rng);
    model.train_step(batch, replay, config.learning_rate);
    if (!uses_memory) return;
    for (const LabeledExample& ex : batch) {
      result.stats.update(ex.label);
      const StepOutcome outcome =
          config.method == Method::kCrs
              ? crs_step(result.memory, result.stats, ex, rng)
              : prs_step(result.memory, result.stats, ex, config.rho, rng);
      if (config.record_trace)
        result.log.trace.push_back({result.stats.total_seen(), outcome.event,
                                    outcome.victim, outcome.admit_probability,
                                    outcome.over_class});
    }
  };

  std::vector<LabeledExample> batch;
  std::size_t tasks_finished = 0;
  for (std::size_t i = 0; i < order.size(); ++i) {
    batch.push_back(order[i].example);
    const bool last = i + 1 == order.size();
    const bool boundary =
        !single_checkpoint && !last && order[i + 1].task != order[i].task;
    if (batch.size() >= config.batch_size || last || boundary) {
      process_batch(batch);
      batch.clear();
    }
    if (!single_checkpoint && (last || boundary)) {
      tasks_finished = std::max(tasks_finished, ordinal_of[order[i].task] + 1);
      evaluate_checkpoint(tasks_finished);
    }
  }
  if (single_checkpoint) evaluate_checkpoint(task_order.size());

  return result;
}

//! Dispatch on the configured model family.
inline ExperimentResult run_experiment(const Stream& stream,
                                       const Stream& test,
                                       const ExperimentConfig& config) {
  std::size_t feature_dim = stream.empty() ? 0 : stream.front().example.features.size();
  if (config.hidden_units > 0)
    return run_experiment_with(
        TwoLayerModel(1, feature_dim, config.hidden_units, config.seed),
        stream, test, config);
  return run_experiment_with(LinearModel(1, feature_dim), stream, test,
                             config);
}

}  // namespace prs
