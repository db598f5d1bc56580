#pragma once

#include <filesystem>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "prs/curation.hpp"
#include "prs/experiment.hpp"
#include "prs/io.hpp"
#include "prs/streamgen.hpp"
#include "prs/types.hpp"

namespace prs {

namespace cli_detail {

struct RunOptions {
  std::string stream_path;
  std::string test_path;
  std::string out_dir;
  std::string config_path;
  std::string method = "finetune";
  std::string sweep_rho;
  ExperimentConfig experiment;
  bool snapshot_features = true;
};

inline void apply_run_config_file(RunOptions& opts, const CLI::App& cmd) {
  const auto kv = read_kv_config(opts.config_path);
  auto flag_given = [&](const std::string& name) {
    return cmd.count(name) > 0;
  };
  for (const auto& [key, value] : kv) {
    if (key == "method" && !flag_given("--method"))
      opts.method = value;
    else if (key == "rho" && !flag_given("--rho"))
      opts.experiment.rho = detail::parse_number<double>(key, value);
    else if (key == "memory_size" && !flag_given("--memory-size"))
      opts.experiment.memory_size =
          detail::parse_number<std::size_t>(key, value);
    else if (key == "batch_size" && !flag_given("--batch-size"))
      opts.experiment.batch_size =
          detail::parse_number<std::size_t>(key, value);
    else if (key == "replay_batch" && !flag_given("--replay-batch"))
      opts.experiment.replay_batch =
          detail::parse_number<std::size_t>(key, value);
    else if (key == "lr" && !flag_given("--lr"))
      opts.experiment.learning_rate = detail::parse_number<double>(key, value);
    else if (key == "threshold" && !flag_given("--threshold"))
      opts.experiment.threshold = detail::parse_number<double>(key, value);
    else if (key == "seed" && !flag_given("--seed"))
      opts.experiment.seed = detail::parse_number<std::uint64_t>(key, value);
    else if (key == "hidden" && !flag_given("--hidden"))
      opts.experiment.hidden_units =
          detail::parse_number<std::size_t>(key, value);
    else if (key == "method" || key == "rho" || key == "memory_size" ||
             key == "batch_size" || key == "replay_batch" || key == "lr" ||
             key == "threshold" || key == "seed" || key == "hidden")
      ;  // flag took precedence
    else
      throw ConfigError("unknown run config key '" + key + "'");
  }
}

inline json run_manifest(const RunOptions& opts, double rho) {
  const ExperimentConfig& e = opts.experiment;
  json manifest;
  manifest["version"] = kVersion;
  manifest["command"] = "run";
  manifest["stream"] = opts.stream_path;
  manifest["test"] = opts.test_path;
  manifest["method"] = opts.method;
  manifest["rho"] = rho;
  manifest["memory_size"] = e.memory_size;
  manifest["batch_size"] = e.batch_size;
  manifest["replay_batch"] = e.replay_batch;
  manifest["learning_rate"] = e.learning_rate;
  manifest["threshold"] = e.threshold;
  manifest["seed"] = e.seed;
  manifest["hidden_units"] = e.hidden_units;
  manifest["forgetting_metric"] = e.forgetting_metric;
  manifest["minority_below"] = e.minority_below;
  manifest["majority_above"] = e.majority_above;
  manifest["record_trace"] = e.record_trace;
  manifest["record_grad_variance"] = e.record_grad_variance;
  manifest["snapshot_features"] = opts.snapshot_features;
  return manifest;
}

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream out = detail::open_out(path);
  out << text;
}

inline void run_single(const RunOptions& opts, const Stream& stream,
                       const Stream& test, double rho,
                       const std::string& out_dir) {
  std::filesystem::create_directories(out_dir);
  ExperimentConfig config = opts.experiment;
  config.method = method_from_string(opts.method);
  config.rho = rho;

  write_text(out_dir + "/manifest.json", run_manifest(opts, rho).dump(2) + "\n");
  const ExperimentResult result = run_experiment(stream, test, config);
  write_episode_csv(out_dir + "/metrics.csv", result.log);
  if (config.method == Method::kCrs || config.method == Method::kPrs)
    write_memory_snapshot(out_dir + "/memory.json", result.memory,
                          opts.snapshot_features);
  if (config.record_trace)
    write_trace_csv(out_dir + "/trace.csv", result.log.trace);
}

//! Sweep syntax "start:stop:step" (inclusive stop, positive step).
inline std::vector<double> parse_sweep(const std::string& text) {
  const auto parts = detail::split(text, ':');
  if (parts.size() != 3)
    throw ConfigError("sweep-rho: expected start:stop:step, got '" + text +
                      "'");
  const double start = detail::parse_number<double>("sweep-rho", parts[0]);
  const double stop = detail::parse_number<double>("sweep-rho", parts[1]);
  const double step = detail::parse_number<double>("sweep-rho", parts[2]);
  if (step <= 0.0) throw ConfigError("sweep-rho: step must be > 0");
  if (stop < start) throw ConfigError("sweep-rho: stop must be >= start");
  std::vector<double> values;
  for (double v = start; v <= stop + step * 1e-9; v += step)
    values.push_back(v);
  return values;
}

inline int cmd_generate(const std::string& config_path,
                        const std::string& out_path,
                        const std::string& test_out_path) {
  const StreamConfig config = stream_config_from_kv(read_kv_config(config_path));
  const Stream stream = gen_stream(config);
  write_stream_jsonl(out_path, stream);

  json manifest;
  manifest["version"] = kVersion;
  manifest["command"] = "generate";
  manifest["seed"] = config.seed;
  manifest["num_classes"] = config.num_classes;
  manifest["alpha"] = config.alpha;
  manifest["n_max"] = config.n_max;
  manifest["feature_dim"] = config.feature_dim;
  manifest["noise_sigma"] = config.noise_sigma;
  manifest["tasks"] = config.tasks;
  manifest["test_per_class"] = config.test_per_class;
  manifest["class_sizes"] =
      pareto_class_sizes(config.num_classes, config.alpha, config.n_max);
  manifest["stream_length"] = stream.size();
  if (!test_out_path.empty()) {
    const Stream test = gen_balanced_test(config);
    write_stream_jsonl(test_out_path, test);
    manifest["test_length"] = test.size();
  }
  write_text(out_path + ".manifest.json", manifest.dump(2) + "\n");
  std::cout << "wrote " << stream.size() << " examples to " << out_path
            << "\n";
  return 0;
}

inline int cmd_curate(const std::string& annotations_path,
                      const std::string& out_dir, std::size_t ngroups,
                      double beta, std::size_t min_classes,
                      std::size_t k_test, std::uint64_t seed,
                      std::size_t minority_below, std::size_t majority_above) {
  const AnnotationCorpus corpus =
      AnnotationCorpus::build(read_annotations_jsonl(annotations_path));
  const GroupSet groups =
      hierarchical_class_clustering(corpus, ngroups, beta, min_classes);
  const TaskAssignment assignment = assign_tasks(corpus, groups);

  std::filesystem::create_directories(out_dir);
  json report;
  report["version"] = kVersion;
  report["ngroups"] = ngroups;
  report["beta"] = beta;
  report["min_classes"] = min_classes;
  report["k_test"] = k_test;
  report["seed"] = seed;
  json group_names = json::array();
  for (const auto& group : groups.groups) {
    json names = json::array();
    for (ClassId c : group) names.push_back(corpus.class_vocab[c]);
    group_names.push_back(std::move(names));
  }
  report["groups"] = std::move(group_names);

  std::map<std::string, std::size_t> class_sizes;
  std::vector<std::size_t> task_sizes, test_sizes;
  for (std::size_t t = 0; t < assignment.tasks.size(); ++t) {
    const AnnotationCorpus& task = assignment.tasks[t];
    std::vector<AnnotationImage> train_images, test_images;
    if (k_test > 0 && !task.images.empty()) {
      const TrainTestSplit split = balanced_test_split(task, k_test, seed);
      for (std::size_t i : split.train) train_images.push_back(task.images[i]);
      for (std::size_t i : split.test) test_images.push_back(task.images[i]);
    } else {
      train_images = task.images;
    }
    const std::string stem = out_dir + "/task" + std::to_string(t);
    write_annotations_jsonl(stem + "_train.jsonl", train_images);
    if (k_test > 0) write_annotations_jsonl(stem + "_test.jsonl", test_images);
    task_sizes.push_back(train_images.size());
    test_sizes.push_back(test_images.size());
    for (const AnnotationImage& image : train_images)
      for (const std::string& name : image.labels) ++class_sizes[name];
  }
  report["task_sizes"] = task_sizes;
  if (k_test > 0) report["test_sizes"] = test_sizes;
  report["class_sizes"] = class_sizes;
  report["dropped_count"] = assignment.dropped_ids.size();
  report["dropped_ids"] = assignment.dropped_ids;

  std::vector<std::size_t> sizes_by_class(corpus.class_vocab.size(), 0);
  for (std::size_t c = 0; c < corpus.class_vocab.size(); ++c)
    if (const auto it = class_sizes.find(corpus.class_vocab[c]);
        it != class_sizes.end())
      sizes_by_class[c] = it->second;
  const std::vector<Tier> tiers =
      tier_split(sizes_by_class, minority_below, majority_above);
  json tier_map;
  for (std::size_t c = 0; c < corpus.class_vocab.size(); ++c)
    tier_map[corpus.class_vocab[c]] = tier_name(tiers[c]);
  report["tier_map"] = std::move(tier_map);

  write_text(out_dir + "/report.json", report.dump(2) + "\n");
  std::cout << "wrote " << assignment.tasks.size() << " tasks to " << out_dir
            << " (dropped " << assignment.dropped_ids.size() << " of "
            << corpus.images.size() << " images)\n";
  return 0;
}

inline int cmd_run(const RunOptions& opts) {
  const Stream stream = read_stream_jsonl(opts.stream_path);
  const Stream test =
      opts.test_path.empty() ? Stream{} : read_stream_jsonl(opts.test_path);
  method_from_string(opts.method);  // validate early

  if (!opts.sweep_rho.empty()) {
    for (double rho : parse_sweep(opts.sweep_rho)) {
      const std::string cell_dir =
          opts.out_dir + "/rho_" + format_double(rho);
      run_single(opts, stream, test, rho, cell_dir);
      std::cout << "rho " << format_double(rho) << " -> " << cell_dir << "\n";
    }
    return 0;
  }
  run_single(opts, stream, test, opts.experiment.rho, opts.out_dir);
  std::cout << "wrote results to " << opts.out_dir << "\n";
  return 0;
}

}  // namespace cli_detail

//! Entry point shared by the binary and the tests.
inline int cli_main(int argc, const char* const* argv) {
  CLI::App app{"Replay-memory experiment harness for class-imbalanced, "
               "task-free continual learning"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kVersion));

  // generate
  auto* generate = app.add_subcommand(
      "generate", "Generate a synthetic long-tailed multi-label stream");
  std::string gen_config, gen_out, gen_test_out;
  generate->add_option("--config", gen_config, "key = value stream config")
      ->required();
  generate->add_option("--out", gen_out, "output stream (JSON-Lines)")
      ->required();
  generate->add_option("--test-out", gen_test_out,
                       "also write a balanced test set here");

  // curate
  auto* curate = app.add_subcommand(
      "curate", "Split an annotation corpus into sequential tasks");
  std::string cur_annotations, cur_out;
  std::size_t cur_ngroups = 1, cur_min_classes = 1, cur_k_test = 0;
  double cur_beta = 1.0;
  std::uint64_t cur_seed = 0;
  std::size_t cur_minority = 200, cur_majority = 900;
  curate->add_option("--annotations", cur_annotations, "JSON-Lines annotations")
      ->required();
  curate->add_option("--out", cur_out, "output directory")->required();
  curate->add_option("--ngroups", cur_ngroups, "number of tasks")->required();
  curate->add_option("--beta", cur_beta, "inter-task balance weight");
  curate->add_option("--min-classes", cur_min_classes,
                     "minimum classes per task");
  curate->add_option("--k-test", cur_k_test, "test images per class");
  curate->add_option("--seed", cur_seed, "test split seed");
  curate->add_option("--minority-below", cur_minority,
                     "minority tier threshold");
  curate->add_option("--majority-above", cur_majority,
                     "majority tier threshold");

  // run
  auto* run = app.add_subcommand("run", "Run a continual-learning experiment");
  cli_detail::RunOptions opts;
  run->add_option("--stream", opts.stream_path, "training stream (JSON-Lines)")
      ->required();
  run->add_option("--test", opts.test_path, "held-out test set (JSON-Lines)");
  run->add_option("--out", opts.out_dir, "output directory")->required();
  run->add_option("--method", opts.method, "finetune|crs|prs|multitask");
  run->add_option("--rho", opts.experiment.rho, "power of allocation");
  run->add_option("--memory-size", opts.experiment.memory_size,
                  "replay memory capacity");
  run->add_option("--batch-size", opts.experiment.batch_size,
                  "online input batch size");
  run->add_option("--replay-batch", opts.experiment.replay_batch,
                  "replay batch size");
  run->add_option("--lr", opts.experiment.learning_rate, "learning rate");
  run->add_option("--threshold", opts.experiment.threshold,
                  "prediction threshold");
  run->add_option("--seed", opts.experiment.seed, "experiment seed");
  run->add_option("--hidden", opts.experiment.hidden_units,
                  "hidden units (0 = linear model)");
  run->add_option("--forget-metric", opts.experiment.forgetting_metric,
                  "metric feeding the forgetting measure");
  run->add_option("--minority-below", opts.experiment.minority_below,
                  "minority tier threshold");
  run->add_option("--majority-above", opts.experiment.majority_above,
                  "majority tier threshold");
  run->add_option("--sweep-rho", opts.sweep_rho,
                  "run one experiment per rho in start:stop:step");
  run->add_option("--config", opts.config_path,
                  "key = value defaults (flags take precedence)");
  run->add_flag("--trace", opts.experiment.record_trace,
                "write a per-step memory trace");
  run->add_flag("--grad-var", opts.experiment.record_grad_variance,
                "record gradient-variance diagnostics");
  run->add_flag("!--no-snapshot-features", opts.snapshot_features,
                "elide features from the memory snapshot");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (generate->parsed())
      return cli_detail::cmd_generate(gen_config, gen_out, gen_test_out);
    if (curate->parsed())
      return cli_detail::cmd_curate(cur_annotations, cur_out, cur_ngroups,
                                    cur_beta, cur_min_classes, cur_k_test,
                                    cur_seed, cur_minority, cur_majority);
    if (run->parsed()) {
      if (!opts.config_path.empty())
        cli_detail::apply_run_config_file(opts, *run);
      return cli_detail::cmd_run(opts);
    }
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const InfeasibleConstraintError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const DeficientClassError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "runtime error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}

}  // namespace prs
