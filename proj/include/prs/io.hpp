#pragma once

#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "prs/curation.hpp"
#include "prs/experiment.hpp"
#include "prs/replay_memory.hpp"
#include "prs/streamgen.hpp"
#include "prs/types.hpp"

namespace prs {

using nlohmann::json;

//! Shortest round-trip decimal text for a double (stable across runs).
inline std::string format_double(double value) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, ptr);
}

namespace detail {

inline std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open '" + path + "' for writing");
  return out;
}

inline std::ifstream open_in(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path + "' for reading");
  return in;
}

}  // namespace detail

//! One stream example per line: {"features":[...],"id":N,"labels":[...],"task":N}.
inline void write_stream_jsonl(const std::string& path, const Stream& stream) {
  std::ofstream out = detail::open_out(path);
  for (const TaggedExample& item : stream) {
    json line;
    line["id"] = item.example.id;
    line["features"] = item.example.features;
    line["labels"] = item.example.label.ids();
    line["task"] = item.task;
    out << line.dump() << "\n";
  }
}

//! Parse a stream file. Labels are normalized to a shared class universe
//! (the largest class id in the file + 1); empty labels and non-finite
//! features are rejected with the offending line number.
inline Stream read_stream_jsonl(const std::string& path) {
  std::ifstream in = detail::open_in(path);
  Stream stream;
  std::string line;
  std::size_t line_no = 0;
  std::size_t feature_dim = 0;
  std::size_t num_classes = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json parsed;
    try {
      parsed = json::parse(line);
    } catch (const json::exception& e) {
      throw ConfigError(path + ":" + std::to_string(line_no) + ": " +
                        e.what());
    }
    auto fail = [&](const std::string& what) {
      throw ConfigError(path + ":" + std::to_string(line_no) + ": " + what);
    };
    if (!parsed.contains("id") || !parsed.contains("features") ||
        !parsed.contains("labels"))
      fail("expected fields id, features, labels");
    TaggedExample item;
    item.example.id = parsed["id"].get<SampleId>();
    item.example.features = parsed["features"].get<std::vector<double>>();
    item.task = parsed.value("task", 0);
    for (double x : item.example.features)
      if (!std::isfinite(x)) fail("non-finite feature value");
    const auto label_ids = parsed["labels"].get<std::vector<ClassId>>();
    if (label_ids.empty()) fail("empty label set");
    if (stream.empty()) {
      feature_dim = item.example.features.size();
    } else if (item.example.features.size() != feature_dim) {
      fail("feature dimension differs from previous lines");
    }
    ClassId max_id = 0;
    for (ClassId c : label_ids) max_id = std::max(max_id, c);
    num_classes = std::max(num_classes, static_cast<std::size_t>(max_id) + 1);
    item.example.label = MultiHotLabel::from_ids(max_id + 1, label_ids);
    stream.push_back(std::move(item));
  }
  for (TaggedExample& item : stream) item.example.label.resize(num_classes);
  return stream;
}

//! Memory snapshot: {"capacity":N,"class_counts":[...],"samples":[...]}
//! with samples ascending by id; features can be elided.
inline json memory_snapshot(const ReplayMemory& memory,
                            bool include_features = true) {
  json snapshot;
  snapshot["capacity"] = memory.capacity();
  snapshot["class_counts"] = memory.class_counts();
  json samples = json::array();
  for (const auto& [id, ex] : memory.samples()) {
    json entry;
    entry["id"] = id;
    entry["labels"] = ex.label.ids();
    if (include_features) entry["features"] = ex.features;
    samples.push_back(std::move(entry));
  }
  snapshot["samples"] = std::move(samples);
  return snapshot;
}

inline void write_memory_snapshot(const std::string& path,
                                  const ReplayMemory& memory,
                                  bool include_features = true) {
  std::ofstream out = detail::open_out(path);
  out << memory_snapshot(memory, include_features).dump(2) << "\n";
}

inline void write_episode_csv(const std::string& path, const EpisodeLog& log) {
  std::ofstream out = detail::open_out(path);
  out << "checkpoint,task,tier,metric,value\n";
  for (const MetricRow& row : log.rows)
    out << row.checkpoint << "," << row.task << "," << row.tier << ","
        << row.metric << "," << format_double(row.value) << "\n";
}

inline void write_trace_csv(const std::string& path,
                            const std::vector<TraceRow>& trace) {
  std::ofstream out = detail::open_out(path);
  out << "t,event,victim_id,s,over_class\n";
  for (const TraceRow& row : trace) {
    const char* event = row.event == StepEvent::kFill     ? "fill"
                        : row.event == StepEvent::kAdmit ? "admit"
                                                          : "reject";
    out << row.step << "," << event << ",";
    if (row.victim) out << *row.victim;
    out << "," << format_double(row.probability) << ",";
    if (row.over_class) out << *row.over_class;
    out << "\n";
  }
}

//! Annotation corpus line format: {"id":"...","labels":["...",...]}.
inline std::vector<AnnotationImage> read_annotations_jsonl(
    const std::string& path) {
  std::ifstream in = detail::open_in(path);
  std::vector<AnnotationImage> images;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json parsed;
    try {
      parsed = json::parse(line);
    } catch (const json::exception& e) {
      throw ConfigError(path + ":" + std::to_string(line_no) + ": " +
                        e.what());
    }
    if (!parsed.contains("id") || !parsed.contains("labels"))
      throw ConfigError(path + ":" + std::to_string(line_no) +
                        ": expected fields id, labels");
    AnnotationImage image;
    image.id = parsed["id"].get<std::string>();
    image.labels = parsed["labels"].get<std::vector<std::string>>();
    if (image.labels.empty())
      throw ConfigError(path + ":" + std::to_string(line_no) +
                        ": empty label set");
    images.push_back(std::move(image));
  }
  return images;
}

inline void write_annotations_jsonl(const std::string& path,
                                    const std::vector<AnnotationImage>& images) {
  std::ofstream out = detail::open_out(path);
  for (const AnnotationImage& image : images) {
    json line;
    line["id"] = image.id;
    line["labels"] = image.labels;
    out << line.dump() << "\n";
  }
}

//! Plain key = value file; '#' starts a comment, blank lines are skipped.
inline std::map<std::string, std::string> read_kv_config(
    const std::string& path) {
  std::ifstream in = detail::open_in(path);
  std::map<std::string, std::string> kv;
  std::string line;
  std::size_t line_no = 0;
  auto trim = [](std::string s) {
    const auto begin = s.find_first_not_of(" \t\r");
    const auto end = s.find_last_not_of(" \t\r");
    return begin == std::string::npos ? std::string()
                                      : s.substr(begin, end - begin + 1);
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos)
      line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(path + ":" + std::to_string(line_no) +
                        ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty())
      throw ConfigError(path + ":" + std::to_string(line_no) + ": empty key");
    kv[key] = value;
  }
  return kv;
}

namespace detail {

template <class T>
T parse_number(const std::string& field, const std::string& text) {
  std::istringstream in(text);
  T value;
  in >> value;
  if (in.fail() || !(in >> std::ws).eof())
    throw ConfigError(field + ": cannot parse '" + text + "'");
  return value;
}

inline std::vector<std::string> split(const std::string& text, char sep) {
  std::vector<std::string> parts;
  std::string part;
  std::istringstream in(text);
  while (std::getline(in, part, sep)) parts.push_back(part);
  return parts;
}

}  // namespace detail

//! Task schedule syntax: class ids separated by spaces or commas, tasks
//! separated by '|', e.g. "0 4 8 | 1 5 9".
inline std::vector<std::vector<ClassId>> parse_tasks(const std::string& text) {
  std::vector<std::vector<ClassId>> tasks;
  for (const std::string& group : detail::split(text, '|')) {
    std::vector<ClassId> task;
    std::string token;
    std::istringstream in(group);
    while (in >> token) {
      for (const std::string& id : detail::split(token, ','))
        if (!id.empty())
          task.push_back(detail::parse_number<ClassId>("tasks", id));
    }
    if (!task.empty()) tasks.push_back(std::move(task));
  }
  return tasks;
}

//! Sparse co-occurrence syntax: "i:j:p" triplets separated by ',' or ';'.
inline std::vector<std::vector<double>> parse_cooccurrence(
    const std::string& text, std::size_t num_classes) {
  if (num_classes == 0)
    throw ConfigError("cooccurrence: num_classes must be set first");
  std::vector<std::vector<double>> matrix(num_classes,
                                          std::vector<double>(num_classes, 0.0));
  bool any = false;
  for (const std::string& chunk : detail::split(text, ';')) {
    for (const std::string& triplet : detail::split(chunk, ',')) {
      std::string trimmed;
      for (char c : triplet)
        if (!std::isspace(static_cast<unsigned char>(c))) trimmed += c;
      if (trimmed.empty()) continue;
      const auto parts = detail::split(trimmed, ':');
      if (parts.size() != 3)
        throw ConfigError("cooccurrence: expected i:j:p, got '" + triplet +
                          "'");
      const auto i = detail::parse_number<std::size_t>("cooccurrence", parts[0]);
      const auto j = detail::parse_number<std::size_t>("cooccurrence", parts[1]);
      const auto p = detail::parse_number<double>("cooccurrence", parts[2]);
      if (i >= num_classes || j >= num_classes)
        throw ConfigError("cooccurrence: class id outside 0.." +
                          std::to_string(num_classes - 1));
      matrix[i][j] = p;
      any = true;
    }
  }
  if (!any) matrix.clear();
  return matrix;
}

//! Build a StreamConfig from a key = value map (see README for the keys).
inline StreamConfig stream_config_from_kv(
    const std::map<std::string, std::string>& kv) {
  StreamConfig config;
  for (const auto& [key, value] : kv) {
    if (key == "num_classes")
      config.num_classes = detail::parse_number<std::size_t>(key, value);
    else if (key == "alpha")
      config.alpha = detail::parse_number<double>(key, value);
    else if (key == "n_max")
      config.n_max = detail::parse_number<std::size_t>(key, value);
    else if (key == "feature_dim")
      config.feature_dim = detail::parse_number<std::size_t>(key, value);
    else if (key == "noise_sigma")
      config.noise_sigma = detail::parse_number<double>(key, value);
    else if (key == "seed")
      config.seed = detail::parse_number<std::uint64_t>(key, value);
    else if (key == "test_per_class")
      config.test_per_class = detail::parse_number<std::size_t>(key, value);
    else if (key == "tasks")
      config.tasks = parse_tasks(value);
    else if (key == "cooccurrence")
      ;  // parsed after num_classes is known
    else
      throw ConfigError("unknown config key '" + key + "'");
  }
  if (const auto it = kv.find("cooccurrence"); it != kv.end())
    config.cooccurrence = parse_cooccurrence(it->second, config.num_classes);
  config.validate();
  return config;
}

}  // namespace prs
