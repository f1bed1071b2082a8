#pragma once

#include <cstdint>
#include <string>

#include "hypersched/json_util.hpp"
#include "hypersched/spec.hpp"

namespace hypersched {

// One evaluated trial: a sampled assignment, the objective's loss (lower is
// better, always finite — non-finite losses are failures, not trials), and
// where/when it ran.
struct TrialRecord {
  std::string model_id;
  Assignment assignment;
  double loss = 0.0;
  double duration_s = 0.0;
  std::string worker_class;
  std::int64_t sequence = 0;   // strictly increasing per model
  std::int64_t task_id = 0;

  bool operator==(const TrialRecord&) const = default;
};

inline Json trial_to_json(const TrialRecord& t) {
  Json j;
  j["assignment"] = t.assignment.values;
  j["duration_s"] = t.duration_s;
  j["loss"] = t.loss;
  j["model_id"] = t.model_id;
  j["sequence"] = t.sequence;
  j["task_id"] = t.task_id;
  j["worker_class"] = t.worker_class;
  return j;
}

inline TrialRecord trial_from_json(const Json& j) {
  TrialRecord t;
  t.model_id = j.at("model_id").get<std::string>();
  t.assignment.model_id = t.model_id;
  for (const auto& [k, v] : j.at("assignment").items()) {
    t.assignment.values.emplace(k, scalar_from_json(v));
  }
  t.loss = j.at("loss").get<double>();
  t.duration_s = j.at("duration_s").get<double>();
  t.sequence = j.at("sequence").get<std::int64_t>();
  t.task_id = j.value("task_id", std::int64_t{0});
  t.worker_class = j.value("worker_class", std::string{});
  return t;
}

}  // namespace hypersched
