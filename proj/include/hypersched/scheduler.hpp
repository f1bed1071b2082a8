#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "hypersched/complexity.hpp"
#include "hypersched/priority.hpp"
#include "hypersched/spec.hpp"
#include "hypersched/trial.hpp"

namespace hypersched {

enum class Mode { Heuristic, ComplexityOnly, PriorityOnly, Fcfs };

inline const char* to_string(Mode m) {
  switch (m) {
    case Mode::Heuristic: return "heuristic";
    case Mode::ComplexityOnly: return "complexity_only";
    case Mode::PriorityOnly: return "priority_only";
    case Mode::Fcfs: return "fcfs";
  }
  return "?";
}

inline Mode mode_from_string(const std::string& s) {
  if (s == "heuristic") return Mode::Heuristic;
  if (s == "complexity_only") return Mode::ComplexityOnly;
  if (s == "priority_only") return Mode::PriorityOnly;
  if (s == "fcfs") return Mode::Fcfs;
  throw Error("unknown mode \"" + s + "\"");
}

// A ranked group of workers sharing hardware features. performance_score is
// the user-declared ordering key; capacity counts currently connected workers.
struct ComputeClass {
  std::string name;
  std::map<std::string, std::string> features;
  double performance_score = 1.0;
  int capacity = 0;
};

struct WorkerInfo {
  std::string worker_id;
  std::string class_name;
  std::map<std::string, std::string> features;
  double last_heartbeat = 0.0;
};

struct ModelState {
  std::string model_id;
  double complexity = 0.0;
  std::optional<double> priority;  // nullopt = unknown, ranks first
  int trial_count = 0;
  int rank_c = 0;
  int rank_p = 0;
  int combined_rank = 0;
};

struct ScheduleTable {
  Mode mode = Mode::Heuristic;
  double epsilon = 0.1;
  std::map<std::string, std::string> assignments;  // model -> class
  std::map<std::string, double> weights;           // model -> weight, sums to 1
  std::vector<std::string> ranked;                 // best combined rank first
};

namespace detail {

inline std::vector<int> dense_rank_desc(const std::vector<double>& keys) {
  std::vector<double> distinct = keys;
  std::sort(distinct.begin(), distinct.end(), std::greater<>());
  distinct.erase(std::unique(distinct.begin(), distinct.end()),
                 distinct.end());
  std::vector<int> ranks(keys.size());
  for (std::size_t i = 0; i < keys.size(); ++i) {
    const auto it =
        std::lower_bound(distinct.begin(), distinct.end(), keys[i],
                         std::greater<>());
    ranks[i] = static_cast<int>(it - distinct.begin()) + 1;
  }
  return ranks;
}

// Largest-remainder apportionment of `total` items over `shares`.
// Ties on the fractional part are broken by position.
inline std::vector<int> largest_remainder(int total,
                                          const std::vector<int>& shares) {
  const double sum = static_cast<double>(
      std::accumulate(shares.begin(), shares.end(), 0));
  std::vector<int> counts(shares.size(), 0);
  std::vector<std::pair<double, std::size_t>> fracs;
  int assigned = 0;
  for (std::size_t i = 0; i < shares.size(); ++i) {
    const double quota = total * static_cast<double>(shares[i]) / sum;
    counts[i] = static_cast<int>(std::floor(quota));
    assigned += counts[i];
    fracs.emplace_back(quota - std::floor(quota), i);
  }
  std::stable_sort(fracs.begin(), fracs.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (int k = 0; k < total - assigned; ++k) {
    counts[fracs[static_cast<std::size_t>(k)].second] += 1;
  }
  return counts;
}

}  // namespace detail

// Ranks models with equal precedence between the two heuristics: dense rank
// by descending complexity plus dense rank by descending priority (unknown
// priority ranks first), summed. Single-heuristic modes rank on that
// heuristic alone. Output is sorted by combined rank, ties broken by id.
inline std::vector<ModelState> rank_models(std::vector<ModelState> states,
                                           Mode mode = Mode::Heuristic) {
  if (states.empty()) throw Error("rank_models: no models");

  std::vector<double> c_keys, p_keys;
  c_keys.reserve(states.size());
  p_keys.reserve(states.size());
  for (const auto& s : states) {
    if (!std::isfinite(s.complexity)) {
      throw Error(s.model_id + ": non-finite complexity");
    }
    c_keys.push_back(s.complexity);
    p_keys.push_back(
        s.priority.value_or(std::numeric_limits<double>::infinity()));
  }
  const auto rc = detail::dense_rank_desc(c_keys);
  const auto rp = detail::dense_rank_desc(p_keys);
  for (std::size_t i = 0; i < states.size(); ++i) {
    states[i].rank_c = rc[i];
    states[i].rank_p = rp[i];
    switch (mode) {
      case Mode::ComplexityOnly: states[i].combined_rank = rc[i]; break;
      case Mode::PriorityOnly: states[i].combined_rank = rp[i]; break;
      default: states[i].combined_rank = rc[i] + rp[i]; break;
    }
  }
  std::sort(states.begin(), states.end(), [](const auto& a, const auto& b) {
    return std::tie(a.combined_rank, a.model_id) <
           std::tie(b.combined_rank, b.model_id);
  });
  return states;
}

// Converts a ranked model list into sampling weights and model-to-class
// assignments. Position i of R gets weight proportional to R - i + 1;
// classes sorted by descending performance score receive contiguous rank
// blocks sized by largest-remainder on their capacities, so top-ranked
// models land on the most performant hardware. Fcfs mode is uniform with no
// assignments.
inline ScheduleTable build_schedule(const std::vector<ModelState>& ranked,
                                    const std::vector<ComputeClass>& classes,
                                    Mode mode, double epsilon) {
  if (ranked.empty()) throw Error("build_schedule: no models");
  ScheduleTable table;
  table.mode = mode;
  table.epsilon = epsilon;
  for (const auto& s : ranked) table.ranked.push_back(s.model_id);

  const auto r = static_cast<int>(ranked.size());
  if (mode == Mode::Fcfs) {
    for (const auto& s : ranked) {
      table.weights[s.model_id] = 1.0 / static_cast<double>(r);
    }
    return table;
  }

  const double weight_sum = static_cast<double>(r) * (r + 1) / 2.0;
  for (int i = 0; i < r; ++i) {
    table.weights[ranked[static_cast<std::size_t>(i)].model_id] =
        static_cast<double>(r - i) / weight_sum;
  }

  std::vector<ComputeClass> active;
  for (const auto& c : classes) {
    if (c.capacity > 0) active.push_back(c);
  }
  if (active.empty()) {
    throw Error("build_schedule: no compute class has capacity");
  }
  std::sort(active.begin(), active.end(), [](const auto& a, const auto& b) {
    return std::tie(b.performance_score, a.name) <
           std::tie(a.performance_score, b.name);
  });

  const auto k = static_cast<int>(active.size());
  std::vector<int> block_sizes;
  if (r < k) {
    // Fewer models than classes: one model to each of the top classes.
    block_sizes.assign(active.size(), 0);
    for (int i = 0; i < r; ++i) block_sizes[static_cast<std::size_t>(i)] = 1;
  } else {
    std::vector<int> caps;
    for (const auto& c : active) caps.push_back(c.capacity);
    block_sizes = detail::largest_remainder(r, caps);
    // Every active class serves at least one model; take from the largest
    // block (the least performant among equals) to fill gaps.
    for (std::size_t i = 0; i < block_sizes.size(); ++i) {
      while (block_sizes[i] == 0) {
        std::size_t donor = 0;
        for (std::size_t j = 1; j < block_sizes.size(); ++j) {
          if (block_sizes[j] >= block_sizes[donor]) donor = j;
        }
        block_sizes[donor] -= 1;
        block_sizes[i] += 1;
      }
    }
  }

  std::size_t pos = 0;
  for (std::size_t j = 0; j < active.size(); ++j) {
    for (int b = 0; b < block_sizes[j] && pos < ranked.size(); ++b, ++pos) {
      table.assignments[ranked[pos].model_id] = active[j].name;
    }
  }
  return table;
}

struct SchedulerOptions {
  Mode mode = Mode::Heuristic;
  double epsilon = 0.1;
  PriorityConfig priority;
  int rebuild_every = 25;        // results between schedule rebuilds
  double rebuild_seconds = 300;  // or this much elapsed time
  double heartbeat_timeout_s = 60.0;
  std::uint64_t seed = 1;
};

struct ModelInfo {
  ModelSpace space;
  double complexity = 0.0;

  static ModelInfo from_space(ModelSpace space) {
    ModelInfo info;
    info.complexity = model_complexity(space).total;
    info.space = std::move(space);
    return info;
  }
};

struct ClassConfig {
  std::string name;
  double performance_score = 1.0;
  std::map<std::string, std::string> match;  // feature predicates
};

struct ReportOutcome {
  TrialRecord record;
  bool rebuilt = false;
};

// Owns per-model trial ledgers, worker/class membership, and the live
// ScheduleTable. Not internally synchronized: a single logical owner must
// serialize calls (the master's event loop, or a simulation loop).
class Scheduler {
 public:
  Scheduler(std::vector<ModelInfo> models, std::vector<ClassConfig> classes,
            SchedulerOptions options)
      : options_(options), priority_rng_(options.seed ^ 0x9e3779b97f4a7c15ULL) {
    if (models.empty()) throw Error("scheduler needs at least one model");
    for (auto& m : models) {
      const auto id = m.space.model_id;
      if (index_of_.count(id)) throw Error("duplicate model id " + id);
      index_of_[id] = models_.size();
      models_.push_back(Entry{std::move(m), std::nullopt, true, {}});
    }
    for (auto& c : classes) add_class(std::move(c));
    rebuild_table();
  }

  const std::vector<ClassConfig>& class_configs() const { return class_configs_; }

  // First class whose feature predicates all match, in declaration order;
  // unmatched workers get an auto class keyed by their feature set.
  std::string classify(const std::map<std::string, std::string>& features) {
    for (const auto& c : class_configs_) {
      bool ok = true;
      for (const auto& [k, v] : c.match) {
        const auto it = features.find(k);
        if (it == features.end() || it->second != v) {
          ok = false;
          break;
        }
      }
      if (ok) return c.name;
    }
    std::string name = "auto";
    for (const auto& [k, v] : features) name += ":" + k + "=" + v;
    if (!class_by_name_.count(name)) {
      add_class(ClassConfig{name, 1.0, {}});
    }
    return name;
  }

  // Reconnect with a known id replaces the prior registration.
  void register_worker(WorkerInfo info, double now) {
    info.last_heartbeat = now;
    if (!class_by_name_.count(info.class_name)) {
      add_class(ClassConfig{info.class_name, 1.0, {}});
    }
    const std::string id = info.worker_id;
    workers_.insert_or_assign(id, std::move(info));
    refresh_capacities();
    rebuild_table();
  }

  void deregister_worker(const std::string& worker_id) {
    if (workers_.erase(worker_id) > 0) {
      refresh_capacities();
      if (total_capacity() > 0) rebuild_table();
    }
  }

  void touch_worker(const std::string& worker_id, double now) {
    const auto it = workers_.find(worker_id);
    if (it != workers_.end()) it->second.last_heartbeat = now;
  }

  // Removes workers silent past the heartbeat timeout; returns their ids so
  // the caller can requeue any in-flight work.
  std::vector<std::string> expire_workers(double now) {
    std::vector<std::string> expired;
    for (const auto& [id, w] : workers_) {
      if (now - w.last_heartbeat > options_.heartbeat_timeout_s) {
        expired.push_back(id);
      }
    }
    for (const auto& id : expired) workers_.erase(id);
    if (!expired.empty()) {
      refresh_capacities();
      if (total_capacity() > 0) rebuild_table();
    }
    return expired;
  }

  const WorkerInfo* worker(const std::string& worker_id) const {
    const auto it = workers_.find(worker_id);
    return it == workers_.end() ? nullptr : &it->second;
  }

  std::size_t worker_count() const { return workers_.size(); }

  int class_capacity(const std::string& name) const {
    const auto it = class_by_name_.find(name);
    return it == class_by_name_.end() ? 0 : classes_[it->second].capacity;
  }

  // Picks the model for a requesting worker. Heuristic modes draw from the
  // worker's class block with probability 1 - epsilon and from the global
  // weighted distribution otherwise (also whenever the class block is empty,
  // so no worker ever starves). Fcfs draws uniformly.
  const std::string& next_task(const std::string& worker_id, Rng& rng) {
    const auto wit = workers_.find(worker_id);
    if (wit == workers_.end()) throw Error("unknown worker " + worker_id);

    if (table_.mode == Mode::Fcfs) {
      return models_[rng.index(models_.size())].info.space.model_id;
    }
    const bool explore = rng.uniform01() < table_.epsilon;
    if (!explore) {
      std::vector<std::size_t> in_class;
      std::vector<double> w;
      for (const auto& [model_id, class_name] : table_.assignments) {
        if (class_name == wit->second.class_name) {
          const auto idx = index_of_.at(model_id);
          in_class.push_back(idx);
          w.push_back(table_.weights.at(model_id));
        }
      }
      if (!in_class.empty()) {
        return models_[in_class[weighted_index(w, rng)]].info.space.model_id;
      }
    }
    std::vector<double> w;
    w.reserve(models_.size());
    for (const auto& e : models_) {
      w.push_back(table_.weights.at(e.info.space.model_id));
    }
    return models_[weighted_index(w, rng)].info.space.model_id;
  }

  const ModelSpace& model(const std::string& model_id) const {
    return entry(model_id).info.space;
  }

  std::vector<std::string> model_ids() const {
    std::vector<std::string> ids;
    ids.reserve(models_.size());
    for (const auto& e : models_) ids.push_back(e.info.space.model_id);
    return ids;
  }

  // Appends a finished trial, stamps its per-model sequence number, and
  // rebuilds priorities plus the schedule on the configured cadence.
  ReportOutcome report_result(const std::string& model_id,
                              Assignment assignment, double loss,
                              double duration_s,
                              const std::string& worker_class, double now) {
    if (!std::isfinite(loss)) throw Error("loss must be finite");
    auto& e = entry(model_id);
    TrialRecord record;
    record.model_id = model_id;
    record.assignment = std::move(assignment);
    record.loss = loss;
    record.duration_s = duration_s;
    record.worker_class = worker_class;
    record.sequence = static_cast<std::int64_t>(e.trials.size()) + 1;
    e.trials.push_back(record);
    e.priority_stale = true;

    ++results_since_rebuild_;
    ReportOutcome out{std::move(record), false};
    if (results_since_rebuild_ >= options_.rebuild_every) {
      rebuild_heuristics(now);
      out.rebuilt = true;
    }
    return out;
  }

  // Time-based rebuild trigger; the owner calls this periodically.
  bool maybe_rebuild(double now) {
    if (results_since_rebuild_ > 0 &&
        now - last_rebuild_time_ >= options_.rebuild_seconds) {
      rebuild_heuristics(now);
      return true;
    }
    return false;
  }

  const ScheduleTable& table() const { return table_; }

  int trial_count(const std::string& model_id) const {
    return static_cast<int>(entry(model_id).trials.size());
  }

  const std::vector<TrialRecord>& trials(const std::string& model_id) const {
    return entry(model_id).trials;
  }

  std::optional<double> model_priority(const std::string& model_id) const {
    return entry(model_id).priority;
  }

  double model_complexity_total(const std::string& model_id) const {
    return entry(model_id).info.complexity;
  }

  std::vector<ModelState> states() const {
    std::vector<ModelState> out;
    out.reserve(models_.size());
    for (const auto& e : models_) {
      ModelState s;
      s.model_id = e.info.space.model_id;
      s.complexity = e.info.complexity;
      s.priority = e.priority;
      s.trial_count = static_cast<int>(e.trials.size());
      out.push_back(std::move(s));
    }
    return out;
  }

  // Invoked with every freshly published table (schedule history logging).
  void set_publish_hook(std::function<void(const ScheduleTable&)> hook) {
    publish_hook_ = std::move(hook);
    if (publish_hook_) publish_hook_(table_);
  }

 private:
  struct Entry {
    ModelInfo info;
    std::optional<double> priority;
    bool priority_stale = true;
    std::vector<TrialRecord> trials;
  };

  Entry& entry(const std::string& model_id) {
    const auto it = index_of_.find(model_id);
    if (it == index_of_.end()) throw Error("unknown model " + model_id);
    return models_[it->second];
  }
  const Entry& entry(const std::string& model_id) const {
    const auto it = index_of_.find(model_id);
    if (it == index_of_.end()) throw Error("unknown model " + model_id);
    return models_[it->second];
  }

  void add_class(ClassConfig cfg) {
    if (class_by_name_.count(cfg.name)) {
      throw Error("duplicate compute class " + cfg.name);
    }
    ComputeClass c;
    c.name = cfg.name;
    c.performance_score = cfg.performance_score;
    if (!(c.performance_score > 0.0)) {
      throw Error(cfg.name + ": performance_score must be > 0");
    }
    class_by_name_[c.name] = classes_.size();
    classes_.push_back(std::move(c));
    class_configs_.push_back(std::move(cfg));
  }

  void refresh_capacities() {
    for (auto& c : classes_) c.capacity = 0;
    for (const auto& [id, w] : workers_) {
      classes_[class_by_name_.at(w.class_name)].capacity += 1;
    }
  }

  int total_capacity() const {
    int total = 0;
    for (const auto& c : classes_) total += c.capacity;
    return total;
  }

  static std::size_t weighted_index(const std::vector<double>& w, Rng& rng) {
    double total = 0.0;
    for (const double x : w) total += x;
    const double u = rng.uniform01() * total;
    double acc = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
      acc += w[i];
      if (u < acc) return i;
    }
    return w.size() - 1;
  }

  void recompute_priorities() {
    for (auto& e : models_) {
      if (!e.priority_stale) continue;
      if (static_cast<int>(e.trials.size()) < options_.priority.min_trials) {
        continue;  // stays unknown
      }
      try {
        e.priority = hypersched::priority(e.trials, e.info.space,
                                          options_.priority, priority_rng_);
        e.priority_stale = false;
      } catch (const Error&) {
        // keep the previous estimate; retry on the next cadence
      }
    }
  }

  void rebuild_heuristics(double now) {
    recompute_priorities();
    results_since_rebuild_ = 0;
    last_rebuild_time_ = now;
    rebuild_table();
  }

  void rebuild_table() {
    const Mode mode = options_.mode;
    auto ranked = rank_models(states(), mode);
    if (mode != Mode::Fcfs && total_capacity() == 0) {
      // No one can request yet; publish a uniform placeholder.
      ScheduleTable t;
      t.mode = mode;
      t.epsilon = options_.epsilon;
      for (const auto& s : ranked) {
        t.ranked.push_back(s.model_id);
        t.weights[s.model_id] = 1.0 / static_cast<double>(ranked.size());
      }
      table_ = std::move(t);
    } else {
      table_ = build_schedule(ranked, classes_, mode, options_.epsilon);
    }
    if (publish_hook_) publish_hook_(table_);
  }

  SchedulerOptions options_;
  std::vector<Entry> models_;
  std::unordered_map<std::string, std::size_t> index_of_;
  std::vector<ComputeClass> classes_;
  std::vector<ClassConfig> class_configs_;
  std::unordered_map<std::string, std::size_t> class_by_name_;
  std::map<std::string, WorkerInfo> workers_;
  ScheduleTable table_;
  Rng priority_rng_;
  int results_since_rebuild_ = 0;
  double last_rebuild_time_ = 0.0;
  std::function<void(const ScheduleTable&)> publish_hook_;
};

}  // namespace hypersched
