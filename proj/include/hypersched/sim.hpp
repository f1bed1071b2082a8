#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <queue>
#include <sstream>
#include <string>
#include <vector>

#include "hypersched/encode.hpp"
#include "hypersched/json_util.hpp"
#include "hypersched/mathutil.hpp"
#include "hypersched/scheduler.hpp"

namespace hypersched {

// Synthetic loss generator for a simulated model. `u` is the model's first
// encoded coordinate when it has domains, otherwise an independent uniform
// draw.
struct LossModel {
  enum class Kind { Constant, NoisyQuadratic, Sinusoidal };
  Kind kind = Kind::Constant;
  double value = 1.0;    // constant
  double center = 0.5;   // noisy_quadratic
  double scale = 1.0;    // noisy_quadratic
  double amp = 1.0;      // sinusoidal
  double cycles = 3.0;   // sinusoidal full periods over [0, 1]
  double noise = 0.0;

  double sample_loss(double u, Rng& rng) const {
    double base = 0.0;
    switch (kind) {
      case Kind::Constant: base = value; break;
      case Kind::NoisyQuadratic:
        base = scale * (u - center) * (u - center);
        break;
      case Kind::Sinusoidal:
        base = amp * std::sin(2.0 * 3.14159265358979323846 * cycles * u);
        break;
    }
    return noise > 0.0 ? base + rng.normal(0.0, noise) : base;
  }
};

struct SimClass {
  std::string name;
  double performance_score = 1.0;
  int worker_count = 1;
  double speed_factor = 1.0;  // service time = base_cost_s / speed_factor
};

struct SimModel {
  std::string model_id;
  double complexity_hint = 1.0;  // ignored when the scenario carries a spec
  double base_cost_s = 60.0;
  LossModel loss;
};

struct Scenario {
  std::vector<SimClass> classes;
  std::vector<SimModel> models;
  double duration_s = 3600.0;
  std::uint64_t seed = 1;
  Mode policy = Mode::Heuristic;
  double epsilon = 0.1;
  double jitter_sigma = 0.0;  // lognormal service-time jitter, 0 disables
  std::optional<std::string> spec_path;  // real domains + measured complexity

  void validate() const {
    if (classes.empty()) throw Error("scenario needs at least one class");
    if (models.empty()) throw Error("scenario needs at least one model");
    if (!(duration_s > 0.0)) throw Error("duration_s must be > 0");
    for (const auto& c : classes) {
      if (c.worker_count < 1) {
        throw Error(c.name + ": worker_count must be >= 1");
      }
      if (!(c.speed_factor > 0.0)) {
        throw Error(c.name + ": speed_factor must be > 0");
      }
    }
    for (const auto& m : models) {
      if (!(m.base_cost_s > 0.0)) {
        throw Error(m.model_id + ": base_cost_s must be > 0");
      }
    }
  }
};

struct SimReport {
  int tasks_completed = 0;
  double throughput_per_hour = 0.0;
  std::map<std::string, double> per_class_utilization;
  std::map<std::string, int> per_model_counts;
  std::map<std::string, double> best_loss_per_model;
};

inline Json sim_report_to_json(const SimReport& r) {
  Json j;
  j["tasks_completed"] = r.tasks_completed;
  j["throughput_per_hour"] = r.throughput_per_hour;
  j["per_class_utilization"] = r.per_class_utilization;
  j["per_model_counts"] = r.per_model_counts;
  j["best_loss_per_model"] = r.best_loss_per_model;
  return j;
}

namespace sim_detail {

inline LossModel parse_loss_model(const Json& j, const std::string& path) {
  LossModel lm;
  if (j.is_null()) return lm;
  const std::string kind = j.value("kind", std::string("constant"));
  if (kind == "constant") {
    lm.kind = LossModel::Kind::Constant;
  } else if (kind == "noisy_quadratic") {
    lm.kind = LossModel::Kind::NoisyQuadratic;
  } else if (kind == "sinusoidal") {
    lm.kind = LossModel::Kind::Sinusoidal;
  } else {
    throw ParseError(path, "unknown loss model kind \"" + kind + "\"");
  }
  lm.value = j.value("value", lm.value);
  lm.center = j.value("center", lm.center);
  lm.scale = j.value("scale", lm.scale);
  lm.amp = j.value("amp", lm.amp);
  lm.cycles = j.value("cycles", lm.cycles);
  lm.noise = j.value("noise", lm.noise);
  return lm;
}

}  // namespace sim_detail

inline Scenario parse_scenario(const Json& j) {
  Scenario s;
  if (!j.is_object()) throw ParseError("", "scenario must be a JSON object");
  if (!j.contains("classes") || !j.at("classes").is_array()) {
    throw ParseError("classes", "missing class list");
  }
  for (const auto& cj : j.at("classes")) {
    SimClass c;
    c.name = cj.at("name").get<std::string>();
    c.performance_score = cj.value("performance_score", 1.0);
    c.worker_count = cj.value("worker_count", 1);
    c.speed_factor = cj.value("speed_factor", 1.0);
    s.classes.push_back(std::move(c));
  }
  if (!j.contains("models") || !j.at("models").is_array()) {
    throw ParseError("models", "missing model list");
  }
  for (const auto& mj : j.at("models")) {
    SimModel m;
    m.model_id = mj.at("model_id").get<std::string>();
    m.complexity_hint = mj.value("complexity_hint", 1.0);
    m.base_cost_s = mj.at("base_cost_s").get<double>();
    m.loss = sim_detail::parse_loss_model(mj.value("loss_model", Json()),
                                          m.model_id);
    s.models.push_back(std::move(m));
  }
  s.duration_s = j.value("duration_s", 3600.0);
  s.seed = j.value("seed", std::uint64_t{1});
  s.policy = mode_from_string(j.value("policy", std::string("heuristic")));
  s.epsilon = j.value("epsilon", 0.1);
  s.jitter_sigma = j.value("jitter_sigma", 0.0);
  if (j.contains("spec_path")) {
    s.spec_path = j.at("spec_path").get<std::string>();
  }
  s.validate();
  return s;
}

inline Scenario load_scenario_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(path, "cannot open file");
  std::ostringstream buf;
  buf << in.rdbuf();
  const Json j = Json::parse(buf.str(), nullptr, false);
  if (j.is_discarded()) throw ParseError(path, "scenario is not valid JSON");
  try {
    return parse_scenario(j);
  } catch (const ParseError& e) {
    throw ParseError(path + (e.path().empty() ? "" : ":" + e.path()),
                     e.what());
  }
}

// Optional event trace: one line per completed task.
struct SimTraceEntry {
  double time_s = 0.0;
  std::string worker_id;
  std::string class_name;
  std::string model_id;
  double service_s = 0.0;
  double loss = 0.0;
};

// Discrete-event replay of the scheduling policy over a virtual worker pool.
// The production Scheduler drives model selection and rebuilds exactly as in
// a live run; service times are base_cost / speed with optional lognormal
// jitter. Tasks still in flight when the clock runs out are not counted.
inline SimReport run_simulation(const Scenario& scenario,
                                std::vector<SimTraceEntry>* trace = nullptr) {
  scenario.validate();

  std::vector<ModelInfo> infos;
  std::map<std::string, const SimModel*> sim_model_of;
  if (scenario.spec_path) {
    const SpecTree tree = load_spec_file(*scenario.spec_path);
    for (auto& space : split(tree)) {
      infos.push_back(ModelInfo::from_space(std::move(space)));
    }
    if (infos.size() != scenario.models.size()) {
      throw Error("scenario model list does not match the search-space forest size");
    }
    for (const auto& m : scenario.models) sim_model_of[m.model_id] = &m;
    for (const auto& info : infos) {
      if (!sim_model_of.count(info.space.model_id)) {
        throw Error("scenario has no cost entry for model " +
                    info.space.model_id);
      }
    }
  } else {
    for (const auto& m : scenario.models) {
      ModelInfo info;
      info.space.model_id = m.model_id;
      info.complexity = m.complexity_hint;
      infos.push_back(std::move(info));
      sim_model_of[m.model_id] = &m;
    }
  }

  std::vector<ClassConfig> classes;
  for (const auto& c : scenario.classes) {
    classes.push_back(ClassConfig{c.name, c.performance_score, {}});
  }
  SchedulerOptions opts;
  opts.mode = scenario.policy;
  opts.epsilon = scenario.epsilon;
  opts.seed = scenario.seed;
  Scheduler scheduler(std::move(infos), std::move(classes), opts);

  struct VWorker {
    std::string id;
    std::string class_name;
    double speed = 1.0;
  };
  std::vector<VWorker> workers;
  std::map<std::string, double> class_busy;
  std::map<std::string, int> class_sizes;
  for (const auto& c : scenario.classes) {
    class_busy[c.name] = 0.0;
    class_sizes[c.name] = c.worker_count;
    for (int i = 0; i < c.worker_count; ++i) {
      VWorker w;
      w.id = c.name + "#" + std::to_string(i);
      w.class_name = c.name;
      w.speed = c.speed_factor;
      workers.push_back(std::move(w));
    }
  }

  Rng rng(scenario.seed);
  for (const auto& w : workers) {
    scheduler.register_worker(WorkerInfo{w.id, w.class_name, {}, 0.0}, 0.0);
  }

  struct Event {
    double time;
    std::size_t worker;
    std::string model_id;
    Assignment assignment;
    double service;
  };
  const auto later = [](const Event& a, const Event& b) {
    return std::tie(a.time, a.worker) > std::tie(b.time, b.worker);
  };
  std::priority_queue<Event, std::vector<Event>, decltype(later)> events(
      later);

  const auto start_task = [&](std::size_t widx, double now) {
    const VWorker& w = workers[widx];
    const std::string model_id = scheduler.next_task(w.id, rng);
    const ModelSpace& space = scheduler.model(model_id);
    Assignment a = sample(space, rng);
    double service = sim_model_of.at(model_id)->base_cost_s / w.speed;
    if (scenario.jitter_sigma > 0.0) {
      service *= std::exp(rng.normal(0.0, scenario.jitter_sigma));
    }
    class_busy[w.class_name] +=
        std::min(now + service, scenario.duration_s) - now;
    events.push(Event{now + service, widx, model_id, std::move(a), service});
  };

  for (std::size_t i = 0; i < workers.size(); ++i) start_task(i, 0.0);

  SimReport report;
  std::map<std::string, double> best;
  while (!events.empty()) {
    Event ev = events.top();
    events.pop();
    if (ev.time > scenario.duration_s) continue;  // in flight at the end

    const VWorker& w = workers[ev.worker];
    const SimModel& sm = *sim_model_of.at(ev.model_id);
    double u;
    const ModelSpace& space = scheduler.model(ev.model_id);
    if (space.domains.empty()) {
      u = rng.uniform01();
    } else {
      u = encode_assignment(ev.assignment, space).front();
    }
    const double loss = sm.loss.sample_loss(u, rng);

    report.tasks_completed += 1;
    report.per_model_counts[ev.model_id] += 1;
    const auto bit = best.find(ev.model_id);
    if (bit == best.end() || loss < bit->second) best[ev.model_id] = loss;
    if (trace != nullptr) {
      trace->push_back(SimTraceEntry{ev.time, w.id, w.class_name, ev.model_id,
                                     ev.service, loss});
    }

    scheduler.report_result(ev.model_id, ev.assignment, loss, ev.service,
                            w.class_name, ev.time);
    start_task(ev.worker, ev.time);
  }

  report.throughput_per_hour =
      static_cast<double>(report.tasks_completed) * 3600.0 /
      scenario.duration_s;
  for (const auto& [name, busy] : class_busy) {
    report.per_class_utilization[name] = std::clamp(
        busy / (scenario.duration_s * class_sizes[name]), 0.0, 1.0);
  }
  report.best_loss_per_model = best;
  return report;
}

struct PolicyStats {
  std::vector<double> throughputs;
  double mean = 0.0;
  double stddev = 0.0;
  double min = 0.0;
  double max = 0.0;
};

struct PolicyComparison {
  std::map<std::string, PolicyStats> per_policy;  // keyed by mode name
  std::optional<double> ratio_heuristic_over_fcfs;
  int n_seeds = 0;
  std::uint64_t first_seed = 0;
};

// Runs each policy over seeds seed .. seed + n_seeds - 1 (paired across
// policies) and aggregates throughput statistics.
inline PolicyComparison compare_policies(const Scenario& scenario,
                                         const std::vector<Mode>& policies,
                                         int n_seeds) {
  if (n_seeds < 1) throw Error("n_seeds must be >= 1");
  if (policies.empty()) throw Error("no policies to compare");

  PolicyComparison cmp;
  cmp.n_seeds = n_seeds;
  cmp.first_seed = scenario.seed;
  for (const Mode policy : policies) {
    PolicyStats stats;
    for (int k = 0; k < n_seeds; ++k) {
      Scenario run = scenario;
      run.policy = policy;
      run.seed = scenario.seed + static_cast<std::uint64_t>(k);
      stats.throughputs.push_back(
          run_simulation(run).throughput_per_hour);
    }
    stats.mean =
        mean_of(stats.throughputs.data(), stats.throughputs.size());
    stats.stddev =
        stddev_of(stats.throughputs.data(), stats.throughputs.size());
    stats.min = *std::min_element(stats.throughputs.begin(),
                                  stats.throughputs.end());
    stats.max = *std::max_element(stats.throughputs.begin(),
                                  stats.throughputs.end());
    cmp.per_policy.emplace(to_string(policy), std::move(stats));
  }
  const auto h = cmp.per_policy.find("heuristic");
  const auto f = cmp.per_policy.find("fcfs");
  if (h != cmp.per_policy.end() && f != cmp.per_policy.end() &&
      f->second.mean > 0.0) {
    cmp.ratio_heuristic_over_fcfs = h->second.mean / f->second.mean;
  }
  return cmp;
}

inline Json comparison_to_json(const PolicyComparison& cmp) {
  Json j;
  j["n_seeds"] = cmp.n_seeds;
  j["first_seed"] = cmp.first_seed;
  Json per = Json::object();
  for (const auto& [name, st] : cmp.per_policy) {
    per[name] = {{"mean", st.mean},
                 {"stddev", st.stddev},
                 {"min", st.min},
                 {"max", st.max},
                 {"throughputs", st.throughputs}};
  }
  j["policies"] = per;
  if (cmp.ratio_heuristic_over_fcfs) {
    j["ratio_heuristic_over_fcfs"] = *cmp.ratio_heuristic_over_fcfs;
  }
  return j;
}

}  // namespace hypersched
