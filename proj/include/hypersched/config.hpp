#pragma once

#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "hypersched/json_util.hpp"
#include "hypersched/scheduler.hpp"

namespace hypersched {

// Everything a live run needs: the search-space file, scheduling mode,
// exactly one budget, the listen endpoint, compute-class definitions, and
// heuristic tunables.
struct RunConfig {
  std::string spec_path;
  Mode mode = Mode::Heuristic;
  double epsilon = 0.1;
  std::optional<int> max_trials;
  std::optional<double> max_seconds;
  std::string host = "127.0.0.1";
  int port = 0;
  std::vector<ClassConfig> classes;
  SchedulerOptions scheduler;
  double task_timeout_s = 300.0;
  int max_retries = 3;
  std::uint64_t seed = 1;
  std::string output_dir = "out";
};

inline RunConfig parse_run_config(const Json& j) {
  if (!j.is_object()) throw ParseError("", "config must be a JSON object");
  RunConfig cfg;
  if (!j.contains("spec_path") || !j.at("spec_path").is_string()) {
    throw ParseError("spec_path", "missing search-space file path");
  }
  cfg.spec_path = j.at("spec_path").get<std::string>();
  cfg.mode = mode_from_string(j.value("mode", std::string("heuristic")));
  cfg.epsilon = j.value("epsilon", 0.1);
  if (!(cfg.epsilon >= 0.0 && cfg.epsilon < 1.0)) {
    throw ParseError("epsilon", "epsilon must lie in [0, 1)");
  }

  if (!j.contains("budget") || !j.at("budget").is_object()) {
    throw ParseError("budget", "missing budget object");
  }
  const Json& budget = j.at("budget");
  if (budget.contains("max_trials") == budget.contains("max_seconds")) {
    throw ParseError("budget",
                     "exactly one of max_trials or max_seconds must be set");
  }
  if (budget.contains("max_trials")) {
    cfg.max_trials = budget.at("max_trials").get<int>();
    if (*cfg.max_trials < 1) throw ParseError("budget", "max_trials must be >= 1");
  } else {
    cfg.max_seconds = budget.at("max_seconds").get<double>();
    if (!(*cfg.max_seconds > 0.0)) {
      throw ParseError("budget", "max_seconds must be > 0");
    }
  }

  if (j.contains("listen")) {
    const Json& listen = j.at("listen");
    cfg.host = listen.value("host", std::string("127.0.0.1"));
    cfg.port = listen.value("port", 0);
  }

  if (j.contains("classes")) {
    for (const auto& cj : j.at("classes")) {
      ClassConfig c;
      c.name = cj.at("name").get<std::string>();
      c.performance_score = cj.value("performance_score", 1.0);
      if (!(c.performance_score > 0.0)) {
        throw ParseError("classes", c.name + ": performance_score must be > 0");
      }
      if (cj.contains("match")) {
        for (const auto& [k, v] : cj.at("match").items()) {
          if (!v.is_string()) {
            throw ParseError("classes",
                             c.name + ": match values must be strings");
          }
          c.match.emplace(k, v.get<std::string>());
        }
      }
      cfg.classes.push_back(std::move(c));
    }
  }

  if (j.contains("heuristics")) {
    const Json& h = j.at("heuristics");
    auto& s = cfg.scheduler;
    s.priority.min_trials = h.value("min_trials", s.priority.min_trials);
    s.priority.gp.l_min = h.value("l_min", s.priority.gp.l_min);
    s.priority.gp.l_max = h.value("l_max", s.priority.gp.l_max);
    s.priority.gp.noise_variance =
        h.value("noise_variance", s.priority.gp.noise_variance);
    s.priority.gp.signal_variance =
        h.value("signal_variance", s.priority.gp.signal_variance);
    s.priority.gp.max_points = h.value("max_points", s.priority.gp.max_points);
    s.rebuild_every = h.value("rebuild_every", s.rebuild_every);
    s.rebuild_seconds = h.value("rebuild_seconds", s.rebuild_seconds);
    s.priority.gp.validate();
  }

  cfg.task_timeout_s = j.value("task_timeout_s", 300.0);
  cfg.max_retries = j.value("max_retries", 3);
  cfg.scheduler.heartbeat_timeout_s = j.value("heartbeat_timeout_s", 60.0);
  cfg.seed = j.value("seed", std::uint64_t{1});
  cfg.output_dir = j.value("output_dir", std::string("out"));

  cfg.scheduler.mode = cfg.mode;
  cfg.scheduler.epsilon = cfg.epsilon;
  cfg.scheduler.seed = cfg.seed;
  return cfg;
}

inline RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(path, "cannot open file");
  std::ostringstream buf;
  buf << in.rdbuf();
  const Json j = Json::parse(buf.str(), nullptr, false);
  if (j.is_discarded()) throw ParseError(path, "config is not valid JSON");
  try {
    return parse_run_config(j);
  } catch (const ParseError& e) {
    throw ParseError(path + (e.path().empty() ? "" : ":" + e.path()),
                     e.what());
  }
}

// Output directory must be writable before the listen port is claimed.
inline void ensure_writable_dir(const std::string& dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  const fs::path probe = fs::path(dir) / ".write_probe";
  std::ofstream out(probe);
  out << "ok";
  out.close();
  if (!out) throw Error("output directory is not writable: " + dir);
  fs::remove(probe, ec);
}

}  // namespace hypersched
