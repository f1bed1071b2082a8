#include <CLI11.hpp>
#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "hypersched/complexity.hpp"
#include "hypersched/config.hpp"
#include "hypersched/master.hpp"
#include "hypersched/sim.hpp"
#include "hypersched/spec.hpp"
#include "hypersched/worker.hpp"

namespace {

using namespace hypersched;

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

int cmd_inspect(const std::string& spec_path, bool as_json) {
  const SpecTree tree = load_spec_file(spec_path);
  auto forest = split(tree);

  struct Row {
    const ModelSpace* model;
    ComplexityScore score;
  };
  std::vector<Row> rows;
  for (const auto& m : forest) rows.push_back(Row{&m, model_complexity(m)});
  std::sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) {
    if (a.score.total != b.score.total) return a.score.total > b.score.total;
    return a.model->model_id < b.model->model_id;
  });

  if (as_json) {
    Json out = Json::array();
    for (const auto& r : rows) {
      Json j;
      j["model_id"] = r.model->model_id;
      j["domain_count"] = r.model->domains.size();
      j["complexity"] = r.score.total;
      j["per_domain"] = r.score.per_domain;
      out.push_back(std::move(j));
    }
    std::cout << out.dump(2) << "\n";
    return kExitOk;
  }

  std::printf("%zu models\n", rows.size());
  for (const auto& r : rows) {
    std::printf("%-48s domains=%-3zu complexity=%.6g\n",
                r.model->model_id.c_str(), r.model->domains.size(),
                r.score.total);
    for (const auto& d : r.model->domains) {
      std::printf("    %-44s %-12s %.6g\n", d.id.c_str(), to_string(d.kind),
                  r.score.per_domain.at(d.id));
    }
  }
  return kExitOk;
}

int cmd_run(const std::string& config_path) {
  const RunConfig cfg = load_run_config(config_path);
  try {
    ensure_writable_dir(cfg.output_dir);
  } catch (const Error& e) {
    // config-level failure: refuse before claiming the listen port
    throw ParseError(cfg.output_dir, e.what());
  }

  const SpecTree tree = load_spec_file(cfg.spec_path);
  std::vector<ModelInfo> infos;
  for (auto& space : split(tree)) {
    infos.push_back(ModelInfo::from_space(std::move(space)));
  }
  Scheduler scheduler(std::move(infos), cfg.classes, cfg.scheduler);

  MasterOptions opts;
  opts.host = cfg.host;
  opts.port = cfg.port;
  opts.max_trials = cfg.max_trials;
  opts.max_seconds = cfg.max_seconds;
  opts.task_timeout_s = cfg.task_timeout_s;
  opts.max_retries = cfg.max_retries;
  opts.output_dir = cfg.output_dir;
  opts.seed = cfg.seed;

  const RunSummary summary = master_serve(opts, scheduler);
  std::printf("completed: %d ok, %d failed, %.2f tasks/hour\n",
              summary.trials_ok, summary.trials_failed,
              summary.throughput_per_hour);
  if (summary.best) {
    std::printf("best: model=%s loss=%.6g\n", summary.best_model_id->c_str(),
                summary.best->loss);
  }
  return kExitOk;
}

int cmd_worker(const WorkerOptions& opts) { return worker_run(opts); }

int cmd_simulate(const std::string& scenario_path,
                 const std::vector<std::string>& policies, int n_seeds,
                 std::optional<std::uint64_t> seed,
                 const std::string& out_path, const std::string& trace_path) {
  Scenario scenario = load_scenario_file(scenario_path);
  if (seed) scenario.seed = *seed;

  std::vector<Mode> modes;
  if (policies.empty()) {
    modes = {scenario.policy};
  } else {
    for (const auto& p : policies) modes.push_back(mode_from_string(p));
  }

  if (!trace_path.empty()) {
    std::vector<SimTraceEntry> trace;
    Scenario traced = scenario;
    traced.policy = modes.front();
    run_simulation(traced, &trace);
    std::ofstream out(trace_path);
    for (const auto& t : trace) {
      Json j;
      j["time_s"] = t.time_s;
      j["worker"] = t.worker_id;
      j["class"] = t.class_name;
      j["model_id"] = t.model_id;
      j["service_s"] = t.service_s;
      j["loss"] = t.loss;
      out << j.dump() << "\n";
    }
  }

  const PolicyComparison cmp = compare_policies(scenario, modes, n_seeds);
  std::printf("%-16s %12s %12s %12s %12s\n", "policy", "mean/hr", "stddev",
              "min", "max");
  for (const auto& [name, st] : cmp.per_policy) {
    std::printf("%-16s %12.2f %12.2f %12.2f %12.2f\n", name.c_str(), st.mean,
                st.stddev, st.min, st.max);
  }
  if (cmp.ratio_heuristic_over_fcfs) {
    std::printf("heuristic/fcfs mean ratio: %.3f\n",
                *cmp.ratio_heuristic_over_fcfs);
  }
  if (!out_path.empty()) {
    Json j = comparison_to_json(cmp);
    // full per-run report for the first seed of each policy
    Json reports = Json::object();
    for (const Mode mode : modes) {
      Scenario first = scenario;
      first.policy = mode;
      reports[to_string(mode)] = sim_report_to_json(run_simulation(first));
    }
    j["first_seed_reports"] = reports;
    std::ofstream out(out_path);
    out << j.dump(2) << "\n";
    if (!out) throw Error("cannot write report to " + out_path);
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"hypersched: hardware-aware distributed hyperparameter search"};
  app.require_subcommand(1);

  std::string spec_path;
  bool inspect_json = false;
  auto* inspect =
      app.add_subcommand("inspect", "report the model forest of a space file");
  inspect->add_option("spec", spec_path, "search-space file")->required();
  inspect->add_flag("--json", inspect_json, "machine-readable output");

  std::string config_path;
  auto* run = app.add_subcommand("run", "serve a live optimization run");
  run->add_option("--config", config_path, "run config file")->required();

  hypersched::WorkerOptions wopts;
  std::string connect;
  std::vector<std::string> feature_flags;
  double give_up = 0.0;
  auto* worker = app.add_subcommand("worker", "run a worker process");
  worker->add_option("--connect", connect, "master endpoint host:port")
      ->required();
  worker->add_option("--objective", wopts.objective_cmd,
                     "objective command, run in the task scratch dir")
      ->required();
  worker->add_option("--feature", feature_flags,
                     "advertised feature key=value (repeatable)");
  worker->add_option("--id", wopts.worker_id, "worker id");
  worker->add_option("--scratch", wopts.scratch_root, "scratch directory");
  worker->add_option("--heartbeat-interval", wopts.heartbeat_interval_s,
                     "seconds between heartbeats");
  worker->add_option("--give-up-after", give_up,
                     "stop reconnecting after this many seconds");

  std::string scenario_path;
  std::vector<std::string> policies;
  int n_seeds = 1;
  std::uint64_t seed_flag = 0;
  bool seed_set = false;
  std::string out_path, trace_path;
  auto* simulate =
      app.add_subcommand("simulate", "replay scheduling policies virtually");
  simulate->add_option("scenario", scenario_path, "scenario file")->required();
  simulate->add_option("--policy", policies,
                       "policy to run (repeatable): heuristic, "
                       "complexity_only, priority_only, fcfs");
  simulate->add_option("--seeds", n_seeds, "number of paired seeds");
  simulate->add_option("--seed", seed_flag, "first seed")
      ->each([&](const std::string&) { seed_set = true; });
  simulate->add_option("--out", out_path, "machine-readable report file");
  simulate->add_option("--trace", trace_path, "per-task event trace file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return e.get_exit_code() == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (inspect->parsed()) return cmd_inspect(spec_path, inspect_json);
    if (run->parsed()) return cmd_run(config_path);
    if (worker->parsed()) {
      const auto colon = connect.rfind(':');
      if (colon == std::string::npos) {
        std::fprintf(stderr, "error: --connect must be host:port\n");
        return kExitUsage;
      }
      wopts.host = connect.substr(0, colon);
      wopts.port = std::stoi(connect.substr(colon + 1));
      for (const auto& f : feature_flags) {
        const auto eq = f.find('=');
        if (eq == std::string::npos) {
          std::fprintf(stderr, "error: --feature must be key=value\n");
          return kExitUsage;
        }
        wopts.features.emplace(f.substr(0, eq), f.substr(eq + 1));
      }
      if (give_up > 0.0) wopts.give_up_after_s = give_up;
      return cmd_worker(wopts);
    }
    if (simulate->parsed()) {
      return cmd_simulate(scenario_path, policies, n_seeds,
                          seed_set ? std::optional<std::uint64_t>(seed_flag)
                                   : std::nullopt,
                          out_path, trace_path);
    }
  } catch (const hypersched::ParseError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitUsage;
  } catch (const hypersched::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitRuntime;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitRuntime;
  }
  return kExitUsage;
}
