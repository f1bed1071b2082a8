#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <cstdio>
#include <deque>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "hypersched/net_util.hpp"
#include "hypersched/protocol.hpp"
#include "hypersched/scheduler.hpp"

namespace hypersched {

struct MasterOptions {
  std::string host = "127.0.0.1";
  int port = 0;  // 0 picks an ephemeral port, reported in endpoint.json
  std::optional<int> max_trials;
  std::optional<double> max_seconds;
  double task_timeout_s = 300.0;
  int max_retries = 3;
  std::string output_dir;
  std::uint64_t seed = 1;
  bool quiet = false;
};

struct BestTrial {
  double loss = 0.0;
  Assignment assignment;
};

struct RunSummary {
  int trials_ok = 0;
  int trials_failed = 0;  // terminal failures after retries
  std::int64_t tasks_created = 0;
  double wall_s = 0.0;
  double throughput_per_hour = 0.0;
  std::optional<std::string> best_model_id;
  std::optional<BestTrial> best;
  std::map<std::string, BestTrial> best_per_model;
  std::map<std::string, int> per_class_counts;
  int port = 0;
};

inline Json summary_to_json(const RunSummary& s) {
  Json j;
  j["trials_ok"] = s.trials_ok;
  j["trials_failed"] = s.trials_failed;
  j["tasks_created"] = s.tasks_created;
  j["duration_s"] = s.wall_s;
  j["throughput_per_hour"] = s.throughput_per_hour;
  if (s.best) {
    j["best"] = {{"model_id", *s.best_model_id},
                 {"loss", s.best->loss},
                 {"assignment", s.best->assignment.values}};
  } else {
    j["best"] = nullptr;
  }
  Json per_model = Json::object();
  for (const auto& [id, b] : s.best_per_model) {
    per_model[id] = {{"loss", b.loss}, {"assignment", b.assignment.values}};
  }
  j["best_per_model"] = per_model;
  j["per_class_counts"] = s.per_class_counts;
  return j;
}

// Centralized master: accepts worker connections, hands out sampled trials
// on request, folds results back into the scheduler, and keeps the crash-safe
// trial ledger. All scheduler and ledger mutation is serialized behind one
// mutex; per-connection I/O runs on its own thread.
class Master {
 public:
  Master(MasterOptions options, Scheduler& scheduler)
      : options_(std::move(options)),
        scheduler_(scheduler),
        dispatch_rng_(options_.seed) {}

  RunSummary run() {
    namespace fs = std::filesystem;
    const fs::path out_dir(options_.output_dir);
    fs::create_directories(out_dir);
    trials_out_.open(out_dir / "trials.jsonl", std::ios::trunc);
    history_out_.open(out_dir / "schedule_history.jsonl", std::ios::trunc);
    if (!trials_out_ || !history_out_) {
      throw Error("cannot open ledger files under " + options_.output_dir);
    }

    listener_ =
        std::make_unique<TcpListener>(options_.host, options_.port);
    const int port = listener_->local_port();
    {
      std::ofstream ep(out_dir / "endpoint.json");
      Json j;
      j["host"] = options_.host;
      j["port"] = port;
      ep << j.dump() << "\n";
    }
    if (!options_.quiet) {
      std::fprintf(stdout, "listening on %s:%d\n", options_.host.c_str(),
                   port);
      std::fflush(stdout);
    }

    start_ = std::chrono::steady_clock::now();
    {
      std::lock_guard<std::mutex> lock(mutex_);
      scheduler_.set_publish_hook(
          [this](const ScheduleTable& t) { write_history(t); });
    }

    std::thread acceptor([this] { accept_loop(); });
    std::thread watchdog([this] { watchdog_loop(); });

    {
      std::unique_lock<std::mutex> lock(mutex_);
      done_cv_.wait(lock, [this] { return done_; });
    }
    listener_->close();
    acceptor.join();
    watchdog.join();
    for (auto& t : conn_threads_) t.join();

    std::lock_guard<std::mutex> lock(mutex_);
    scheduler_.set_publish_hook(nullptr);
    if (!fatal_.empty()) throw Error(fatal_);

    RunSummary s = summarize(elapsed());
    s.port = port;
    std::ofstream sum(out_dir / "summary.json");
    sum << summary_to_json(s).dump(2) << "\n";
    return s;
  }

 private:
  enum class TaskState { Queued, Issued, Done, Failed, Requeued };

  struct TaskEntry {
    std::int64_t id = 0;
    std::string model_id;
    Assignment assignment;
    TaskState state = TaskState::Queued;
    std::string issued_to;
    int requeues = 0;
  };

  struct Conn {
    explicit Conn(int fd) : stream(fd) {}
    LineStream stream;
    std::string worker_id;
    std::string class_name;
    bool registered = false;
  };

  double elapsed() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                         start_)
        .count();
  }

  void accept_loop() {
    while (true) {
      const int fd = listener_->accept_fd();
      if (fd < 0) return;
      auto conn = std::make_shared<Conn>(fd);
      std::lock_guard<std::mutex> lock(mutex_);
      if (stopping_) {
        conn->stream.write_line(encode(Message::make_shutdown()));
        conn->stream.close();
        continue;
      }
      conns_.push_back(conn);
      conn_threads_.emplace_back([this, conn] { serve_conn(conn); });
    }
  }

  void serve_conn(const std::shared_ptr<Conn>& conn) {
    std::string line;
    while (conn->stream.read_line(line)) {
      Message msg;
      try {
        msg = decode(line);
      } catch (const ProtocolError& e) {
        conn->stream.write_line(
            encode(Message::make_error(e.code(), e.what())));
        break;  // protocol violation: drop this connection, run continues
      }
      std::lock_guard<std::mutex> lock(mutex_);
      const double now = elapsed();
      try {
        switch (msg.type) {
          case MsgType::Register: {
            const std::string cls = scheduler_.classify(msg.features);
            scheduler_.register_worker(
                WorkerInfo{msg.worker_id, cls, msg.features, now}, now);
            conn->worker_id = msg.worker_id;
            conn->class_name = cls;
            conn->registered = true;
            break;
          }
          case MsgType::Heartbeat:
            scheduler_.touch_worker(msg.worker_id, now);
            break;
          case MsgType::Request:
            if (!conn->registered) {
              conn->stream.write_line(encode(Message::make_error(
                  "not_registered", "request before register")));
              break;
            }
            if (scheduler_.worker(conn->worker_id) == nullptr) {
              // expired while the connection stayed up; welcome it back
              scheduler_.register_worker(
                  WorkerInfo{conn->worker_id, conn->class_name, {}, now}, now);
            }
            scheduler_.touch_worker(conn->worker_id, now);
            serve_request(conn);
            break;
          case MsgType::Result:
            if (conn->registered) {
              scheduler_.touch_worker(conn->worker_id, now);
              handle_result(conn, msg, now);
            }
            break;
          default:
            conn->stream.write_line(encode(Message::make_error(
                "unexpected", "master does not accept this message type")));
            break;
        }
      } catch (const Error& e) {
        conn->stream.write_line(
            encode(Message::make_error("internal", e.what())));
      }
    }

    std::lock_guard<std::mutex> lock(mutex_);
    if (conn->registered) {
      requeue_tasks_of(conn->worker_id);
      scheduler_.deregister_worker(conn->worker_id);
      drain_parked();
    }
    conn->stream.close();
    conns_.erase(std::remove(conns_.begin(), conns_.end(), conn),
                 conns_.end());
  }

  bool can_mint() const {
    if (!options_.max_trials) return true;
    return ok_count_ + issued_count_ < *options_.max_trials;
  }

  void serve_request(const std::shared_ptr<Conn>& conn) {
    if (stopping_) {
      conn->stream.write_line(encode(Message::make_shutdown()));
      return;
    }
    if (!requeue_q_.empty()) {
      const std::int64_t id = requeue_q_.front();
      requeue_q_.pop_front();
      issue(id, conn);
      return;
    }
    if (can_mint()) {
      const std::string model_id =
          scheduler_.next_task(conn->worker_id, dispatch_rng_);
      TaskEntry t;
      t.id = next_task_id_++;
      t.model_id = model_id;
      t.assignment = sample(scheduler_.model(model_id), dispatch_rng_);
      const std::int64_t id = t.id;
      tasks_.emplace(id, std::move(t));
      issue(id, conn);
      return;
    }
    parked_.push_back(conn);
  }

  void issue(std::int64_t task_id, const std::shared_ptr<Conn>& conn) {
    TaskEntry& t = tasks_.at(task_id);
    t.state = TaskState::Issued;
    t.issued_to = conn->worker_id;
    ++issued_count_;

    Message msg;
    msg.type = MsgType::Task;
    msg.task_id = t.id;
    msg.model_id = t.model_id;
    msg.assignment = t.assignment.values;
    msg.timeout_s = options_.task_timeout_s;
    if (!conn->stream.write_line(encode(msg))) {
      // connection already dying; its reader will requeue on exit
      requeue_or_fail(t);
    }
  }

  void requeue_or_fail(TaskEntry& t) {
    if (t.state != TaskState::Issued) return;
    --issued_count_;
    if (t.requeues < options_.max_retries) {
      ++t.requeues;
      t.state = TaskState::Requeued;
      requeue_q_.push_back(t.id);
    } else {
      t.state = TaskState::Failed;
      ++failed_count_;
    }
  }

  void requeue_tasks_of(const std::string& worker_id) {
    for (auto& [id, t] : tasks_) {
      if (t.state == TaskState::Issued && t.issued_to == worker_id) {
        requeue_or_fail(t);
      }
    }
  }

  void handle_result(const std::shared_ptr<Conn>& conn, const Message& msg,
                     double now) {
    const auto it = tasks_.find(msg.task_id);
    if (it == tasks_.end()) {
      conn->stream.write_line(encode(Message::make_error(
          "unknown_task", "task " + std::to_string(msg.task_id))));
      return;
    }
    TaskEntry& t = it->second;
    if (t.state != TaskState::Issued || t.issued_to != conn->worker_id) {
      return;  // stale duplicate from a superseded attempt
    }

    const bool ok = msg.type == MsgType::Result &&
                    msg.status == ResultStatus::Ok && msg.loss.has_value() &&
                    std::isfinite(*msg.loss);
    if (!ok) {
      requeue_or_fail(t);
      drain_parked();
      return;
    }

    t.state = TaskState::Done;
    --issued_count_;
    ++ok_count_;
    auto outcome =
        scheduler_.report_result(t.model_id, t.assignment, *msg.loss,
                                 msg.duration_s, conn->class_name, now);
    outcome.record.task_id = t.id;
    trials_out_ << trial_to_json(outcome.record).dump() << "\n";
    trials_out_.flush();
    if (!trials_out_) {
      fatal_ = "trial ledger write failed";
      stopping_ = true;
    }
    note_best(outcome.record);
    per_class_counts_[conn->class_name] += 1;

    if (options_.max_trials && ok_count_ >= *options_.max_trials) {
      stopping_ = true;
    }
    if (stopping_) {
      initiate_stop();
    }
  }

  void note_best(const TrialRecord& r) {
    const auto it = best_per_model_.find(r.model_id);
    if (it == best_per_model_.end() || r.loss < it->second.loss) {
      best_per_model_[r.model_id] = BestTrial{r.loss, r.assignment};
    }
  }

  void drain_parked() {
    while (!parked_.empty()) {
      auto conn = parked_.front();
      if (!conn->stream.is_open() || !conn->registered) {
        parked_.pop_front();
        continue;
      }
      if (stopping_) {
        parked_.pop_front();
        conn->stream.write_line(encode(Message::make_shutdown()));
        continue;
      }
      if (!requeue_q_.empty()) {
        parked_.pop_front();
        const std::int64_t id = requeue_q_.front();
        requeue_q_.pop_front();
        issue(id, conn);
        continue;
      }
      if (can_mint()) {
        parked_.pop_front();
        serve_request(conn);
        continue;
      }
      break;
    }
  }

  // Called with mutex held once stopping_ flips on.
  void initiate_stop() {
    if (stop_announced_) return;
    stop_announced_ = true;
    stop_time_ = elapsed();
    for (const auto& conn : conns_) {
      conn->stream.write_line(encode(Message::make_shutdown()));
    }
    parked_.clear();
    listener_->close();
  }

  void watchdog_loop() {
    while (true) {
      std::this_thread::sleep_for(std::chrono::milliseconds(100));
      std::lock_guard<std::mutex> lock(mutex_);
      const double now = elapsed();

      for (const auto& wid : scheduler_.expire_workers(now)) {
        requeue_tasks_of(wid);
      }
      drain_parked();
      scheduler_.maybe_rebuild(now);

      if (options_.max_seconds && now >= *options_.max_seconds) {
        stopping_ = true;
      }
      if (stopping_) {
        initiate_stop();
        if (conns_.empty() || now - stop_time_ > 5.0) {
          for (const auto& conn : conns_) conn->stream.shutdown_both();
          if (conns_.empty() || now - stop_time_ > 10.0) {
            done_ = true;
            done_cv_.notify_all();
            return;
          }
        }
      }
    }
  }

  RunSummary summarize(double wall_s) {
    RunSummary s;
    s.trials_ok = ok_count_;
    s.trials_failed = failed_count_;
    s.tasks_created = next_task_id_ - 1;
    s.wall_s = wall_s;
    s.throughput_per_hour =
        wall_s > 0.0 ? static_cast<double>(ok_count_) * 3600.0 / wall_s : 0.0;
    s.best_per_model = best_per_model_;
    s.per_class_counts = per_class_counts_;
    for (const auto& [id, b] : best_per_model_) {
      if (!s.best || b.loss < s.best->loss) {
        s.best = b;
        s.best_model_id = id;
      }
    }
    return s;
  }

  void write_history(const ScheduleTable& t) {
    Json j;
    j["time_s"] = elapsed();
    j["mode"] = to_string(t.mode);
    j["epsilon"] = t.epsilon;
    j["weights"] = t.weights;
    j["assignments"] = t.assignments;
    history_out_ << j.dump() << "\n";
    history_out_.flush();
  }

  MasterOptions options_;
  Scheduler& scheduler_;

  std::mutex mutex_;
  std::condition_variable done_cv_;
  bool done_ = false;
  bool stopping_ = false;
  bool stop_announced_ = false;
  double stop_time_ = 0.0;
  std::string fatal_;

  std::unique_ptr<TcpListener> listener_;
  std::vector<std::shared_ptr<Conn>> conns_;
  std::vector<std::thread> conn_threads_;
  std::deque<std::shared_ptr<Conn>> parked_;

  std::map<std::int64_t, TaskEntry> tasks_;
  std::deque<std::int64_t> requeue_q_;
  std::int64_t next_task_id_ = 1;
  int issued_count_ = 0;
  int ok_count_ = 0;
  int failed_count_ = 0;

  std::map<std::string, BestTrial> best_per_model_;
  std::map<std::string, int> per_class_counts_;

  std::ofstream trials_out_;
  std::ofstream history_out_;
  Rng dispatch_rng_{0};
  std::chrono::steady_clock::time_point start_;
};

inline RunSummary master_serve(const MasterOptions& options,
                               Scheduler& scheduler) {
  Master master(options, scheduler);
  return master.run();
}

}  // namespace hypersched
