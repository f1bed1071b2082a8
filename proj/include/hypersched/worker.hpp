#pragma once

#include <fcntl.h>
#include <signal.h>
#include <sys/stat.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <thread>

#include "hypersched/net_util.hpp"
#include "hypersched/protocol.hpp"

namespace hypersched {

struct WorkerOptions {
  std::string host = "127.0.0.1";
  int port = 0;
  std::string worker_id;  // generated from host/pid when empty
  std::map<std::string, std::string> features;
  std::string objective_cmd;  // run via /bin/sh -c in the task scratch dir
  std::string scratch_root;   // defaults to a temp dir
  double heartbeat_interval_s = 15.0;
  double reconnect_initial_s = 1.0;
  double reconnect_max_s = 60.0;
  std::optional<double> give_up_after_s;  // stop retrying the master
};

struct ObjectiveOutcome {
  ResultStatus status = ResultStatus::Failed;
  double loss = 0.0;
  double duration_s = 0.0;
  std::string log_tail;
};

namespace worker_detail {

inline std::string read_tail(const std::filesystem::path& p,
                             std::size_t max_bytes = 2048) {
  std::ifstream in(p, std::ios::binary);
  if (!in) return {};
  in.seekg(0, std::ios::end);
  const auto size = static_cast<std::size_t>(in.tellg());
  const auto take = std::min(size, max_bytes);
  in.seekg(static_cast<std::streamoff>(size - take));
  std::string out(take, '\0');
  in.read(out.data(), static_cast<std::streamsize>(take));
  return out;
}

// Runs the objective command in `dir` under /bin/sh, combined output to
// log.txt, enforcing the timeout by killing the whole process group.
inline ObjectiveOutcome run_objective(const std::string& cmd,
                                      const std::filesystem::path& dir,
                                      double timeout_s) {
  ObjectiveOutcome out;
  const auto t0 = std::chrono::steady_clock::now();
  const auto elapsed = [&] {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                         t0)
        .count();
  };

  const pid_t pid = ::fork();
  if (pid < 0) {
    out.log_tail = "fork failed";
    return out;
  }
  if (pid == 0) {
    ::setpgid(0, 0);
    if (::chdir(dir.c_str()) != 0) ::_exit(126);
    const int log_fd = ::open("log.txt", O_CREAT | O_WRONLY | O_TRUNC, 0644);
    if (log_fd >= 0) {
      ::dup2(log_fd, STDOUT_FILENO);
      ::dup2(log_fd, STDERR_FILENO);
      ::close(log_fd);
    }
    ::execl("/bin/sh", "sh", "-c", cmd.c_str(), static_cast<char*>(nullptr));
    ::_exit(127);
  }

  int status = 0;
  bool timed_out = false;
  while (true) {
    const pid_t r = ::waitpid(pid, &status, WNOHANG);
    if (r == pid) break;
    if (r < 0) break;
    if (timeout_s > 0.0 && elapsed() >= timeout_s) {
      ::kill(-pid, SIGKILL);
      ::kill(pid, SIGKILL);
      ::waitpid(pid, &status, 0);
      timed_out = true;
      break;
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(10));
  }
  out.duration_s = elapsed();
  out.log_tail = read_tail(dir / "log.txt");

  if (timed_out) {
    out.status = ResultStatus::Timeout;
    return out;
  }
  if (!WIFEXITED(status) || WEXITSTATUS(status) != 0) {
    out.status = ResultStatus::Failed;
    if (out.log_tail.empty()) {
      out.log_tail = "objective exited with status " +
                     std::to_string(WIFEXITED(status) ? WEXITSTATUS(status)
                                                      : -1);
    }
    return out;
  }

  std::ifstream loss_in(dir / "loss.json");
  if (!loss_in) {
    out.status = ResultStatus::Failed;
    out.log_tail = "objective wrote no loss.json; " + out.log_tail;
    return out;
  }
  std::ostringstream buf;
  buf << loss_in.rdbuf();
  const Json j = Json::parse(buf.str(), nullptr, false);
  if (j.is_discarded() || !j.is_object() || !j.contains("loss") ||
      !j.at("loss").is_number()) {
    out.status = ResultStatus::Failed;
    out.log_tail = "malformed loss.json; " + out.log_tail;
    return out;
  }
  const double loss = j.at("loss").get<double>();
  if (!std::isfinite(loss)) {
    out.status = ResultStatus::Failed;
    out.log_tail = "non-finite loss; " + out.log_tail;
    return out;
  }
  out.status = ResultStatus::Ok;
  out.loss = loss;
  return out;
}

}  // namespace worker_detail

// Pull-style worker: registers its features, then loops request -> task ->
// run objective -> result, one task in flight. Heartbeats run on a side
// thread; a lost master triggers bounded exponential-backoff reconnects.
// Returns 0 after a shutdown message from the master.
inline int worker_run(const WorkerOptions& options) {
  namespace fs = std::filesystem;
  WorkerOptions opt = options;
  if (opt.worker_id.empty()) {
    opt.worker_id = "w-" + std::to_string(::getpid());
  }
  if (opt.scratch_root.empty()) {
    opt.scratch_root =
        (fs::temp_directory_path() / ("hypersched-" + opt.worker_id))
            .string();
  }
  fs::create_directories(opt.scratch_root);

  double backoff = opt.reconnect_initial_s;
  const auto start = std::chrono::steady_clock::now();
  const auto since_start = [&] {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                         start)
        .count();
  };

  while (true) {
    const int fd = tcp_connect(opt.host, opt.port);
    if (fd < 0) {
      if (opt.give_up_after_s && since_start() > *opt.give_up_after_s) {
        return 1;
      }
      std::this_thread::sleep_for(std::chrono::duration<double>(backoff));
      backoff = std::min(backoff * 2.0, opt.reconnect_max_s);
      continue;
    }
    backoff = opt.reconnect_initial_s;

    auto stream = std::make_shared<LineStream>(fd);
    stream->write_line(
        encode(Message::make_register(opt.worker_id, opt.features)));

    std::atomic<bool> connected{true};
    std::thread heartbeat([&, stream] {
      double slept = 0.0;
      while (connected.load()) {
        std::this_thread::sleep_for(std::chrono::milliseconds(100));
        slept += 0.1;
        if (slept >= opt.heartbeat_interval_s) {
          slept = 0.0;
          if (!stream->write_line(
                  encode(Message::make_heartbeat(opt.worker_id)))) {
            return;
          }
        }
      }
    });
    const auto disconnect = [&] {
      connected.store(false);
      stream->shutdown_both();
      heartbeat.join();
      stream->close();
    };

    bool shutdown_received = false;
    while (true) {
      if (!stream->write_line(encode(Message::make_request(opt.worker_id)))) {
        break;
      }
      // Wait for a task (errors are reported and skipped; heartbeats are
      // not expected from the master).
      Message task_msg;
      bool have_task = false;
      std::string line;
      while (stream->read_line(line)) {
        Message m;
        try {
          m = decode(line);
        } catch (const ProtocolError&) {
          continue;
        }
        if (m.type == MsgType::Task) {
          task_msg = std::move(m);
          have_task = true;
          break;
        }
        if (m.type == MsgType::Shutdown) {
          shutdown_received = true;
          break;
        }
        if (m.type == MsgType::Error) {
          std::fprintf(stderr, "[%s] master error: %s: %s\n",
                       opt.worker_id.c_str(), m.code.c_str(),
                       m.detail.c_str());
        }
      }
      if (shutdown_received || !have_task) break;

      const fs::path scratch =
          fs::path(opt.scratch_root) /
          ("task_" + std::to_string(task_msg.task_id));
      std::error_code ec;
      fs::remove_all(scratch, ec);
      fs::create_directories(scratch);
      {
        Assignment a;
        a.model_id = task_msg.model_id;
        a.values = task_msg.assignment;
        std::ofstream params(scratch / "params.json");
        params << assignment_to_json(a).dump() << "\n";
      }

      const ObjectiveOutcome outcome = worker_detail::run_objective(
          opt.objective_cmd, scratch, task_msg.timeout_s);
      fs::remove_all(scratch, ec);

      Message result;
      result.type = MsgType::Result;
      result.task_id = task_msg.task_id;
      result.status = outcome.status;
      if (outcome.status == ResultStatus::Ok) result.loss = outcome.loss;
      result.duration_s = outcome.duration_s;
      result.log_tail = outcome.log_tail;
      if (!stream->write_line(encode(result))) break;
    }

    disconnect();
    if (shutdown_received) {
      std::error_code ec;
      fs::remove_all(opt.scratch_root, ec);
      return 0;
    }
    if (opt.give_up_after_s && since_start() > *opt.give_up_after_s) {
      return 1;
    }
  }
}

}  // namespace hypersched
