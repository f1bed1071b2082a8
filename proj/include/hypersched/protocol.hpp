#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>

#include "hypersched/json_util.hpp"

namespace hypersched {

enum class MsgType { Register, Request, Task, Result, Heartbeat, Shutdown, Error };

enum class ResultStatus { Ok, Failed, Timeout };

inline const char* to_string(ResultStatus s) {
  switch (s) {
    case ResultStatus::Ok: return "ok";
    case ResultStatus::Failed: return "failed";
    case ResultStatus::Timeout: return "timeout";
  }
  return "?";
}

// One wire message. Exactly one JSON object per line, UTF-8, keys in
// lexicographic order, numbers in shortest round-trip form.
struct Message {
  MsgType type = MsgType::Heartbeat;

  std::string worker_id;                         // register, request, heartbeat
  std::map<std::string, std::string> features;   // register
  std::int64_t task_id = 0;                      // task, result
  std::string model_id;                          // task
  std::map<std::string, Scalar> assignment;      // task: leaf id -> value
  double timeout_s = 0.0;                        // task
  ResultStatus status = ResultStatus::Ok;        // result
  std::optional<double> loss;                    // result, present iff ok
  double duration_s = 0.0;                       // result
  std::string log_tail;                          // result
  std::string code;                              // error
  std::string detail;                            // error

  bool operator==(const Message&) const = default;

  static Message make_register(std::string worker_id,
                               std::map<std::string, std::string> features) {
    Message m;
    m.type = MsgType::Register;
    m.worker_id = std::move(worker_id);
    m.features = std::move(features);
    return m;
  }
  static Message make_request(std::string worker_id) {
    Message m;
    m.type = MsgType::Request;
    m.worker_id = std::move(worker_id);
    return m;
  }
  static Message make_heartbeat(std::string worker_id) {
    Message m;
    m.type = MsgType::Heartbeat;
    m.worker_id = std::move(worker_id);
    return m;
  }
  static Message make_shutdown() {
    Message m;
    m.type = MsgType::Shutdown;
    return m;
  }
  static Message make_error(std::string code, std::string detail) {
    Message m;
    m.type = MsgType::Error;
    m.code = std::move(code);
    m.detail = std::move(detail);
    return m;
  }
};

// Canonical single-line encoding, newline terminated.
inline std::string encode(const Message& m) {
  Json j;
  switch (m.type) {
    case MsgType::Register:
      j["type"] = "register";
      j["worker_id"] = m.worker_id;
      j["features"] = m.features;
      break;
    case MsgType::Request:
      j["type"] = "request";
      j["worker_id"] = m.worker_id;
      break;
    case MsgType::Heartbeat:
      j["type"] = "heartbeat";
      j["worker_id"] = m.worker_id;
      break;
    case MsgType::Task:
      j["type"] = "task";
      j["task_id"] = m.task_id;
      j["model_id"] = m.model_id;
      j["assignment"] = m.assignment;
      j["timeout_s"] = m.timeout_s;
      break;
    case MsgType::Result:
      j["type"] = "result";
      j["task_id"] = m.task_id;
      j["status"] = to_string(m.status);
      if (m.status == ResultStatus::Ok) {
        j["loss"] = m.loss.value_or(0.0);
      }
      j["duration_s"] = m.duration_s;
      j["log_tail"] = m.log_tail;
      break;
    case MsgType::Shutdown:
      j["type"] = "shutdown";
      break;
    case MsgType::Error:
      j["type"] = "error";
      j["code"] = m.code;
      j["detail"] = m.detail;
      break;
  }
  return j.dump() + "\n";
}

namespace detail {

inline const Json& require(const Json& j, const char* field,
                           Json::value_t kind) {
  if (!j.contains(field)) {
    throw ProtocolError("bad_schema",
                        std::string("missing required field \"") + field +
                            "\"");
  }
  const Json& v = j.at(field);
  const bool numeric_ok =
      kind == Json::value_t::number_float && v.is_number();
  const bool integer_ok =
      kind == Json::value_t::number_integer && v.is_number_integer();
  if (v.type() != kind && !numeric_ok && !integer_ok) {
    throw ProtocolError("bad_schema", std::string("field \"") + field +
                                          "\" has the wrong type");
  }
  return v;
}

inline std::string req_string(const Json& j, const char* field) {
  return require(j, field, Json::value_t::string).get<std::string>();
}
inline double req_number(const Json& j, const char* field) {
  return require(j, field, Json::value_t::number_float).get<double>();
}
inline std::int64_t req_integer(const Json& j, const char* field) {
  return require(j, field, Json::value_t::number_integer)
      .get<std::int64_t>();
}

}  // namespace detail

// Parses one line; unknown fields are ignored for forward compatibility.
// Throws ProtocolError with code "bad_frame" on malformed JSON and
// "bad_schema" on missing or ill-typed fields.
inline Message decode(std::string_view line) {
  while (!line.empty() && (line.back() == '\n' || line.back() == '\r')) {
    line.remove_suffix(1);
  }
  const Json j = Json::parse(line, nullptr, false);
  if (j.is_discarded() || !j.is_object()) {
    throw ProtocolError("bad_frame", "line is not a JSON object");
  }

  Message m;
  const std::string type = detail::req_string(j, "type");
  if (type == "register") {
    m.type = MsgType::Register;
    m.worker_id = detail::req_string(j, "worker_id");
    const Json& f = detail::require(j, "features", Json::value_t::object);
    for (const auto& [k, v] : f.items()) {
      if (!v.is_string()) {
        throw ProtocolError("bad_schema", "features values must be strings");
      }
      m.features.emplace(k, v.get<std::string>());
    }
  } else if (type == "request") {
    m.type = MsgType::Request;
    m.worker_id = detail::req_string(j, "worker_id");
  } else if (type == "heartbeat") {
    m.type = MsgType::Heartbeat;
    m.worker_id = detail::req_string(j, "worker_id");
  } else if (type == "task") {
    m.type = MsgType::Task;
    m.task_id = detail::req_integer(j, "task_id");
    m.model_id = detail::req_string(j, "model_id");
    m.timeout_s = detail::req_number(j, "timeout_s");
    const Json& a = detail::require(j, "assignment", Json::value_t::object);
    for (const auto& [k, v] : a.items()) {
      try {
        m.assignment.emplace(k, scalar_from_json(v));
      } catch (const Error& e) {
        throw ProtocolError("bad_schema", e.what());
      }
    }
  } else if (type == "result") {
    m.type = MsgType::Result;
    m.task_id = detail::req_integer(j, "task_id");
    const std::string status = detail::req_string(j, "status");
    if (status == "ok") {
      m.status = ResultStatus::Ok;
      m.loss = detail::req_number(j, "loss");
    } else if (status == "failed") {
      m.status = ResultStatus::Failed;
    } else if (status == "timeout") {
      m.status = ResultStatus::Timeout;
    } else {
      throw ProtocolError("bad_schema", "unknown result status \"" + status +
                                            "\"");
    }
    m.duration_s = detail::req_number(j, "duration_s");
    m.log_tail = j.value("log_tail", std::string{});
  } else if (type == "shutdown") {
    m.type = MsgType::Shutdown;
  } else if (type == "error") {
    m.type = MsgType::Error;
    m.code = detail::req_string(j, "code");
    m.detail = detail::req_string(j, "detail");
  } else {
    throw ProtocolError("bad_schema", "unknown message type \"" + type + "\"");
  }
  return m;
}

}  // namespace hypersched
