#pragma once

#include <json.hpp>

#include "hypersched/domain.hpp"
#include "hypersched/errors.hpp"

namespace hypersched {

using Json = nlohmann::json;

inline Json scalar_to_json(const Scalar& s) {
  return std::visit([](const auto& v) { return Json(v); }, s);
}

inline Scalar scalar_from_json(const Json& j) {
  switch (j.type()) {
    case Json::value_t::number_float: return j.get<double>();
    case Json::value_t::number_integer: return j.get<std::int64_t>();
    case Json::value_t::number_unsigned: {
      const auto u = j.get<std::uint64_t>();
      if (u > static_cast<std::uint64_t>(
                  std::numeric_limits<std::int64_t>::max())) {
        return static_cast<double>(u);
      }
      return static_cast<std::int64_t>(u);
    }
    case Json::value_t::string: return j.get<std::string>();
    default:
      throw Error("expected a number or string, got " +
                  std::string(j.type_name()));
  }
}

}  // namespace hypersched

namespace nlohmann {

template <>
struct adl_serializer<hypersched::Scalar> {
  static void to_json(json& j, const hypersched::Scalar& s) {
    j = hypersched::scalar_to_json(s);
  }
  static void from_json(const json& j, hypersched::Scalar& s) {
    s = hypersched::scalar_from_json(j);
  }
};

}  // namespace nlohmann
