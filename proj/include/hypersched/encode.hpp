#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "hypersched/domain.hpp"
#include "hypersched/spec.hpp"

namespace hypersched {

namespace detail {

inline double clamp01(double x) { return std::clamp(x, 0.0, 1.0); }

}  // namespace detail

// Maps one sampled value into [0, 1] for regression input. Interval kinds are
// min-max scaled (normal by its central 99% interval, log_uniform in log
// space); discrete kinds by normalized index, with 0.5 for singletons.
inline double encode_value(const Domain& domain, const Scalar& value) {
  if (!domain.contains(value)) {
    throw Error(domain.id + ": value " + scalar_to_string(value) +
                " lies outside the domain");
  }
  switch (domain.kind) {
    case DomainKind::Uniform:
    case DomainKind::Normal: {
      const auto [a, b] = *domain.interval99();
      return detail::clamp01((scalar_as_double(value) - a) / (b - a));
    }
    case DomainKind::LogUniform: {
      const double llo = std::log(domain.lo), lhi = std::log(domain.hi);
      return detail::clamp01((std::log(scalar_as_double(value)) - llo) /
                             (lhi - llo));
    }
    case DomainKind::RandInt: {
      if (domain.ihi == domain.ilo) return 0.5;
      return static_cast<double>(std::get<std::int64_t>(value) - domain.ilo) /
             static_cast<double>(domain.ihi - domain.ilo);
    }
    case DomainKind::Choice: {
      if (domain.values.size() == 1) return 0.5;
      const auto it =
          std::find(domain.values.begin(), domain.values.end(), value);
      return static_cast<double>(it - domain.values.begin()) /
             static_cast<double>(domain.values.size() - 1);
    }
  }
  throw Error("unreachable domain kind");
}

// One coordinate per domain, in the model's domain order.
inline std::vector<double> encode_assignment(const Assignment& assignment,
                                             const ModelSpace& model) {
  std::vector<double> row;
  row.reserve(model.domains.size());
  for (const auto& d : model.domains) {
    const auto it = assignment.values.find(d.id);
    if (it == assignment.values.end()) {
      throw Error(d.id + ": assignment has no value for this domain");
    }
    row.push_back(encode_value(d, it->second));
  }
  return row;
}

}  // namespace hypersched
