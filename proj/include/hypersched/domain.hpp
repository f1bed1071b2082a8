#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "hypersched/errors.hpp"
#include "hypersched/mathutil.hpp"
#include "hypersched/rng.hpp"

namespace hypersched {

// A sampled hyperparameter value: real, integer, or categorical label.
using Scalar = std::variant<double, std::int64_t, std::string>;

inline bool scalar_is_numeric(const Scalar& s) {
  return !std::holds_alternative<std::string>(s);
}

inline double scalar_as_double(const Scalar& s) {
  if (const auto* d = std::get_if<double>(&s)) return *d;
  if (const auto* i = std::get_if<std::int64_t>(&s))
    return static_cast<double>(*i);
  throw Error("expected a numeric value, got a string");
}

inline std::string scalar_to_string(const Scalar& s) {
  if (const auto* d = std::get_if<double>(&s)) return std::to_string(*d);
  if (const auto* i = std::get_if<std::int64_t>(&s)) return std::to_string(*i);
  return std::get<std::string>(s);
}

enum class DomainKind { Uniform, LogUniform, Normal, RandInt, Choice };

inline const char* to_string(DomainKind k) {
  switch (k) {
    case DomainKind::Uniform: return "uniform";
    case DomainKind::LogUniform: return "log_uniform";
    case DomainKind::Normal: return "normal";
    case DomainKind::RandInt: return "randint";
    case DomainKind::Choice: return "choice";
  }
  return "?";
}

// One hyperparameter's sample space: a continuous distribution or a discrete
// set. `id` is the slash-joined leaf path within the search-space tree.
struct Domain {
  std::string id;
  DomainKind kind = DomainKind::Uniform;

  double lo = 0.0, hi = 0.0;       // uniform, log_uniform
  double mu = 0.0, sigma = 0.0;    // normal
  std::int64_t ilo = 0, ihi = 0;   // randint, inclusive
  std::vector<Scalar> values;      // choice, order preserved

  static Domain uniform(std::string id, double lo, double hi) {
    Domain d;
    d.id = std::move(id);
    d.kind = DomainKind::Uniform;
    d.lo = lo;
    d.hi = hi;
    return d;
  }
  static Domain log_uniform(std::string id, double lo, double hi) {
    Domain d = uniform(std::move(id), lo, hi);
    d.kind = DomainKind::LogUniform;
    return d;
  }
  static Domain normal(std::string id, double mu, double sigma) {
    Domain d;
    d.id = std::move(id);
    d.kind = DomainKind::Normal;
    d.mu = mu;
    d.sigma = sigma;
    return d;
  }
  static Domain randint(std::string id, std::int64_t lo, std::int64_t hi) {
    Domain d;
    d.id = std::move(id);
    d.kind = DomainKind::RandInt;
    d.ilo = lo;
    d.ihi = hi;
    return d;
  }
  static Domain choice(std::string id, std::vector<Scalar> values) {
    Domain d;
    d.id = std::move(id);
    d.kind = DomainKind::Choice;
    d.values = std::move(values);
    return d;
  }

  bool is_continuous() const {
    return kind == DomainKind::Uniform || kind == DomainKind::LogUniform ||
           kind == DomainKind::Normal;
  }

  // Number of elements of a discrete domain.
  std::int64_t cardinality() const {
    switch (kind) {
      case DomainKind::RandInt: return ihi - ilo + 1;
      case DomainKind::Choice: return static_cast<std::int64_t>(values.size());
      default: throw Error(id + ": cardinality is undefined for " +
                           std::string(to_string(kind)) + " domains");
    }
  }

  void validate() const {
    switch (kind) {
      case DomainKind::Uniform:
        if (!(lo < hi)) throw ParseError(id, "degenerate interval: lo >= hi");
        break;
      case DomainKind::LogUniform:
        if (!(lo < hi)) throw ParseError(id, "degenerate interval: lo >= hi");
        if (!(lo > 0.0)) throw ParseError(id, "log_uniform requires lo > 0");
        break;
      case DomainKind::Normal:
        if (!(sigma > 0.0)) throw ParseError(id, "normal requires sigma > 0");
        break;
      case DomainKind::RandInt:
        if (ilo > ihi) throw ParseError(id, "empty integer range: lo > hi");
        break;
      case DomainKind::Choice: {
        if (values.empty()) throw ParseError(id, "choice set is empty");
        for (std::size_t i = 0; i < values.size(); ++i) {
          for (std::size_t j = i + 1; j < values.size(); ++j) {
            if (values[i] == values[j]) {
              throw ParseError(id, "duplicate choice value: " +
                                       scalar_to_string(values[i]));
            }
          }
        }
        break;
      }
    }
  }

  bool contains(const Scalar& v) const {
    switch (kind) {
      case DomainKind::Uniform:
      case DomainKind::LogUniform: {
        if (!scalar_is_numeric(v)) return false;
        const double x = scalar_as_double(v);
        return x >= lo && x <= hi;
      }
      case DomainKind::Normal:
        return scalar_is_numeric(v) && std::isfinite(scalar_as_double(v));
      case DomainKind::RandInt: {
        const auto* i = std::get_if<std::int64_t>(&v);
        return i != nullptr && *i >= ilo && *i <= ihi;
      }
      case DomainKind::Choice:
        return std::find(values.begin(), values.end(), v) != values.end();
    }
    return false;
  }

  Scalar sample(Rng& rng) const {
    switch (kind) {
      case DomainKind::Uniform: return rng.uniform(lo, hi);
      case DomainKind::LogUniform: return rng.log_uniform(lo, hi);
      case DomainKind::Normal: return rng.normal(mu, sigma);
      case DomainKind::RandInt: return rng.uniform_int(ilo, ihi);
      case DomainKind::Choice: return values[rng.index(values.size())];
    }
    throw Error("unreachable domain kind");
  }

  // Central interval holding 99% of the sampling distribution's probability
  // mass (0.5% in each tail). Quantiles are taken in the space the value is
  // actually drawn in, so log_uniform endpoints fall in the original units.
  // Discrete domains have no such interval.
  std::optional<std::pair<double, double>> interval99() const {
    constexpr double tail = 0.005;
    switch (kind) {
      case DomainKind::Uniform:
        return std::pair{lo + tail * (hi - lo), lo + (1.0 - tail) * (hi - lo)};
      case DomainKind::LogUniform: {
        const double llo = std::log(lo), lhi = std::log(hi);
        return std::pair{std::exp(llo + tail * (lhi - llo)),
                         std::exp(llo + (1.0 - tail) * (lhi - llo))};
      }
      case DomainKind::Normal: {
        const double z = norm_quantile(1.0 - tail);
        return std::pair{mu - z * sigma, mu + z * sigma};
      }
      case DomainKind::RandInt:
      case DomainKind::Choice:
        return std::nullopt;
    }
    return std::nullopt;
  }
};

}  // namespace hypersched
