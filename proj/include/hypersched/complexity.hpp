#pragma once

#include <map>
#include <string>

#include "hypersched/domain.hpp"
#include "hypersched/spec.hpp"

namespace hypersched {

// Search complexity of one domain. Continuous domains score 2 plus the width
// of their central 99% interval; discrete domains score 2 - 1/|s|, so every
// continuous domain outranks every discrete one and both families preserve
// size order.
inline double complexity(const Domain& domain) {
  if (domain.is_continuous()) {
    const auto iv = domain.interval99();
    return 2.0 + (iv->second - iv->first);
  }
  return 2.0 - 1.0 / static_cast<double>(domain.cardinality());
}

struct ComplexityScore {
  std::map<std::string, double> per_domain;
  double total = 0.0;
};

// Model complexity: the sum of per-domain scores. An empty model scores 0.
inline ComplexityScore model_complexity(const ModelSpace& model) {
  ComplexityScore score;
  for (const auto& d : model.domains) {
    const double c = complexity(d);
    score.per_domain.emplace(d.id, c);
    score.total += c;
  }
  return score;
}

}  // namespace hypersched
