#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <vector>

#include "hypersched/encode.hpp"
#include "hypersched/gp.hpp"
#include "hypersched/rng.hpp"
#include "hypersched/trial.hpp"

namespace hypersched {

struct PriorityConfig {
  GPFitConfig gp;
  int min_trials = 10;    // below this the priority is unknown
  int repeats = 50;       // independent length-scale fits per estimate
  int min_successes = 10; // required surviving fits
};

// Performance-variation score of a length-scale sample: 1/min - 1/max.
// Zero iff all scales agree; large when some fits see a rapidly varying loss
// surface (small scale) and others a flat one.
inline double priority_from_scales(std::span<const double> scales) {
  if (scales.empty()) throw Error("empty length-scale sample");
  const auto [mn, mx] = std::minmax_element(scales.begin(), scales.end());
  return 1.0 / *mn - 1.0 / *mx;
}

// Dynamic priority of one model from its trial history. Returns nullopt when
// too few trials exist (the caller treats the model as maximally in need of
// search). Each repeat fits the GP length scale on an independent bootstrap
// resample from a random initial scale; the resulting sample of scales feeds
// priority_from_scales.
inline std::optional<double> priority(const std::vector<TrialRecord>& trials,
                                      const ModelSpace& model,
                                      const PriorityConfig& cfg, Rng& rng) {
  cfg.gp.validate();
  if (static_cast<int>(trials.size()) < cfg.min_trials) return std::nullopt;

  // A model with no hyperparameters has a constant GP input; every fit would
  // return the same scale and the score is forced to zero.
  if (model.domains.empty()) return 0.0;

  const auto n = static_cast<Eigen::Index>(trials.size());
  const auto d = static_cast<Eigen::Index>(model.domains.size());
  Eigen::MatrixXd X(n, d);
  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto row = encode_assignment(trials[i].assignment, model);
    for (Eigen::Index j = 0; j < d; ++j) X(i, j) = row[j];
    y(i) = trials[i].loss;
  }

  // Standardize losses so likelihoods are comparable across models.
  const double mean = y.mean();
  const double var = (y.array() - mean).square().sum() / static_cast<double>(n);
  if (var == 0.0) return 0.0;
  y = (y.array() - mean) / std::sqrt(var);

  const auto m = std::min<Eigen::Index>(n, cfg.gp.max_points);
  std::vector<double> scales;
  scales.reserve(cfg.repeats);
  for (int r = 0; r < cfg.repeats; ++r) {
    const double init_l = rng.log_uniform(cfg.gp.l_min, cfg.gp.l_max);
    Eigen::MatrixXd Xb(m, d);
    Eigen::VectorXd yb(m);
    for (Eigen::Index i = 0; i < m; ++i) {
      const auto k = static_cast<Eigen::Index>(
          rng.index(static_cast<std::size_t>(n)));
      Xb.row(i) = X.row(k);
      yb(i) = y(k);
    }
    try {
      scales.push_back(fit_length_scale(Xb, yb, init_l, cfg.gp));
    } catch (const Error&) {
      // dropped; only total failure below is an error
    }
  }
  if (scales.empty()) throw Error("ill-conditioned kernel");
  if (static_cast<int>(scales.size()) < cfg.min_successes) {
    throw Error("too few successful length-scale fits");
  }
  return priority_from_scales(scales);
}

}  // namespace hypersched
