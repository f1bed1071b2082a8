#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <vector>

#include "hypersched/errors.hpp"

namespace hypersched {

// Kernel hyperparameters for the RBF Gaussian-process regression used by the
// priority heuristic. Signal and noise variances stay fixed; only the length
// scale is learned, bounded to [l_min, l_max] in normalized-input units.
struct GPFitConfig {
  double l_min = 1e-3;
  double l_max = 1e3;
  double noise_variance = 1e-4;
  double signal_variance = 1.0;
  int max_points = 100;
  int scan_points = 200;

  void validate() const {
    if (!(l_min > 0.0 && l_min < l_max)) {
      throw Error("length-scale bounds must satisfy 0 < l_min < l_max");
    }
    if (!(noise_variance > 0.0)) throw Error("noise_variance must be > 0");
    if (!(signal_variance > 0.0)) throw Error("signal_variance must be > 0");
    if (max_points < 2) throw Error("max_points must be >= 2");
    if (scan_points < 2) throw Error("scan_points must be >= 2");
  }
};

struct LmlResult {
  double value = 0.0;
  double grad_log_l = 0.0;  // d LML / d (log l)
};

namespace gp_detail {

inline Eigen::MatrixXd pairwise_sq_dist(const Eigen::MatrixXd& X) {
  const Eigen::VectorXd sq = X.rowwise().squaredNorm();
  Eigen::MatrixXd D = sq.replicate(1, X.rows()) +
                      sq.transpose().replicate(X.rows(), 1) -
                      2.0 * X * X.transpose();
  return D.cwiseMax(0.0);
}

// Cholesky with jitter escalation: on factorization failure a diagonal nudge
// starting at 1e-10 grows tenfold up to 1e-4 before giving up.
inline Eigen::LLT<Eigen::MatrixXd> cholesky_with_jitter(Eigen::MatrixXd K) {
  Eigen::LLT<Eigen::MatrixXd> llt(K);
  if (llt.info() == Eigen::Success) return llt;
  const auto n = K.rows();
  for (double jitter = 1e-10; jitter <= 1e-4 * (1.0 + 1e-12); jitter *= 10.0) {
    Eigen::MatrixXd Kj = K + jitter * Eigen::MatrixXd::Identity(n, n);
    llt.compute(Kj);
    if (llt.info() == Eigen::Success) return llt;
  }
  throw Error("ill-conditioned kernel");
}

}  // namespace gp_detail

// Log marginal likelihood of the RBF-kernel GP at length scale l. With
// `with_gradient` the result also carries d LML / d (log l). `sq_dist` is
// the precomputed pairwise squared-distance matrix of the inputs.
inline LmlResult gp_lml_from_sq_dist(const Eigen::MatrixXd& sq_dist,
                                     const Eigen::VectorXd& y, double l,
                                     const GPFitConfig& cfg,
                                     bool with_gradient = true) {
  const auto n = y.size();
  const Eigen::MatrixXd G = (-sq_dist / (2.0 * l * l)).array().exp().matrix();
  Eigen::MatrixXd K = cfg.signal_variance * G;
  K.diagonal().array() += cfg.noise_variance;

  const auto llt = gp_detail::cholesky_with_jitter(std::move(K));
  const Eigen::VectorXd alpha = llt.solve(y);

  double log_det = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    log_det += std::log(llt.matrixLLT()(i, i));
  }
  constexpr double log_two_pi = 1.8378770664093454836;

  LmlResult r;
  r.value = -0.5 * y.dot(alpha) - log_det -
            0.5 * static_cast<double>(n) * log_two_pi;
  if (!std::isfinite(r.value)) throw Error("non-finite log marginal likelihood");
  if (!with_gradient) return r;

  // dK/dl = signal * G .* sq_dist / l^3; the log-l gradient picks up a factor l.
  const Eigen::MatrixXd dK =
      (cfg.signal_variance / (l * l * l)) * G.cwiseProduct(sq_dist);
  const Eigen::MatrixXd K_inv =
      llt.solve(Eigen::MatrixXd::Identity(n, n));
  const double trace_term = (K_inv.cwiseProduct(dK)).sum();
  const double dl = 0.5 * (alpha.dot(dK * alpha) - trace_term);
  r.grad_log_l = l * dl;
  return r;
}

inline LmlResult gp_lml(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                        double l, const GPFitConfig& cfg) {
  return gp_lml_from_sq_dist(gp_detail::pairwise_sq_dist(X), y, l, cfg);
}

// Maximizes the log marginal likelihood over the length scale, in log space
// within cfg bounds. A log-spaced scan (with init_l as an extra candidate)
// locates the best cell, then golden-section search refines inside it; the
// result is clamped to the bounds. Throws "ill-conditioned kernel" when no
// candidate admits a factorization.
inline double fit_length_scale(const Eigen::MatrixXd& X,
                               const Eigen::VectorXd& y, double init_l,
                               const GPFitConfig& cfg) {
  cfg.validate();
  if (X.rows() < 2) throw Error("length-scale fit needs at least 2 points");
  if (X.rows() != y.size()) throw Error("input/target size mismatch");
  if (!y.allFinite()) throw Error("targets must be finite");
  if (!(init_l >= cfg.l_min && init_l <= cfg.l_max)) {
    throw Error("init_l must lie within the length-scale bounds");
  }

  const Eigen::MatrixXd sq_dist = gp_detail::pairwise_sq_dist(X);
  const auto eval = [&](double log_l) -> double {
    try {
      return gp_lml_from_sq_dist(sq_dist, y, std::exp(log_l), cfg,
                                 /*with_gradient=*/false)
          .value;
    } catch (const Error&) {
      return -std::numeric_limits<double>::infinity();
    }
  };

  const double lo = std::log(cfg.l_min), hi = std::log(cfg.l_max);
  const int n_scan = cfg.scan_points;
  const double step = (hi - lo) / static_cast<double>(n_scan - 1);

  double best_log_l = std::log(init_l);
  double best_val = eval(best_log_l);
  for (int i = 0; i < n_scan; ++i) {
    const double log_l = lo + step * static_cast<double>(i);
    const double v = eval(log_l);
    if (v > best_val) {
      best_val = v;
      best_log_l = log_l;
    }
  }
  if (!std::isfinite(best_val)) throw Error("ill-conditioned kernel");

  // Golden-section search on the bracketing interval around the best point.
  double a = std::max(lo, best_log_l - step);
  double b = std::min(hi, best_log_l + step);
  constexpr double inv_phi = 0.6180339887498948482;
  double x1 = b - inv_phi * (b - a);
  double x2 = a + inv_phi * (b - a);
  double f1 = eval(x1), f2 = eval(x2);
  for (int it = 0; it < 60 && (b - a) > 1e-10; ++it) {
    if (f1 < f2) {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + inv_phi * (b - a);
      f2 = eval(x2);
    } else {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - inv_phi * (b - a);
      f1 = eval(x1);
    }
  }
  double refined = 0.5 * (a + b);
  double refined_val = eval(refined);
  if (refined_val < best_val) {
    refined = best_log_l;  // keep the scan winner on a flat or noisy bracket
  }
  return std::clamp(std::exp(refined), cfg.l_min, cfg.l_max);
}

}  // namespace hypersched
