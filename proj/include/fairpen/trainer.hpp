#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <deque>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "fairpen/dataset.hpp"
#include "fairpen/error.hpp"
#include "fairpen/model.hpp"
#include "fairpen/penalty.hpp"

namespace fairpen {

/// Hyperparameters of the penalized logistic-regression problem and the
/// solver's stopping rule.
struct TrainConfig {
  double c1 = 0.0;  // weight on R_FP
  double c2 = 0.0;  // weight on R_FN
  double q = 0.0;   // l2 weight (intercept exempt)
  PenaltyKind kind = PenaltyKind::SD;
  std::size_t max_iters = 10000;
  double grad_tol = 1e-6;
  double obj_rel_tol = 1e-9;
  double backtrack = 0.5;
  double armijo = 1e-4;
  std::size_t memory = 10;  // curvature pairs kept by the quasi-Newton direction

  void validate() const {
    if (!(c1 >= 0 && c2 >= 0)) throw Error("train config: c1 and c2 must be non-negative");
    if (!(q >= 0)) throw Error("train config: q must be non-negative");
    if (max_iters < 1) throw Error("train config: max_iters must be at least 1");
    if (!(grad_tol > 0 && obj_rel_tol > 0)) throw Error("train config: tolerances must be positive");
    if (!(backtrack > 0 && backtrack < 1)) throw Error("train config: backtracking factor must lie in (0,1)");
    if (!(armijo > 0 && armijo < 1)) throw Error("train config: Armijo constant must lie in (0,1)");
  }
};

enum class StopReason { GradientNorm, RelativeDecrease, MaxIterations };

struct FitResult {
  ModelParams params;
  double final_proxy_value = 0.0;
  std::size_t iterations = 0;
  bool converged = false;
  StopReason reason = StopReason::MaxIterations;
  std::vector<double> trace;  // proxy value at init and after each accepted step
};

namespace detail {

inline double softplus(double t) { return std::max(t, 0.0) + std::log1p(std::exp(-std::abs(t))); }

inline double sigmoid(double t) {
  if (t >= 0) return 1.0 / (1.0 + std::exp(-t));
  const double e = std::exp(t);
  return e / (1.0 + e);
}

/// -log P(y | score) under the logistic model, stable for any finite score.
inline double neg_log_lik_point(int y, double z) { return y ? softplus(-z) : softplus(z); }

}  // namespace detail

/// Sum over points of y log s(theta^T x) + (1 - y) log(1 - s(theta^T x)).
inline double log_likelihood(const ModelParams& theta, const Dataset& ds) {
  check_dims(theta, ds, "log_likelihood");
  double ll = 0.0;
  for (const auto& p : ds.points()) ll -= detail::neg_log_lik_point(p.label, theta.score(p.features));
  return ll;
}

/// Penalized negative log-likelihood evaluated on a fixed design matrix.
///
/// Scores X theta are cached between the value and gradient calls, and the
/// line search moves along a precomputed X d so each trial step costs O(n).
class ProxyProblem {
public:
  ProxyProblem(const Dataset& ds, const TrainConfig& cfg, const PenaltySpec& spec)
      : n_(ds.size()), dim_(ds.dim() + 1), q_(cfg.q), spec_(spec) {
    if (spec_.model_dim() != dim_)
      throw DimensionError("proxy: penalty direction length " + std::to_string(spec_.model_dim()) +
                           " does not match model dimension " + std::to_string(dim_));
    design_.reserve(n_ * dim_);
    labels_.reserve(n_);
    for (const auto& p : ds.points()) {
      design_.insert(design_.end(), p.features.begin(), p.features.end());
      design_.push_back(1.0);
      labels_.push_back(p.label);
    }
  }

  std::size_t dim() const { return dim_; }

  std::vector<double> scores(std::span<const double> theta) const {
    std::vector<double> z(n_);
    for (std::size_t i = 0; i < n_; ++i) z[i] = dot(row(i), theta);
    return z;
  }

  /// Objective value given theta and its precomputed scores.
  double value(std::span<const double> theta, std::span<const double> z) const {
    double f = 0.0;
    for (std::size_t i = 0; i < n_; ++i) f += detail::neg_log_lik_point(labels_[i], z[i]);
    return f + regularizer(theta);
  }

  double value(std::span<const double> theta) const { return value(theta, scores(theta)); }

  Vector gradient(std::span<const double> theta, std::span<const double> z) const {
    Vector g(dim_, 0.0);
    for (std::size_t i = 0; i < n_; ++i) {
      const double r = detail::sigmoid(z[i]) - static_cast<double>(labels_[i]);
      const auto x = row(i);
      for (std::size_t j = 0; j < dim_; ++j) g[j] += r * x[j];
    }
    if (spec_.c1 > 0 || spec_.c2 > 0) {
      const double s_fp = spec_.c1 * detail::kind_slope(spec_.kind, dot(theta, spec_.xbar_fp));
      const double s_fn = spec_.c2 * detail::kind_slope(spec_.kind, dot(theta, spec_.xbar_fn));
      for (std::size_t j = 0; j < dim_; ++j) g[j] += s_fp * spec_.xbar_fp[j] + s_fn * spec_.xbar_fn[j];
    }
    for (std::size_t j = 0; j + 1 < dim_; ++j) g[j] += 2.0 * q_ * theta[j];
    return g;
  }

  Vector gradient(std::span<const double> theta) const { return gradient(theta, scores(theta)); }

private:
  std::span<const double> row(std::size_t i) const { return std::span<const double>(design_).subspan(i * dim_, dim_); }

  double regularizer(std::span<const double> theta) const {
    double r = 0.0;
    if (spec_.c1 > 0) r += spec_.c1 * detail::apply_kind(spec_.kind, dot(theta, spec_.xbar_fp));
    if (spec_.c2 > 0) r += spec_.c2 * detail::apply_kind(spec_.kind, dot(theta, spec_.xbar_fn));
    double l2 = 0.0;
    for (std::size_t j = 0; j + 1 < dim_; ++j) l2 += theta[j] * theta[j];
    return r + q_ * l2;
  }

  std::size_t n_;
  std::size_t dim_;
  double q_;
  PenaltySpec spec_;
  std::vector<double> design_;  // row-major n x (d+1), last column 1
  std::vector<int> labels_;
};

/// Penalty directions for a fit. A zero weight needs no direction, which
/// lets unpenalized fits run on data with an empty (group, label) cell.
inline PenaltySpec penalty_for(const Dataset& ds, const TrainConfig& cfg) {
  PenaltySpec spec;
  spec.kind = cfg.kind;
  spec.c1 = cfg.c1;
  spec.c2 = cfg.c2;
  spec.xbar_fp = cfg.c1 > 0 ? group_mean_diff(ds, RateKind::FP) : Vector(ds.dim() + 1, 0.0);
  spec.xbar_fn = cfg.c2 > 0 ? group_mean_diff(ds, RateKind::FN) : Vector(ds.dim() + 1, 0.0);
  return spec;
}

namespace detail {

inline void check_spec_matches(const TrainConfig& cfg, const PenaltySpec& spec) {
  if (cfg.c1 != spec.c1 || cfg.c2 != spec.c2 || cfg.kind != spec.kind)
    throw Error("proxy: penalty spec weights or kind differ from the train config");
}

}  // namespace detail

/// -ll + c1 R_FP + c2 R_FN + q ||theta without intercept||^2.
inline double proxy_objective(const ModelParams& theta, const Dataset& ds, const TrainConfig& cfg,
                              const PenaltySpec& spec) {
  check_dims(theta, ds, "proxy_objective");
  detail::check_spec_matches(cfg, spec);
  return ProxyProblem(ds, cfg, spec).value(theta.theta);
}

/// Gradient of proxy_objective; the AVD terms contribute a subgradient.
inline Vector proxy_gradient(const ModelParams& theta, const Dataset& ds, const TrainConfig& cfg,
                             const PenaltySpec& spec) {
  check_dims(theta, ds, "proxy_gradient");
  detail::check_spec_matches(cfg, spec);
  return ProxyProblem(ds, cfg, spec).gradient(theta.theta);
}

/// Minimizes the proxy objective from `init`.
///
/// Directions come from limited-memory BFGS built on (sub)gradients, with a
/// fallback to steepest descent when the quasi-Newton direction fails the
/// line search. Steps satisfy the Armijo condition on the full objective
/// value, so the trace is strictly decreasing. Stops when the gradient norm
/// drops below grad_tol, when an iteration's relative decrease is below
/// obj_rel_tol (including the case where no decreasing step exists), or
/// after max_iters iterations.
inline FitResult fit(const Dataset& ds, const TrainConfig& cfg, const PenaltySpec& spec, const ModelParams& init) {
  cfg.validate();
  detail::check_spec_matches(cfg, spec);
  check_dims(init, ds, "fit");
  if (ds.empty()) throw DataError("fit: dataset is empty");
  if (ds.label_count(0) == 0 || ds.label_count(1) == 0) throw DataError("fit: both labels must be present");

  const ProxyProblem problem(ds, cfg, spec);
  const std::size_t dim = problem.dim();
  Vector theta = init.theta;
  Vector z = problem.scores(theta);
  double f = problem.value(theta, z);
  Vector g = problem.gradient(theta, z);
  auto check_finite = [](double v, const char* what) {
    if (!std::isfinite(v)) throw SolverError(std::string("fit: non-finite ") + what + " (check feature scaling)");
  };
  check_finite(f, "objective");

  FitResult res;
  res.trace.push_back(f);
  std::deque<Vector> s_hist, y_hist;
  std::deque<double> rho_hist;

  auto converged_with = [&](StopReason r) {
    res.converged = true;
    res.reason = r;
  };

  for (std::size_t iter = 0;; ++iter) {
    const double gnorm = std::sqrt(squared_norm(g));
    check_finite(gnorm, "gradient");
    if (gnorm < cfg.grad_tol) {
      converged_with(StopReason::GradientNorm);
      break;
    }
    if (iter == cfg.max_iters) {
      res.reason = StopReason::MaxIterations;
      break;
    }

    // Two-loop recursion for the quasi-Newton direction.
    Vector d(dim);
    for (std::size_t j = 0; j < dim; ++j) d[j] = -g[j];
    std::vector<double> alpha(s_hist.size());
    for (std::size_t k = s_hist.size(); k-- > 0;) {
      alpha[k] = rho_hist[k] * dot(s_hist[k], d);
      for (std::size_t j = 0; j < dim; ++j) d[j] -= alpha[k] * y_hist[k][j];
    }
    if (!s_hist.empty()) {
      const double gamma = dot(s_hist.back(), y_hist.back()) / squared_norm(y_hist.back());
      for (auto& v : d) v *= gamma;
    } else {
      for (auto& v : d) v /= std::max(1.0, gnorm);
    }
    for (std::size_t k = 0; k < s_hist.size(); ++k) {
      const double beta = rho_hist[k] * dot(y_hist[k], d);
      for (std::size_t j = 0; j < dim; ++j) d[j] += (alpha[k] - beta) * s_hist[k][j];
    }

    // Backtracking on the Armijo condition; one retry along -g.
    Vector theta_new(dim), z_new;
    double f_new = f;
    bool accepted = false;
    for (int attempt = 0; attempt < 2 && !accepted; ++attempt) {
      if (attempt == 1) {
        if (s_hist.empty()) break;  // already steepest descent
        for (std::size_t j = 0; j < dim; ++j) d[j] = -g[j] / std::max(1.0, gnorm);
        s_hist.clear();
        y_hist.clear();
        rho_hist.clear();
      }
      double slope = dot(g, d);
      if (slope >= 0) {
        if (attempt == 0) continue;
        break;
      }
      const Vector xd = problem.scores(d);
      z_new.assign(z.size(), 0.0);
      double step = 1.0;
      for (int bt = 0; bt < 80; ++bt, step *= cfg.backtrack) {
        for (std::size_t j = 0; j < dim; ++j) theta_new[j] = theta[j] + step * d[j];
        for (std::size_t i = 0; i < z.size(); ++i) z_new[i] = z[i] + step * xd[i];
        f_new = problem.value(theta_new, z_new);
        if (std::isfinite(f_new) && f_new <= f + cfg.armijo * step * slope && f_new < f) {
          accepted = true;
          break;
        }
      }
    }
    if (!accepted) {
      converged_with(StopReason::RelativeDecrease);
      break;
    }

    // Recompute scores from scratch to keep the incremental update from drifting.
    z_new = problem.scores(theta_new);
    f_new = problem.value(theta_new, z_new);
    if (!(f_new < f)) {
      converged_with(StopReason::RelativeDecrease);
      break;
    }
    const Vector g_new = problem.gradient(theta_new, z_new);
    Vector s(dim), y(dim);
    for (std::size_t j = 0; j < dim; ++j) {
      s[j] = theta_new[j] - theta[j];
      y[j] = g_new[j] - g[j];
    }
    const double sy = dot(s, y);
    if (sy > 1e-12 * std::sqrt(squared_norm(s) * squared_norm(y))) {
      s_hist.push_back(std::move(s));
      y_hist.push_back(std::move(y));
      rho_hist.push_back(1.0 / sy);
      if (s_hist.size() > cfg.memory) {
        s_hist.pop_front();
        y_hist.pop_front();
        rho_hist.pop_front();
      }
    }

    const double decrease = (f - f_new) / std::max(1.0, std::abs(f));
    theta = std::move(theta_new);
    z = std::move(z_new);
    g = g_new;
    f = f_new;
    ++res.iterations;
    res.trace.push_back(f);
    if (decrease < cfg.obj_rel_tol) {
      converged_with(StopReason::RelativeDecrease);
      break;
    }
  }

  res.params = ModelParams(std::move(theta));
  res.final_proxy_value = f;
  return res;
}

inline FitResult fit(const Dataset& ds, const TrainConfig& cfg, const ModelParams& init) {
  return fit(ds, cfg, penalty_for(ds, cfg), init);
}

inline FitResult fit(const Dataset& ds, const TrainConfig& cfg) { return fit(ds, cfg, ModelParams::zeros(ds.dim())); }

}  // namespace fairpen
