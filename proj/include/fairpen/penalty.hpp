#pragma once

#include <cmath>
#include <string_view>

#include "fairpen/dataset.hpp"
#include "fairpen/error.hpp"
#include "fairpen/model.hpp"

namespace fairpen {

/// AVD penalizes |theta^T xbar|, SD penalizes (theta^T xbar)^2.
enum class PenaltyKind { AVD, SD };

inline std::string_view to_string(PenaltyKind k) { return k == PenaltyKind::AVD ? "avd" : "sd"; }

inline PenaltyKind parse_penalty_kind(std::string_view s) {
  if (s == "avd" || s == "AVD") return PenaltyKind::AVD;
  if (s == "sd" || s == "SD") return PenaltyKind::SD;
  throw Error("unknown penalty kind '" + std::string(s) + "' (expected avd or sd)");
}

/// FP compares the negative-label cells S_00 and S_10; FN compares the
/// positive-label cells S_01 and S_11.
enum class RateKind { FP, FN };

/// Mean feature vector of S_0y minus that of S_1y, with y = 0 for FP and
/// y = 1 for FN. The result has model dimension; its intercept slot is 0
/// because the constant feature cancels.
inline Vector group_mean_diff(const Dataset& ds, RateKind which) {
  const int y = which == RateKind::FP ? 0 : 1;
  const auto& counts = ds.group_counts();
  for (int a = 0; a < 2; ++a)
    if (counts(a, y) == 0) throw EmptyGroupError(a, y, "group mean difference");
  const auto d = ds.dim();
  Vector sum0(d, 0.0), sum1(d, 0.0);
  for (const auto& p : ds.points()) {
    if (p.label != y) continue;
    auto& s = p.group == 0 ? sum0 : sum1;
    for (std::size_t j = 0; j < d; ++j) s[j] += p.features[j];
  }
  const auto n0 = static_cast<double>(counts(0, y));
  const auto n1 = static_cast<double>(counts(1, y));
  Vector out(d + 1, 0.0);
  for (std::size_t j = 0; j < d; ++j) out[j] = sum0[j] / n0 - sum1[j] / n1;
  return out;
}

/// The penalizer kind, its data-dependent direction vectors and weights.
/// Direction vectors depend only on the training set and are computed once.
struct PenaltySpec {
  PenaltyKind kind = PenaltyKind::SD;
  Vector xbar_fp;
  Vector xbar_fn;
  double c1 = 0.0;
  double c2 = 0.0;

  static PenaltySpec from_dataset(const Dataset& ds, PenaltyKind kind, double c1, double c2) {
    if (c1 < 0 || c2 < 0) throw Error("penalty weights must be non-negative");
    return PenaltySpec{kind, group_mean_diff(ds, RateKind::FP), group_mean_diff(ds, RateKind::FN), c1, c2};
  }

  std::size_t model_dim() const { return xbar_fp.size(); }
};

struct PenaltyValue {
  double fp = 0.0;
  double fn = 0.0;

  double total() const { return fp + fn; }
};

struct PenaltyGradient {
  Vector fp;
  Vector fn;
};

namespace detail {

inline void check_penalty_dims(const ModelParams& m, const PenaltySpec& spec) {
  if (m.theta.size() != spec.xbar_fp.size() || m.theta.size() != spec.xbar_fn.size())
    throw DimensionError("penalty: parameter length " + std::to_string(m.theta.size()) +
                         " does not match direction length " + std::to_string(spec.xbar_fp.size()));
}

inline double apply_kind(PenaltyKind kind, double margin) { return kind == PenaltyKind::AVD ? std::abs(margin) : margin * margin; }

/// d/dm of apply_kind; for AVD, 0 at the kink (a valid subgradient).
inline double kind_slope(PenaltyKind kind, double margin) {
  if (kind == PenaltyKind::SD) return 2.0 * margin;
  return margin > 0 ? 1.0 : (margin < 0 ? -1.0 : 0.0);
}

}  // namespace detail

/// Unweighted penalizer values (R_FP, R_FN) at theta.
inline PenaltyValue penalty_value(const ModelParams& theta, const PenaltySpec& spec) {
  detail::check_penalty_dims(theta, spec);
  return {detail::apply_kind(spec.kind, dot(theta.theta, spec.xbar_fp)),
          detail::apply_kind(spec.kind, dot(theta.theta, spec.xbar_fn))};
}

/// Unweighted (sub)gradients of R_FP and R_FN.
inline PenaltyGradient penalty_subgradient(const ModelParams& theta, const PenaltySpec& spec) {
  detail::check_penalty_dims(theta, spec);
  const double s_fp = detail::kind_slope(spec.kind, dot(theta.theta, spec.xbar_fp));
  const double s_fn = detail::kind_slope(spec.kind, dot(theta.theta, spec.xbar_fn));
  PenaltyGradient g{Vector(spec.xbar_fp.size()), Vector(spec.xbar_fn.size())};
  for (std::size_t j = 0; j < g.fp.size(); ++j) {
    g.fp[j] = s_fp * spec.xbar_fp[j];
    g.fn[j] = s_fn * spec.xbar_fn[j];
  }
  return g;
}

}  // namespace fairpen
