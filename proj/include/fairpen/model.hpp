#pragma once

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "fairpen/dataset.hpp"
#include "fairpen/error.hpp"

namespace fairpen {

using Vector = std::vector<double>;

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double squared_norm(std::span<const double> a) { return dot(a, a); }

/// Linear model weights over the features with the intercept weight last,
/// i.e. the score of x is theta[0..d) . x + theta[d].
struct ModelParams {
  Vector theta;

  ModelParams() = default;
  explicit ModelParams(Vector t) : theta(std::move(t)) {
    for (double v : theta)
      if (!std::isfinite(v)) throw Error("model parameters must be finite");
  }

  static ModelParams zeros(std::size_t feature_dim) { return ModelParams(Vector(feature_dim + 1, 0.0)); }

  /// Number of features the model expects (excluding the intercept).
  std::size_t feature_dim() const { return theta.empty() ? 0 : theta.size() - 1; }
  double intercept() const { return theta.back(); }

  /// theta^T [x; 1].
  double score(std::span<const double> x) const {
    if (x.size() + 1 != theta.size())
      throw DimensionError("model expects " + std::to_string(feature_dim()) + " features, got " +
                           std::to_string(x.size()));
    return dot(std::span<const double>(theta).first(x.size()), x) + theta.back();
  }

  bool operator==(const ModelParams&) const = default;
};

inline void check_dims(const ModelParams& m, const Dataset& ds, const char* where) {
  if (m.theta.size() != ds.dim() + 1)
    throw DimensionError(std::string(where) + ": parameter length " + std::to_string(m.theta.size()) +
                         " does not match feature dimension " + std::to_string(ds.dim()) + " + intercept");
}

/// Sign rule with the tie broken toward the positive class.
inline int predict(const ModelParams& m, std::span<const double> x) { return m.score(x) >= 0.0 ? 1 : 0; }

inline std::vector<int> predict_all(const ModelParams& m, const Dataset& ds) {
  check_dims(m, ds, "predict");
  std::vector<int> out;
  out.reserve(ds.size());
  for (const auto& p : ds.points()) out.push_back(predict(m, p.features));
  return out;
}

}  // namespace fairpen
