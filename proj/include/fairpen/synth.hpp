#pragma once

#include <cstdint>
#include <ostream>
#include <utility>

#include "fairpen/dataset.hpp"
#include "fairpen/error.hpp"
#include "fairpen/random.hpp"

namespace fairpen {

/// Parameters of the two-feature toy distribution: Y is a fair coin, the
/// protected attribute A equals Y with probability 1 - eps, and the
/// non-protected X2 equals Y with probability 1 - 2 eps, independently of A
/// given Y.
struct DEpsParams {
  double epsilon = 0.1;
  std::size_t n = 5000;
  std::uint64_t seed = 1;

  void validate() const {
    if (!(epsilon > 0.0 && epsilon < 0.25)) throw Error("epsilon must lie strictly inside (0, 0.25)");
    if (n < 1) throw Error("sample size must be at least 1");
  }
};

/// Draws n i.i.d. points with features (A, X2) and protected attribute A.
/// Each point consumes three uniforms in the order Y, A, X2.
inline Dataset sample_d_epsilon(const DEpsParams& p) {
  p.validate();
  Rng rng(p.seed);
  std::vector<LabeledPoint> pts;
  pts.reserve(p.n);
  for (std::size_t i = 0; i < p.n; ++i) {
    const int y = rng.bernoulli(0.5) ? 1 : 0;
    const int a = rng.bernoulli(p.epsilon) ? 1 - y : y;
    const int x2 = rng.bernoulli(2.0 * p.epsilon) ? 1 - y : y;
    pts.push_back({{static_cast<double>(a), static_cast<double>(x2)}, a, y});
  }
  return Dataset(std::move(pts), 2, std::size_t{0});
}

/// Population 0-1 losses of the rules y = A (Bayes optimal, maximally
/// unfair) and y = X2 (perfectly fair).
struct ReferenceLosses {
  double bayes_loss;
  double fair_loss;
};

inline ReferenceLosses reference_losses(double epsilon) {
  if (!(epsilon > 0.0 && epsilon < 0.25)) throw Error("epsilon must lie strictly inside (0, 0.25)");
  return {epsilon, 2.0 * epsilon};
}

/// Schema that loads a write_d_epsilon_csv file back into the same dataset.
inline DataSchema d_epsilon_schema() {
  DataSchema s;
  s.label_column = "Y";
  s.protected_column = "A";
  return s;
}

/// CSV with header "A,X2,Y".
inline void write_d_epsilon_csv(std::ostream& out, const Dataset& ds) {
  out << "A,X2,Y\n";
  for (const auto& p : ds.points()) out << p.group << ',' << static_cast<int>(p.features[1]) << ',' << p.label << '\n';
}

}  // namespace fairpen
