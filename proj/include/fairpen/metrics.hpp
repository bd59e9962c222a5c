#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "fairpen/dataset.hpp"
#include "fairpen/error.hpp"
#include "fairpen/model.hpp"

namespace fairpen {

/// Integer confusion counts for one protected group.
struct Confusion {
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;

  std::size_t negatives() const { return fp + tn; }
  std::size_t positives() const { return tp + fn; }
  std::size_t errors() const { return fp + fn; }
};

struct GroupConfusion {
  std::array<Confusion, 2> group;  // indexed by protected value a

  std::size_t errors() const { return group[0].errors() + group[1].errors(); }
  std::size_t total() const {
    return group[0].negatives() + group[0].positives() + group[1].negatives() + group[1].positives();
  }
};

inline GroupConfusion confusion_by_group(std::span<const int> predictions, const Dataset& ds) {
  if (predictions.size() != ds.size())
    throw DimensionError("group rates: " + std::to_string(predictions.size()) + " predictions for " +
                         std::to_string(ds.size()) + " points");
  GroupConfusion out;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    auto& c = out.group[ds[i].group];
    const int y = ds[i].label;
    const int yhat = predictions[i];
    if (yhat != 0 && yhat != 1) throw DataError("group rates: predictions must be 0 or 1");
    if (y == 0) (yhat ? c.fp : c.tn)++;
    else (yhat ? c.tp : c.fn)++;
  }
  return out;
}

/// Per-group false positive / false negative rates and their gaps.
struct GroupRates {
  double fpr_0 = 0, fpr_1 = 0, fnr_0 = 0, fnr_1 = 0;
  double d_fpr = 0, d_fnr = 0;
};

/// Rates from counts. Each rate is a single integer division, so there is
/// no accumulated rounding. Throws if any S_ay is empty.
inline GroupRates rates_from_confusion(const GroupConfusion& gc) {
  for (int a = 0; a < 2; ++a) {
    if (gc.group[a].negatives() == 0) throw EmptyGroupError(a, 0, "group rates");
    if (gc.group[a].positives() == 0) throw EmptyGroupError(a, 1, "group rates");
  }
  auto ratio = [](std::size_t num, std::size_t den) { return static_cast<double>(num) / static_cast<double>(den); };
  GroupRates r;
  r.fpr_0 = ratio(gc.group[0].fp, gc.group[0].negatives());
  r.fpr_1 = ratio(gc.group[1].fp, gc.group[1].negatives());
  r.fnr_0 = ratio(gc.group[0].fn, gc.group[0].positives());
  r.fnr_1 = ratio(gc.group[1].fn, gc.group[1].positives());
  r.d_fpr = std::abs(r.fpr_0 - r.fpr_1);
  r.d_fnr = std::abs(r.fnr_0 - r.fnr_1);
  return r;
}

inline GroupRates group_rates(std::span<const int> predictions, const Dataset& ds) {
  return rates_from_confusion(confusion_by_group(predictions, ds));
}

struct EvalSummary {
  double accuracy = 0;
  double zero_one_loss = 0;
  GroupRates rates;
  std::size_t n_evaluated = 0;
};

inline EvalSummary summarize(std::span<const int> predictions, const Dataset& ds) {
  const auto gc = confusion_by_group(predictions, ds);
  EvalSummary s;
  s.rates = rates_from_confusion(gc);
  s.n_evaluated = ds.size();
  const auto n = static_cast<double>(ds.size());
  const auto errors = gc.errors();
  s.zero_one_loss = static_cast<double>(errors) / n;
  s.accuracy = static_cast<double>(ds.size() - errors) / n;
  return s;
}

/// Predicts with the sign rule (score 0 -> class 1) and summarizes.
inline EvalSummary evaluate(const ModelParams& theta, const Dataset& ds) {
  check_dims(theta, ds, "evaluate");
  const auto pred = predict_all(theta, ds);
  return summarize(pred, ds);
}

/// 0-1 loss + d1 * D_FPR + d2 * D_FNR.
inline double objective_from(const EvalSummary& s, double d1, double d2) {
  return s.zero_one_loss + d1 * s.rates.d_fpr + d2 * s.rates.d_fnr;
}

inline double objective(const ModelParams& theta, const Dataset& ds, double d1, double d2) {
  if (d1 < 0 || d2 < 0) throw Error("objective: d1 and d2 must be non-negative");
  return objective_from(evaluate(theta, ds), d1, d2);
}

inline nlohmann::json to_json(const EvalSummary& s) {
  return nlohmann::json{{"accuracy", s.accuracy}, {"d_fpr", s.rates.d_fpr}, {"d_fnr", s.rates.d_fnr},
                        {"fpr_0", s.rates.fpr_0}, {"fpr_1", s.rates.fpr_1}, {"fnr_0", s.rates.fnr_0},
                        {"fnr_1", s.rates.fnr_1}, {"n", s.n_evaluated}};
}

}  // namespace fairpen
