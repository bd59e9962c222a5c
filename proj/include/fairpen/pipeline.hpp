#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "fairpen/dataset.hpp"
#include "fairpen/error.hpp"
#include "fairpen/metrics.hpp"
#include "fairpen/model.hpp"
#include "fairpen/parallel.hpp"
#include "fairpen/penalty.hpp"
#include "fairpen/random.hpp"
#include "fairpen/trainer.hpp"

namespace fairpen {

/// How the sweep weight c maps to (c1, c2).
enum class WeightMode { FpOnly, FnOnly, Both };

inline std::string_view to_string(WeightMode m) {
  switch (m) {
    case WeightMode::FpOnly: return "fp";
    case WeightMode::FnOnly: return "fn";
    case WeightMode::Both: return "both";
  }
  return "both";
}

inline WeightMode parse_weight_mode(std::string_view s) {
  if (s == "fp") return WeightMode::FpOnly;
  if (s == "fn") return WeightMode::FnOnly;
  if (s == "both") return WeightMode::Both;
  throw Error("unknown weight mode '" + std::string(s) + "' (expected fp, fn or both)");
}

inline std::pair<double, double> weights_for(WeightMode m, double c) {
  switch (m) {
    case WeightMode::FpOnly: return {c, 0.0};
    case WeightMode::FnOnly: return {0.0, c};
    case WeightMode::Both: return {c, c};
  }
  return {c, c};
}

/// `count` values spaced geometrically from lo to hi inclusive.
inline std::vector<double> geometric_grid(double lo, double hi, std::size_t count) {
  std::vector<double> out;
  if (count == 1) return {lo};
  const double ratio = std::log(hi / lo) / static_cast<double>(count - 1);
  for (std::size_t i = 0; i < count; ++i) out.push_back(lo * std::exp(ratio * static_cast<double>(i)));
  out.back() = hi;
  return out;
}

/// 0 followed by 16 geometric values on [1, 2000].
inline std::vector<double> default_c_grid() {
  auto g = geometric_grid(1.0, 2000.0, 16);
  g.insert(g.begin(), 0.0);
  return g;
}

/// 8 geometric values on [1e-4 n, 1e-1 n]; scaled by n because the
/// log-likelihood is a sum. Larger q lets cross-validation buy fairness by
/// shrinking every weight, so c = 0 would no longer be plain regression.
inline std::vector<double> default_q_grid(std::size_t n_train) {
  const auto n = static_cast<double>(n_train);
  return geometric_grid(1e-4 * n, 1e-1 * n, 8);
}

/// Settings of the split / cross-validate / sweep / select / evaluate scheme.
struct SchemeConfig {
  double d1 = 1.0;
  double d2 = 1.0;
  std::vector<double> c_grid = default_c_grid();
  std::vector<double> q_grid;  // empty: default_q_grid(training size)
  WeightMode weight_mode = WeightMode::Both;
  PenaltyKind kind = PenaltyKind::SD;
  std::size_t folds = 5;
  std::size_t repetitions = 5;
  double test_fraction = 0.3;
  std::uint64_t seed = 1;
  bool standardize = true;
  bool stratify = false;
  std::size_t max_split_retries = 10;
  std::size_t jobs = 1;
  TrainConfig solver;  // tolerances; weights are overwritten per fit

  void validate() const {
    if (!(d1 >= 0 && d2 >= 0)) throw Error("scheme: d1 and d2 must be non-negative");
    if (c_grid.empty() || c_grid.front() != 0.0) throw Error("scheme: c grid must start at 0");
    for (std::size_t i = 1; i < c_grid.size(); ++i)
      if (!(c_grid[i] > c_grid[i - 1])) throw Error("scheme: c grid must be strictly ascending");
    for (double q : q_grid)
      if (!(q >= 0)) throw Error("scheme: q grid values must be non-negative");
    if (folds < 2) throw Error("scheme: at least 2 folds are required");
    if (repetitions < 1) throw Error("scheme: at least 1 repetition is required");
    if (!(test_fraction > 0 && test_fraction < 1)) throw Error("scheme: test fraction must lie in (0,1)");
  }
};

/// Mixes (base, a, b) into an independent-looking 64-bit seed (splitmix64).
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b = 0) {
  auto mix = [](std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  };
  return mix(mix(mix(base) ^ a) ^ b);
}

inline bool all_groups_present(const Dataset& ds) {
  const auto& g = ds.group_counts();
  return g(0, 0) && g(0, 1) && g(1, 0) && g(1, 1);
}

// ---------------------------------------------------------------------------
// Cross-validation

struct CvResult {
  double q = 0.0;
  std::vector<double> mean_objective;  // one per q grid entry
};

namespace detail {

inline TrainConfig fit_config(const TrainConfig& base, double c1, double c2, double q, PenaltyKind kind) {
  TrainConfig cfg = base;
  cfg.c1 = c1;
  cfg.c2 = c2;
  cfg.q = q;
  cfg.kind = kind;
  return cfg;
}

/// Smallest mean wins; exact ties go to the larger q.
inline std::size_t pick_q(const std::vector<double>& q_grid, const std::vector<double>& means) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < q_grid.size(); ++i)
    if (means[i] < means[best] || (means[i] == means[best] && q_grid[i] > q_grid[best])) best = i;
  return best;
}

}  // namespace detail

/// For each q, fits on every fold's training part and scores the true
/// objective on the held-out part; returns the q with the lowest mean score.
inline CvResult cv_select_q(const Dataset& train, double c1, double c2, PenaltyKind kind,
                            const std::vector<double>& q_grid, std::size_t folds, std::uint64_t seed, double d1,
                            double d2, const TrainConfig& solver = {}, std::size_t jobs = 1) {
  if (q_grid.empty()) throw Error("cv: q grid is empty");
  const auto split_idx = kfold_indices(train.size(), folds, seed);
  std::vector<TrainTest> parts;
  for (std::size_t f = 0; f < split_idx.size(); ++f) {
    parts.push_back({train.subset(split_idx[f].train), train.subset(split_idx[f].validation)});
    if (!all_groups_present(parts.back().train))
      throw DataError("cv: fold " + std::to_string(f) + " training part is missing a (group, label) cell");
  }
  std::vector<double> scores(q_grid.size() * folds);
  parallel_for(scores.size(), jobs, [&](std::size_t t) {
    const auto qi = t / folds;
    const auto f = t % folds;
    const auto cfg = detail::fit_config(solver, c1, c2, q_grid[qi], kind);
    const auto res = fit(parts[f].train, cfg);
    scores[t] = objective(res.params, parts[f].test, d1, d2);
  });
  CvResult out;
  for (std::size_t qi = 0; qi < q_grid.size(); ++qi) {
    double s = 0.0;
    for (std::size_t f = 0; f < folds; ++f) s += scores[qi * folds + f];
    out.mean_objective.push_back(s / static_cast<double>(folds));
  }
  out.q = q_grid[detail::pick_q(q_grid, out.mean_objective)];
  return out;
}

// ---------------------------------------------------------------------------
// Full scheme

/// One trained model in the c sweep.
struct SweepPoint {
  double c = 0.0;
  double q_selected = 0.0;
  std::vector<double> cv_mean_objective;
  EvalSummary train;
  EvalSummary test;
  double relaxed_fp = 0.0;  // unweighted penalizers at theta, training-set directions
  double relaxed_fn = 0.0;
  double train_objective = 0.0;  // selection criterion
  double test_objective = 0.0;
  std::size_t iterations = 0;
  bool converged = false;
  ModelParams theta;
};

struct RepetitionReport {
  std::size_t rep = 0;
  std::uint64_t split_seed = 0;
  std::size_t split_retries = 0;
  std::size_t n_train = 0;
  std::size_t n_test = 0;
  std::vector<double> q_grid;
  std::vector<SweepPoint> points;
  std::size_t selected = 0;  // index into points
  const SweepPoint& chosen() const { return points[selected]; }
};

struct SchemeReport {
  SchemeConfig config;
  std::vector<RepetitionReport> reps;
  double mean_accuracy = 0.0;
  double mean_d_fpr = 0.0;
  double mean_d_fnr = 0.0;
};

/// Index of the smallest training objective; ties go to the earlier
/// (smaller) c.
inline std::size_t select_by_objective(const std::vector<SweepPoint>& pts) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < pts.size(); ++i)
    if (pts[i].train_objective < pts[best].train_objective) best = i;
  return best;
}

/// Runs the whole scheme: per repetition a fresh split, per c a
/// cross-validated q and a fit on the full training split, selection of the
/// model with the smallest true objective on the training split, and test
/// evaluation. Every (repetition, c, q, fold) fit is an independent task.
inline SchemeReport run_scheme(const Dataset& data, const SchemeConfig& cfg) {
  cfg.validate();
  struct RepState {
    RepetitionReport report;
    Dataset train;
    Dataset test;
    std::vector<TrainTest> folds;
    PenaltySpec directions;
  };
  std::vector<RepState> reps(cfg.repetitions);

  for (std::size_t r = 0; r < cfg.repetitions; ++r) {
    auto& st = reps[r];
    st.report.rep = r;
    bool ok = false;
    for (std::size_t attempt = 0; attempt <= cfg.max_split_retries && !ok; ++attempt) {
      const auto seed = derive_seed(cfg.seed, r, attempt);
      try {
        auto tt = split(data, cfg.test_fraction, seed, cfg.stratify);
        if (!all_groups_present(tt.train) || !all_groups_present(tt.test)) continue;
        if (cfg.standardize) {
          auto sp = standardize(tt.train, tt.test);
          tt.train = std::move(sp.train);
          tt.test = std::move(sp.test);
        }
        st.train = std::move(tt.train);
        st.test = std::move(tt.test);
        st.report.split_seed = seed;
        st.report.split_retries = attempt;
        ok = true;
      } catch (const DataError&) {
        // degenerate split; try the next seed
      }
    }
    if (!ok)
      throw DataError("repetition " + std::to_string(r) + ": no split with all four (group, label) cells on both sides after " +
                      std::to_string(cfg.max_split_retries) + " retries");
    st.report.n_train = st.train.size();
    st.report.n_test = st.test.size();
    st.report.q_grid = cfg.q_grid.empty() ? default_q_grid(st.train.size()) : cfg.q_grid;
    st.directions = PenaltySpec::from_dataset(st.train, cfg.kind, 0.0, 0.0);
    for (const auto& f : kfold_indices(st.train.size(), cfg.folds, derive_seed(cfg.seed, r, 0xCF))) {
      st.folds.push_back({st.train.subset(f.train), st.train.subset(f.validation)});
      if (!all_groups_present(st.folds.back().train))
        throw DataError("repetition " + std::to_string(r) + ": a cross-validation fold is missing a (group, label) cell");
    }
    st.report.points.resize(cfg.c_grid.size());
  }

  const std::size_t n_c = cfg.c_grid.size();
  auto coord = [&](std::size_t r, std::size_t ci) {
    return "repetition " + std::to_string(r) + ", c=" + format_double(cfg.c_grid[ci]) + ": ";
  };

  // Cross-validation fits, indexed (rep, c, q, fold).
  std::vector<std::size_t> cv_offset(cfg.repetitions + 1, 0);
  for (std::size_t r = 0; r < cfg.repetitions; ++r)
    cv_offset[r + 1] = cv_offset[r] + n_c * reps[r].report.q_grid.size() * cfg.folds;
  std::vector<double> cv_scores(cv_offset.back());
  parallel_for(cv_scores.size(), cfg.jobs, [&](std::size_t t) {
    std::size_t r = 0;
    while (t >= cv_offset[r + 1]) ++r;
    const auto& st = reps[r];
    const auto n_q = st.report.q_grid.size();
    auto local = t - cv_offset[r];
    const auto f = local % cfg.folds;
    local /= cfg.folds;
    const auto qi = local % n_q;
    const auto ci = local / n_q;
    const auto [c1, c2] = weights_for(cfg.weight_mode, cfg.c_grid[ci]);
    try {
      const auto tc = detail::fit_config(cfg.solver, c1, c2, st.report.q_grid[qi], cfg.kind);
      const auto res = fit(st.folds[f].train, tc);
      cv_scores[t] = objective(res.params, st.folds[f].test, cfg.d1, cfg.d2);
    } catch (const std::exception& e) {
      throw Error(coord(r, ci) + "cross-validation fold " + std::to_string(f) + ": " + e.what());
    }
  });

  for (std::size_t r = 0; r < cfg.repetitions; ++r) {
    auto& st = reps[r];
    const auto n_q = st.report.q_grid.size();
    for (std::size_t ci = 0; ci < n_c; ++ci) {
      auto& pt = st.report.points[ci];
      pt.c = cfg.c_grid[ci];
      pt.cv_mean_objective.assign(n_q, 0.0);
      for (std::size_t qi = 0; qi < n_q; ++qi) {
        double s = 0.0;
        for (std::size_t f = 0; f < cfg.folds; ++f) s += cv_scores[cv_offset[r] + (ci * n_q + qi) * cfg.folds + f];
        pt.cv_mean_objective[qi] = s / static_cast<double>(cfg.folds);
      }
      pt.q_selected = st.report.q_grid[detail::pick_q(st.report.q_grid, pt.cv_mean_objective)];
    }
  }

  // Final fits on each full training split, indexed (rep, c).
  parallel_for(cfg.repetitions * n_c, cfg.jobs, [&](std::size_t t) {
    const auto r = t / n_c;
    const auto ci = t % n_c;
    auto& st = reps[r];
    auto& pt = st.report.points[ci];
    const auto [c1, c2] = weights_for(cfg.weight_mode, pt.c);
    try {
      const auto tc = detail::fit_config(cfg.solver, c1, c2, pt.q_selected, cfg.kind);
      const auto res = fit(st.train, tc);
      pt.theta = res.params;
      pt.iterations = res.iterations;
      pt.converged = res.converged;
      pt.train = evaluate(pt.theta, st.train);
      pt.test = evaluate(pt.theta, st.test);
      pt.train_objective = objective_from(pt.train, cfg.d1, cfg.d2);
      pt.test_objective = objective_from(pt.test, cfg.d1, cfg.d2);
      const auto pv = penalty_value(pt.theta, st.directions);
      pt.relaxed_fp = pv.fp;
      pt.relaxed_fn = pv.fn;
    } catch (const std::exception& e) {
      throw Error(coord(r, ci) + e.what());
    }
  });

  SchemeReport out;
  out.config = cfg;
  for (auto& st : reps) {
    st.report.selected = select_by_objective(st.report.points);
    const auto& chosen = st.report.chosen();
    out.mean_accuracy += chosen.test.accuracy;
    out.mean_d_fpr += chosen.test.rates.d_fpr;
    out.mean_d_fnr += chosen.test.rates.d_fnr;
    out.reps.push_back(std::move(st.report));
  }
  const auto reps_n = static_cast<double>(cfg.repetitions);
  out.mean_accuracy /= reps_n;
  out.mean_d_fpr /= reps_n;
  out.mean_d_fnr /= reps_n;
  return out;
}

// ---------------------------------------------------------------------------
// Report output

inline nlohmann::json to_json(const SchemeConfig& c) {
  return {{"d1", c.d1},
          {"d2", c.d2},
          {"c_grid", c.c_grid},
          {"q_grid", c.q_grid},
          {"weight_mode", to_string(c.weight_mode)},
          {"kind", to_string(c.kind)},
          {"folds", c.folds},
          {"repetitions", c.repetitions},
          {"test_fraction", c.test_fraction},
          {"seed", c.seed},
          {"standardize", c.standardize},
          {"stratify", c.stratify}};
}

inline nlohmann::json to_json(const SweepPoint& p) {
  return {{"c", p.c},
          {"q", p.q_selected},
          {"cv_mean_objective", p.cv_mean_objective},
          {"train", to_json(p.train)},
          {"test", to_json(p.test)},
          {"relaxed_fp", p.relaxed_fp},
          {"relaxed_fn", p.relaxed_fn},
          {"train_objective", p.train_objective},
          {"test_objective", p.test_objective},
          {"iterations", p.iterations},
          {"converged", p.converged},
          {"theta", p.theta.theta}};
}

inline nlohmann::json to_json(const SchemeReport& r) {
  nlohmann::json reps = nlohmann::json::array();
  for (const auto& rep : r.reps) {
    nlohmann::json pts = nlohmann::json::array();
    for (const auto& p : rep.points) pts.push_back(to_json(p));
    reps.push_back({{"rep", rep.rep},
                    {"split_seed", rep.split_seed},
                    {"split_retries", rep.split_retries},
                    {"n_train", rep.n_train},
                    {"n_test", rep.n_test},
                    {"q_grid", rep.q_grid},
                    {"points", pts},
                    {"selected_index", rep.selected},
                    {"selected_c", rep.chosen().c},
                    {"final", to_json(rep.chosen().test)}});
  }
  return {{"config", to_json(r.config)},
          {"repetitions", reps},
          {"mean", {{"accuracy", r.mean_accuracy}, {"d_fpr", r.mean_d_fpr}, {"d_fnr", r.mean_d_fnr}}}};
}

inline constexpr std::string_view kSweepTsvHeader =
    "rep\tc\tq\tsplit\taccuracy\td_fpr\td_fnr\trelaxed_fp\trelaxed_fn\tobjective";

/// One row per (repetition, c). Accuracy, rate gaps and objective are
/// measured on the split named in the `split` column (always "test");
/// relaxed_fp/relaxed_fn are the penalizers with training-set directions.
inline void write_sweep_tsv(std::ostream& out, const SchemeReport& r) {
  out << kSweepTsvHeader << '\n';
  for (const auto& rep : r.reps)
    for (const auto& p : rep.points)
      out << rep.rep << '\t' << format_double(p.c) << '\t' << format_double(p.q_selected) << "\ttest\t"
          << format_double(p.test.accuracy) << '\t' << format_double(p.test.rates.d_fpr) << '\t'
          << format_double(p.test.rates.d_fnr) << '\t' << format_double(p.relaxed_fp) << '\t'
          << format_double(p.relaxed_fn) << '\t' << format_double(p.test_objective) << '\n';
}

// ---------------------------------------------------------------------------
// Post-processing

/// Group-dependent random flips layered on a trained linear model. In group
/// a, a predicted 1 becomes 0 with probability flip_pos_to_neg[a] and a
/// predicted 0 becomes 1 with probability flip_neg_to_pos[a].
struct RandomizedPredictor {
  ModelParams base;
  std::array<double, 2> flip_pos_to_neg{0.0, 0.0};
  std::array<double, 2> flip_neg_to_pos{0.0, 0.0};
  std::uint64_t seed = 1;

  /// One uniform draw per point, in dataset order, from a stream seeded by `seed`.
  std::vector<int> predict_all(const Dataset& ds) const {
    auto pred = fairpen::predict_all(base, ds);
    Rng rng(seed);
    for (std::size_t i = 0; i < ds.size(); ++i) {
      const int a = ds[i].group;
      const double u = rng.uniform();
      if (pred[i] == 1) pred[i] = u < flip_pos_to_neg[a] ? 0 : 1;
      else pred[i] = u < flip_neg_to_pos[a] ? 1 : 0;
    }
    return pred;
  }
};

/// Closed-form expectation of the randomized predictor's confusion counts.
struct ExpectedConfusion {
  std::array<double, 2> tp{}, fp{}, tn{}, fn{};
};

struct ExpectedOutcome {
  ExpectedConfusion counts;
  double accuracy = 0.0;
  double fpr_0 = 0, fpr_1 = 0, fnr_0 = 0, fnr_1 = 0;
  double d_fpr = 0.0;
  double d_fnr = 0.0;
};

inline ExpectedOutcome expected_outcome(const GroupConfusion& base, const std::array<double, 2>& p,
                                        const std::array<double, 2>& r) {
  ExpectedOutcome out;
  double errors = 0.0;
  std::array<double, 2> fpr{}, fnr{};
  for (int a = 0; a < 2; ++a) {
    const auto& c = base.group[a];
    const double tp = static_cast<double>(c.tp), fp = static_cast<double>(c.fp);
    const double tn = static_cast<double>(c.tn), fn = static_cast<double>(c.fn);
    out.counts.fp[a] = fp * (1.0 - p[a]) + tn * r[a];
    out.counts.tn[a] = tn * (1.0 - r[a]) + fp * p[a];
    out.counts.fn[a] = fn * (1.0 - r[a]) + tp * p[a];
    out.counts.tp[a] = tp * (1.0 - p[a]) + fn * r[a];
    if (c.negatives() == 0) throw EmptyGroupError(a, 0, "post-processing");
    if (c.positives() == 0) throw EmptyGroupError(a, 1, "post-processing");
    fpr[a] = out.counts.fp[a] / static_cast<double>(c.negatives());
    fnr[a] = out.counts.fn[a] / static_cast<double>(c.positives());
    errors += out.counts.fp[a] + out.counts.fn[a];
  }
  out.fpr_0 = fpr[0];
  out.fpr_1 = fpr[1];
  out.fnr_0 = fnr[0];
  out.fnr_1 = fnr[1];
  out.d_fpr = std::abs(fpr[0] - fpr[1]);
  out.d_fnr = std::abs(fnr[0] - fnr[1]);
  out.accuracy = 1.0 - errors / static_cast<double>(base.total());
  return out;
}

inline ExpectedOutcome expected_outcome(const RandomizedPredictor& rp, const Dataset& ds) {
  return expected_outcome(confusion_by_group(fairpen::predict_all(rp.base, ds), ds), rp.flip_pos_to_neg,
                          rp.flip_neg_to_pos);
}

struct PostprocessResult {
  RandomizedPredictor predictor;
  ExpectedOutcome expected;
};

/// Exhaustive search over flip probabilities on the grid {0, res, 2 res, ..., 1}
/// for the predictor with the smallest expected 0-1 loss on S whose expected
/// D_FPR and D_FNR are both at most `target`. Grid order is (p0, r0, p1, r1)
/// ascending and only strict improvements replace the incumbent, so fewer
/// flips win ties.
inline PostprocessResult postprocess_equalize(const ModelParams& theta, const Dataset& S, double target,
                                              double resolution, std::uint64_t seed) {
  if (!(target >= 0)) throw Error("post-processing: target must be non-negative");
  if (!(resolution > 0 && resolution <= 1)) throw Error("post-processing: resolution must lie in (0,1]");
  const double steps_real = 1.0 / resolution;
  const auto steps = static_cast<std::size_t>(std::llround(steps_real));
  if (std::abs(steps_real - static_cast<double>(steps)) > 1e-9 * steps_real)
    throw Error("post-processing: resolution must divide 1");

  const auto base = confusion_by_group(predict_all(theta, S), S);
  for (int a = 0; a < 2; ++a) {
    if (base.group[a].negatives() == 0) throw EmptyGroupError(a, 0, "post-processing");
    if (base.group[a].positives() == 0) throw EmptyGroupError(a, 1, "post-processing");
  }
  const std::size_t side = steps + 1;
  auto prob = [&](std::size_t i) { return static_cast<double>(i) / static_cast<double>(steps); };

  // Per-group tables over (p, r): rates and expected error counts.
  struct Cell {
    double fpr, fnr, err;
  };
  std::array<std::vector<Cell>, 2> table;
  for (int a = 0; a < 2; ++a) {
    const auto& c = base.group[a];
    const double tp = static_cast<double>(c.tp), fp = static_cast<double>(c.fp);
    const double tn = static_cast<double>(c.tn), fn = static_cast<double>(c.fn);
    table[a].resize(side * side);
    for (std::size_t i = 0; i < side; ++i)
      for (std::size_t j = 0; j < side; ++j) {
        const double p = prob(i), r = prob(j);
        const double efp = fp * (1.0 - p) + tn * r;
        const double efn = fn * (1.0 - r) + tp * p;
        table[a][i * side + j] = {efp / static_cast<double>(c.negatives()), efn / static_cast<double>(c.positives()),
                                  efp + efn};
      }
  }
  double min_err1 = std::numeric_limits<double>::infinity();
  for (const auto& cell : table[1]) min_err1 = std::min(min_err1, cell.err);

  constexpr double kFeasTol = 1e-12;
  constexpr double kImproveTol = 1e-9;
  double best = std::numeric_limits<double>::infinity();
  std::size_t best0 = 0, best1 = 0;
  bool found = false;
  for (std::size_t k0 = 0; k0 < table[0].size(); ++k0) {
    const auto& g0 = table[0][k0];
    if (found && g0.err + min_err1 >= best - kImproveTol) continue;
    for (std::size_t k1 = 0; k1 < table[1].size(); ++k1) {
      const auto& g1 = table[1][k1];
      if (std::abs(g0.fpr - g1.fpr) > target + kFeasTol || std::abs(g0.fnr - g1.fnr) > target + kFeasTol) continue;
      const double e = g0.err + g1.err;
      if (!found || e < best - kImproveTol) {
        best = e;
        best0 = k0;
        best1 = k1;
        found = true;
      }
    }
  }
  // p = 1, r = 0 in both groups (always predict 0) equalizes both rates
  // exactly, so the feasible set is never empty.
  if (!found) throw Error("post-processing: no feasible grid point (internal error)");

  PostprocessResult out;
  out.predictor.base = theta;
  out.predictor.seed = seed;
  out.predictor.flip_pos_to_neg = {prob(best0 / side), prob(best1 / side)};
  out.predictor.flip_neg_to_pos = {prob(best0 % side), prob(best1 % side)};
  out.expected = expected_outcome(base, out.predictor.flip_pos_to_neg, out.predictor.flip_neg_to_pos);
  return out;
}

inline nlohmann::json to_json(const RandomizedPredictor& rp) {
  return {{"theta", rp.base.theta},
          {"flip_pos_to_neg", rp.flip_pos_to_neg},
          {"flip_neg_to_pos", rp.flip_neg_to_pos},
          {"seed", rp.seed}};
}

inline nlohmann::json to_json(const ExpectedOutcome& e) {
  return {{"accuracy", e.accuracy}, {"d_fpr", e.d_fpr}, {"d_fnr", e.d_fnr}, {"fpr_0", e.fpr_0},
          {"fpr_1", e.fpr_1},       {"fnr_0", e.fnr_0}, {"fnr_1", e.fnr_1}};
}

}  // namespace fairpen
