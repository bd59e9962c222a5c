#include <gtest/gtest.h>

#include <random>

#include "fairpen/metrics.hpp"
#include "fairpen/synth.hpp"
#include "oracles.hpp"

using namespace fairpen;

namespace {

Dataset four_points() {
  // group 0: (y=0), (y=1); group 1: (y=0), (y=1)
  return Dataset({{{0.0}, 0, 0}, {{0.0}, 0, 1}, {{1.0}, 1, 0}, {{1.0}, 1, 1}}, 1, std::size_t{0});
}

std::vector<int> labels_of(const Dataset& ds) {
  std::vector<int> y;
  for (const auto& p : ds.points()) y.push_back(p.label);
  return y;
}

}  // namespace

TEST(GroupRates, DirectCount) {
  const auto r = group_rates(std::vector<int>{1, 1, 0, 0}, four_points());
  EXPECT_EQ(r.fpr_0, 1.0);
  EXPECT_EQ(r.fnr_0, 0.0);
  EXPECT_EQ(r.fpr_1, 0.0);
  EXPECT_EQ(r.fnr_1, 1.0);
  EXPECT_EQ(r.d_fpr, 1.0);
  EXPECT_EQ(r.d_fnr, 1.0);
}

TEST(GroupRates, PerfectAndFlipped) {
  const auto ds = four_points();
  auto y = labels_of(ds);
  const auto perfect = group_rates(y, ds);
  EXPECT_EQ(perfect.fpr_0 + perfect.fpr_1 + perfect.fnr_0 + perfect.fnr_1, 0.0);
  for (auto& v : y) v = 1 - v;
  const auto flipped = group_rates(y, ds);
  EXPECT_EQ(flipped.fpr_0, 1.0);
  EXPECT_EQ(flipped.fpr_1, 1.0);
  EXPECT_EQ(flipped.fnr_0, 1.0);
  EXPECT_EQ(flipped.fnr_1, 1.0);
  EXPECT_EQ(flipped.d_fpr, 0.0);
  EXPECT_EQ(flipped.d_fnr, 0.0);
}

TEST(GroupRates, EmptyGroupNamesTheCell) {
  const Dataset ds({{{0.0}, 0, 0}, {{0.0}, 0, 1}, {{1.0}, 1, 0}}, 1, std::size_t{0});
  try {
    group_rates(std::vector<int>{0, 0, 0}, ds);
    FAIL() << "expected EmptyGroupError";
  } catch (const EmptyGroupError& e) {
    EXPECT_EQ(e.group(), 1);
    EXPECT_EQ(e.label(), 1);
    EXPECT_NE(std::string(e.what()).find("S_11"), std::string::npos);
  }
  EXPECT_THROW(group_rates(std::vector<int>{0, 0}, ds), DimensionError);
}

TEST(Evaluate, ZeroThetaPredictsPositiveEverywhere) {
  const auto s = evaluate(ModelParams::zeros(1), four_points());
  EXPECT_EQ(s.rates.fpr_0, 1.0);
  EXPECT_EQ(s.rates.fpr_1, 1.0);
  EXPECT_EQ(s.rates.fnr_0, 0.0);
  EXPECT_EQ(s.rates.fnr_1, 0.0);
  EXPECT_EQ(s.accuracy, 0.5);
  EXPECT_THROW(evaluate(ModelParams::zeros(2), four_points()), DimensionError);
}

TEST(Evaluate, DEpsilonReferenceRules) {
  const auto ds = sample_d_epsilon({0.1, 5000, 1});
  // predict A: score = A - 0.5
  const auto by_a = evaluate(ModelParams({1.0, 0.0, -0.5}), ds);
  EXPECT_NEAR(by_a.accuracy, 0.9, 0.02);
  EXPECT_EQ(by_a.rates.d_fpr, 1.0);
  EXPECT_EQ(by_a.rates.d_fnr, 1.0);
  // predict X2
  const auto by_x2 = evaluate(ModelParams({0.0, 1.0, -0.5}), ds);
  EXPECT_NEAR(by_x2.accuracy, 0.8, 0.02);
  EXPECT_LE(by_x2.rates.d_fpr, 0.08);  // about 3 standard errors for a 250-point cell
  EXPECT_LE(by_x2.rates.d_fnr, 0.08);
}

TEST(Objective, Composition) {
  const auto ds = four_points();
  EvalSummary s;
  s.zero_one_loss = 0.3;
  s.rates.d_fpr = 0.2;
  s.rates.d_fnr = 0.1;
  EXPECT_DOUBLE_EQ(objective_from(s, 1, 1), 0.6);
  const auto perfect = summarize(labels_of(ds), ds);
  EXPECT_EQ(objective_from(perfect, 3.0, 7.0), 0.0);
  const ModelParams theta({2.0, -1.0});
  EXPECT_EQ(objective(theta, ds, 0, 0), evaluate(theta, ds).zero_one_loss);
  EXPECT_THROW(objective(theta, ds, -1, 0), Error);
}

TEST(Metrics, SwappingGroupsSwapsRates) {
  std::mt19937_64 gen(17);
  std::bernoulli_distribution coin(0.5);
  for (int trial = 0; trial < 200; ++trial) {
    const auto ds = oracle::random_dataset(gen, 30, 1);
    std::vector<int> pred(ds.size());
    for (auto& v : pred) v = coin(gen);
    std::vector<LabeledPoint> swapped = ds.points();
    for (auto& p : swapped) {
      p.group = 1 - p.group;
      p.features[0] = p.group;
    }
    const Dataset sw(std::move(swapped), ds.dim(), std::size_t{0});
    const auto a = summarize(pred, ds);
    const auto b = summarize(pred, sw);
    EXPECT_EQ(a.rates.fpr_0, b.rates.fpr_1);
    EXPECT_EQ(a.rates.fnr_0, b.rates.fnr_1);
    EXPECT_EQ(a.rates.d_fpr, b.rates.d_fpr);
    EXPECT_EQ(a.rates.d_fnr, b.rates.d_fnr);
    EXPECT_EQ(a.accuracy, b.accuracy);
    EXPECT_GE(a.rates.d_fpr, 0.0);
    EXPECT_LE(a.rates.d_fpr, 1.0);
    EXPECT_GE(a.accuracy, 0.0);
    EXPECT_LE(a.accuracy, 1.0);
  }
}

TEST(Metrics, AccuracyAndLossAreComplementary) {
  for (std::size_t n = 4; n <= 400; ++n) {
    std::vector<LabeledPoint> pts;
    for (std::size_t i = 0; i < n; ++i) pts.push_back({{0.0}, static_cast<int>(i % 2), static_cast<int>((i / 2) % 2)});
    const Dataset ds(std::move(pts), 1);
    for (std::size_t errs = 0; errs <= n; errs += 1 + n / 17) {
      std::vector<int> pred;
      for (std::size_t i = 0; i < n; ++i) pred.push_back(i < errs ? 1 - ds[i].label : ds[i].label);
      const auto s = summarize(pred, ds);
      EXPECT_EQ(s.accuracy + s.zero_one_loss, 1.0) << n << " " << errs;
    }
  }
}

TEST(Metrics, JsonKeys) {
  const auto j = to_json(evaluate(ModelParams::zeros(1), four_points()));
  for (const char* key : {"accuracy", "d_fpr", "d_fnr", "fpr_0", "fpr_1", "fnr_0", "fnr_1", "n"})
    EXPECT_TRUE(j.contains(key)) << key;
  EXPECT_EQ(j.size(), 8u);
  EXPECT_EQ(j["n"].get<int>(), 4);
}

TEST(Metrics, MatchesCountingOracleOnEveryPrediction) {
  std::mt19937_64 gen(5);
  for (std::size_t n = 4; n <= 12; ++n) {
    const auto ds = oracle::random_dataset(gen, n, 1);
    std::vector<int> groups, labels;
    for (const auto& p : ds.points()) {
      groups.push_back(p.group);
      labels.push_back(p.label);
    }
    for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
      std::vector<int> pred(n);
      for (std::size_t i = 0; i < n; ++i) pred[i] = (mask >> i) & 1u;
      const auto want = oracle::count_rates(groups, labels, pred);
      const auto got = summarize(pred, ds);
      ASSERT_EQ(got.rates.fpr_0, want.fpr[0].value());
      ASSERT_EQ(got.rates.fpr_1, want.fpr[1].value());
      ASSERT_EQ(got.rates.fnr_0, want.fnr[0].value());
      ASSERT_EQ(got.rates.fnr_1, want.fnr[1].value());
      ASSERT_EQ(got.rates.d_fpr, std::abs(want.fpr[0].value() - want.fpr[1].value()));
      ASSERT_EQ(got.rates.d_fnr, std::abs(want.fnr[0].value() - want.fnr[1].value()));
      ASSERT_DOUBLE_EQ(got.zero_one_loss, static_cast<double>(want.errors) / static_cast<double>(want.n));
    }
  }
}
