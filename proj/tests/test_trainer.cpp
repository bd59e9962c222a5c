#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "fairpen/metrics.hpp"
#include "fairpen/synth.hpp"
#include "fairpen/trainer.hpp"
#include "oracles.hpp"

using namespace fairpen;

namespace {

// xbar_fp = (-1, 2), xbar_fn = (2, 0); see test_penalty.cpp.
Dataset hand_data() {
  return Dataset({{{0, 2}, 0, 0}, {{0, 4}, 0, 0}, {{1, 1}, 1, 0}, {{5, 5}, 0, 1}, {{3, 5}, 1, 1}}, 2);
}

TrainConfig config(double c1, double c2, double q, PenaltyKind kind = PenaltyKind::SD) {
  TrainConfig c;
  c.c1 = c1;
  c.c2 = c2;
  c.q = q;
  c.kind = kind;
  return c;
}

Vector random_vec(std::mt19937_64& gen, std::size_t n, double sd) {
  std::normal_distribution<double> normal(0.0, sd);
  Vector v(n);
  for (auto& x : v) x = normal(gen);
  return v;
}

}  // namespace

TEST(LogLikelihood, HandValues) {
  const Dataset one({{{1.0}, 0, 1}}, 1);
  EXPECT_NEAR(log_likelihood(ModelParams({2.0, 0.0}), one), -0.1269280110429725, 1e-15);
  const Dataset four({{{1.0}, 0, 1}, {{-2.0}, 1, 0}, {{3.0}, 0, 0}, {{0.5}, 1, 1}}, 1);
  EXPECT_NEAR(log_likelihood(ModelParams::zeros(1), four), -2.772588722239781, 1e-14);
  // stable far from zero
  EXPECT_TRUE(std::isfinite(log_likelihood(ModelParams({1000.0, 0.0}), four)));
  EXPECT_NEAR(log_likelihood(ModelParams({800.0, 0.0}), one), 0.0, 1e-300);
}

TEST(Proxy, ReducesToNegativeLogLikelihood) {
  const auto ds = hand_data();
  const ModelParams theta({0.3, -0.2, 0.1});
  const auto cfg = config(0, 0, 0);
  EXPECT_NEAR(proxy_objective(theta, ds, cfg, penalty_for(ds, cfg)), -log_likelihood(theta, ds), 1e-12);
}

TEST(Proxy, HandPenaltyAndRegularizer) {
  const auto ds = hand_data();
  const ModelParams theta({0.0, 1.0, 0.0});  // theta . xbar_fp = 2
  const auto sd = config(1, 0, 0);
  EXPECT_NEAR(proxy_objective(theta, ds, sd, penalty_for(ds, sd)), -log_likelihood(theta, ds) + 4.0, 1e-12);
  const auto avd = config(1, 0, 0, PenaltyKind::AVD);
  EXPECT_NEAR(proxy_objective(theta, ds, avd, penalty_for(ds, avd)), -log_likelihood(theta, ds) + 2.0, 1e-12);
  // q counts the feature weights only: 0.5 * (1 + 4) = 2.5
  const ModelParams big_intercept({1.0, 2.0, 50.0});
  const auto reg = config(0, 0, 0.5);
  EXPECT_NEAR(proxy_objective(big_intercept, ds, reg, penalty_for(ds, reg)), -log_likelihood(big_intercept, ds) + 2.5,
              1e-9);
  const auto g = proxy_gradient(ModelParams({0.0, 0.0, 5.0}), ds, reg, penalty_for(ds, reg));
  const auto g0 = proxy_gradient(ModelParams({0.0, 0.0, 5.0}), ds, config(0, 0, 0), penalty_for(ds, config(0, 0, 0)));
  EXPECT_EQ(g.back(), g0.back());
}

TEST(Proxy, GradientMatchesFiniteDifference) {
  std::mt19937_64 gen(21);
  std::uniform_real_distribution<double> w(0.0, 5.0);
  for (int t = 0; t < 20; ++t) {
    const auto ds = oracle::random_dataset(gen, 80, 3);
    const auto cfg = config(w(gen), w(gen), w(gen));
    const auto spec = penalty_for(ds, cfg);
    const ModelParams theta(random_vec(gen, 5, 0.7));
    const auto g = proxy_gradient(theta, ds, cfg, spec);
    const auto fd = oracle::finite_difference(
        [&](const Vector& x) { return proxy_objective(ModelParams(x), ds, cfg, spec); }, theta.theta);
    for (std::size_t j = 0; j < g.size(); ++j) EXPECT_NEAR(g[j], fd[j], 1e-6 * std::max(1.0, std::abs(fd[j]))) << t;
  }
}

TEST(Proxy, MidpointConvexity) {
  std::mt19937_64 gen(22);
  std::uniform_real_distribution<double> w(0.0, 10.0);
  for (auto kind : {PenaltyKind::AVD, PenaltyKind::SD}) {
    for (int t = 0; t < 100; ++t) {
      const auto ds = oracle::random_dataset(gen, 40, 2);
      const auto cfg = config(w(gen), w(gen), w(gen), kind);
      const auto spec = penalty_for(ds, cfg);
      const auto a = random_vec(gen, 4, 3.0), b = random_vec(gen, 4, 3.0);
      Vector m(4);
      for (std::size_t j = 0; j < 4; ++j) m[j] = 0.5 * (a[j] + b[j]);
      const double fa = proxy_objective(ModelParams(a), ds, cfg, spec);
      const double fb = proxy_objective(ModelParams(b), ds, cfg, spec);
      const double fm = proxy_objective(ModelParams(m), ds, cfg, spec);
      EXPECT_LE(fm, 0.5 * (fa + fb) + 1e-10 * std::max(1.0, std::abs(fa + fb)));
    }
  }
}

TEST(Fit, SeparableDataIsFitExactly) {
  const Dataset ds({{{-2.0}, 0, 0}, {{-1.0}, 1, 0}, {{1.0}, 0, 1}, {{2.0}, 1, 1}}, 1);
  const auto res = fit(ds, config(0, 0, 1e-3));
  EXPECT_EQ(evaluate(res.params, ds).accuracy, 1.0);
  EXPECT_TRUE(res.converged);
}

TEST(Fit, StartingAtOptimumStopsImmediately) {
  std::mt19937_64 gen(23);
  const auto ds = oracle::random_dataset(gen, 300, 3);
  const auto cfg = config(2, 3, 1);
  const auto first = fit(ds, cfg);
  ASSERT_TRUE(first.converged);
  const auto again = fit(ds, cfg, first.params);
  EXPECT_LE(again.iterations, 2u);
  EXPECT_NEAR(again.final_proxy_value, first.final_proxy_value, 1e-9 * std::abs(first.final_proxy_value));
}

TEST(Fit, DeterministicAndMonotone) {
  std::mt19937_64 gen(24);
  for (auto kind : {PenaltyKind::AVD, PenaltyKind::SD}) {
    const auto ds = oracle::random_dataset(gen, 500, 4);
    const auto cfg = config(20, 5, 0.5, kind);
    const auto a = fit(ds, cfg);
    const auto b = fit(ds, cfg);
    EXPECT_EQ(a.params.theta, b.params.theta);
    EXPECT_EQ(a.trace, b.trace);
    ASSERT_EQ(a.trace.size(), a.iterations + 1);
    for (std::size_t i = 1; i < a.trace.size(); ++i) EXPECT_LT(a.trace[i], a.trace[i - 1]);
    EXPECT_EQ(a.trace.back(), a.final_proxy_value);
  }
}

TEST(Fit, UnpenalizedMatchesNewtonOracle) {
  std::mt19937_64 gen(25);
  for (int t = 0; t < 10; ++t) {
    const auto ds = oracle::random_dataset(gen, 400, 4);
    const double q = 0.1 * (t + 1);
    const auto res = fit(ds, config(0, 0, q));
    const auto [theta, f_star] = oracle::newton_logistic(ds, q);
    EXPECT_LT(res.final_proxy_value - f_star, 1e-6 * std::max(1.0, std::abs(f_star)));
    for (std::size_t j = 0; j < theta.size(); ++j) EXPECT_NEAR(res.params.theta[j], theta[j], 1e-3);
  }
}

TEST(Fit, Errors) {
  const Dataset one_label({{{1.0}, 0, 1}, {{2.0}, 1, 1}}, 1);
  EXPECT_THROW(fit(one_label, config(0, 0, 1)), DataError);
  const Dataset ok({{{1.0}, 0, 1}, {{2.0}, 1, 0}}, 1);
  EXPECT_THROW(fit(ok, config(-1, 0, 1)), Error);
  EXPECT_THROW(fit(ok, config(0, 0, -1)), Error);
  EXPECT_THROW(fit(ok, config(0, 0, 1), ModelParams::zeros(3)), DimensionError);
  // a penalty weight on an empty cell
  EXPECT_THROW(fit(ok, config(1, 0, 1)), EmptyGroupError);
}

TEST(Predict, TieGoesToPositive) {
  EXPECT_EQ(predict(ModelParams({1.0, -1.0}), Vector{1.0}), 1);
  EXPECT_EQ(predict(ModelParams({1.0, -1.0}), Vector{0.999}), 0);
  EXPECT_EQ(predict(ModelParams({0.0, 0.0}), Vector{-5.0}), 1);
  EXPECT_EQ(predict(ModelParams({0.0, -1e-300}), Vector{7.0}), 0);
}

TEST(Fit, InterceptOnlyModelLearnsBaseRate) {
  // constant feature 0: only the intercept moves, to logit(3/4)
  const Dataset ds({{{0.0}, 0, 1}, {{0.0}, 1, 1}, {{0.0}, 0, 1}, {{0.0}, 1, 0}}, 1);
  const auto res = fit(ds, config(0, 0, 0));
  EXPECT_NEAR(res.params.intercept(), std::log(3.0), 1e-6);
  EXPECT_EQ(res.params.theta[0], 0.0);
}

TEST(Fit, StrongPenaltyOnDEpsilonLearnsFairRule) {
  const auto ds = sample_d_epsilon({0.1, 5000, 1});
  const auto res = fit(ds, config(600, 600, 5));
  // the penalty cancels the advantage of A and the rule becomes y = X2
  for (int a = 0; a < 2; ++a)
    for (int x2 = 0; x2 < 2; ++x2)
      EXPECT_EQ(predict(res.params, Vector{double(a), double(x2)}), x2) << a << x2;
  EXPECT_TRUE(res.converged);
}
