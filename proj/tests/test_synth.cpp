#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "fairpen/metrics.hpp"
#include "fairpen/synth.hpp"

using namespace fairpen;

namespace {

double corr(const std::vector<double>& a, const std::vector<double>& b) {
  const double n = static_cast<double>(a.size());
  double ma = 0, mb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= n;
  mb /= n;
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  return sab / std::sqrt(saa * sbb);
}

}  // namespace

TEST(DEpsilon, MarginalFrequencies) {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const auto ds = sample_d_epsilon({0.1, 5000, seed});
    double a_eq = 0, x2_eq = 0, y1 = 0;
    for (const auto& p : ds.points()) {
      a_eq += p.features[0] == p.label;
      x2_eq += p.features[1] == p.label;
      y1 += p.label;
      EXPECT_EQ(p.group, static_cast<int>(p.features[0]));
    }
    const double n = static_cast<double>(ds.size());
    EXPECT_GE(a_eq / n, 0.88);
    EXPECT_LE(a_eq / n, 0.92);
    EXPECT_GE(x2_eq / n, 0.78);
    EXPECT_LE(x2_eq / n, 0.82);
    EXPECT_GE(y1 / n, 0.48);
    EXPECT_LE(y1 / n, 0.52);
  }
}

TEST(DEpsilon, FeaturesIndependentGivenLabel) {
  const auto ds = sample_d_epsilon({0.1, 20000, 4});
  for (int y = 0; y < 2; ++y) {
    std::vector<double> a, x2;
    for (const auto& p : ds.points())
      if (p.label == y) {
        a.push_back(p.features[0]);
        x2.push_back(p.features[1]);
      }
    EXPECT_LT(std::abs(corr(a, x2)), 0.05) << y;
  }
}

TEST(DEpsilon, DeterministicPerSeed) {
  EXPECT_TRUE(sample_d_epsilon({0.1, 300, 7}) == sample_d_epsilon({0.1, 300, 7}));
  EXPECT_FALSE(sample_d_epsilon({0.1, 300, 7}) == sample_d_epsilon({0.1, 300, 8}));
  EXPECT_THROW(sample_d_epsilon({0.25, 10, 1}), Error);
  EXPECT_THROW(sample_d_epsilon({0.0, 10, 1}), Error);
  EXPECT_THROW(sample_d_epsilon({0.1, 0, 1}), Error);
}

TEST(DEpsilon, ReferenceLosses) {
  const auto r = reference_losses(0.1);
  EXPECT_EQ(r.bayes_loss, 0.1);
  EXPECT_EQ(r.fair_loss, 0.2);
  const auto ds = sample_d_epsilon({0.1, 50000, 5});
  const auto a_rule = evaluate(ModelParams({1.0, 0.0, -0.5}), ds);
  const auto x2_rule = evaluate(ModelParams({0.0, 1.0, -0.5}), ds);
  const double n = static_cast<double>(ds.size());
  EXPECT_NEAR(a_rule.zero_one_loss, r.bayes_loss, 4 * std::sqrt(0.1 * 0.9 / n));
  EXPECT_NEAR(x2_rule.zero_one_loss, r.fair_loss, 4 * std::sqrt(0.2 * 0.8 / n));
  EXPECT_EQ(a_rule.rates.d_fpr, 1.0);
  EXPECT_EQ(a_rule.rates.d_fnr, 1.0);
  // smallest cell holds about eps n / 2 = 2500 points
  EXPECT_LT(x2_rule.rates.d_fpr, 0.03);
  EXPECT_LT(x2_rule.rates.d_fnr, 0.03);
}

TEST(DEpsilon, CsvRoundTrip) {
  const auto ds = sample_d_epsilon({0.1, 100, 3});
  std::stringstream buf;
  write_d_epsilon_csv(buf, ds);
  std::string header;
  std::getline(buf, header);
  EXPECT_EQ(header, "A,X2,Y");
  buf.seekg(0);
  const auto back = read_csv(buf, d_epsilon_schema());
  EXPECT_TRUE(back.data == ds);
}
