#include <gtest/gtest.h>

#include "oracles.hpp"

using namespace ticl;

namespace {

Dataset duplicated(const char* a, const char* b) {
  const std::vector<double> x{0.4, -1.2, 0.7, 2.0};
  return Dataset{4, {{"a", x, parse_clock(a)}, {"b", x, parse_clock(b)}}};
}

}  // namespace

TEST(ScalarRegressor, MidpointCollapse) {
  const Dataset ds = duplicated("06:00", "18:00");
  const ScalarRegressor r = fit_scalar(ds);
  EXPECT_NEAR(r.raw(ds.records[0].features), 720.0, 0.1);
  EXPECT_LE(circular_diff(predict(r, ds.records[0].features), parse_clock("12:00")), 1);
}

TEST(ScalarRegressor, LinearLabelsFitExactly) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> n01;
  // labels are an exact affine function of the features
  Dataset exact{3, {}};
  for (int i = 0; i < 60; ++i) {
    std::vector<double> x{n01(rng), n01(rng), n01(rng)};
    const int y = 300 + 7 * i;
    x[2] = (y - 300.0 - 2.0 * x[0] + 3.0 * x[1]) / 5.0;  // y = 300 + 2x0 - 3x1 + 5x2
    exact.records.push_back({"e", x, ClockTime(y)});
  }
  const ScalarRegressor r = fit_scalar(exact);
  double mse = 0.0;
  for (const auto& rec : exact.records) {
    const double e = r.raw(rec.features) - rec.time.minute_of_day();
    mse += e * e;
  }
  EXPECT_LT(mse / 60.0, 1e-6);
}

TEST(ScalarRegressor, MatchesGradientDescentOracle) {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> n01;
  Dataset ds{4, {}};
  for (int i = 0; i < 20; ++i) {
    std::vector<double> x{n01(rng), n01(rng), n01(rng), n01(rng)};
    ds.records.push_back({"g", x, ClockTime(static_cast<int>(rng() % 1440))});
  }
  // plain batch gradient descent on mean squared error, run to convergence
  std::vector<double> w(5, 0.0);
  for (int it = 0; it < 200000; ++it) {
    std::vector<double> g(5, 0.0);
    for (const auto& r : ds.records) {
      double y = w[4];
      for (int j = 0; j < 4; ++j) y += w[j] * r.features[j];
      const double e = y - r.time.minute_of_day();
      for (int j = 0; j < 4; ++j) g[j] += 2.0 * e * r.features[j] / 20.0;
      g[4] += 2.0 * e / 20.0;
    }
    for (int j = 0; j < 5; ++j) w[j] -= 0.05 * g[j];
  }
  const ScalarRegressor r = fit_scalar(ds);
  for (int j = 0; j < 4; ++j) EXPECT_NEAR(r.weights(j), w[j], 1e-4);
  EXPECT_NEAR(r.bias, w[4], 1e-4);
}

TEST(CyclicRegressor, WraparoundPairDecodesToMidnight) {
  const Dataset ds = duplicated("00:10", "23:50");
  const CyclicRegressor c = fit_cyclic(ds);
  const ClockTime t = predict(c, ds.records[0].features);
  EXPECT_LE(circular_diff(t, parse_clock("00:00")), 5);
  // vector average of the two unit targets points at angle 0
  const auto [c1, s1] = cyclic_encode(parse_clock("00:10"));
  const auto [c2, s2] = cyclic_encode(parse_clock("23:50"));
  const Eigen::Vector2d raw = c.raw(ds.records[0].features);
  EXPECT_NEAR(raw(0), (c1 + c2) / 2.0, 1e-6);
  EXPECT_NEAR(raw(1), (s1 + s2) / 2.0, 1e-6);

  // circular residual beats the scalar model on the same pair
  const ScalarRegressor s = fit_scalar(ds);
  double cyc = 0.0, sca = 0.0;
  for (const auto& r : ds.records) {
    cyc += circular_diff(predict(c, r.features), r.time);
    sca += circular_diff(predict(s, r.features), r.time);
  }
  EXPECT_LT(cyc, sca);
}

TEST(CyclicRegressor, SingleSampleReproducesTarget) {
  Dataset ds{3, {{"one", {1.0, 2.0, -1.0}, parse_clock("17:42")}}};
  EXPECT_EQ(format_clock(predict(fit_cyclic(ds), ds.records[0].features)), "17:42");
}

TEST(Predict, WrapAndDecode) {
  ScalarRegressor s;
  s.weights = Vector::Zero(2);
  s.bias = 1500.0;
  EXPECT_EQ(format_clock(predict(s, std::vector<double>{0.0, 0.0})), "01:00");
  s.bias = -60.0;
  EXPECT_EQ(format_clock(predict(s, std::vector<double>{0.0, 0.0})), "23:00");

  CyclicRegressor c;
  c.weights = Matrix::Zero(2, 2);
  c.bias = {0.0, 1.0};
  EXPECT_EQ(format_clock(predict(c, std::vector<double>{0.0, 0.0})), "06:00");
  c.bias = {0.0, 0.0};
  EXPECT_THROW(predict(c, std::vector<double>{0.0, 0.0}), ValidationError);
}
