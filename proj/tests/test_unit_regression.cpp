#include <gtest/gtest.h>

#include <cmath>

#include "shrimpmorph/errors.hpp"
#include "shrimpmorph/rng.hpp"
#include "shrimpmorph/unit_regression.hpp"
#include "test_util.hpp"

using namespace shrimpmorph;

namespace {

std::vector<CalibrationPair> line(double alpha, double beta, int n, double noise = 0.0, std::uint64_t seed = 1) {
  Rng rng(seed);
  std::vector<CalibrationPair> out;
  for (int i = 0; i < n; ++i) {
    const double x = rng.uniform(20.0, 200.0);
    out.emplace_back(x, alpha * x + beta + (noise > 0 ? rng.normal(0.0, noise) : 0.0));
  }
  return out;
}

}  // namespace

TEST(Baseline, ScalesEveryValue) {
  MeasurementSet px;
  px.set("total", 200.0);
  const auto cm = baseline_convert(px, {0.05, "ruler"});
  EXPECT_EQ(cm.unit(), Unit::Centimeters);
  EXPECT_DOUBLE_EQ(*cm.get("total"), 10.0);
  EXPECT_TRUE(baseline_convert(MeasurementSet{}, {0.05, ""}).empty());
  px.set("abdomen", 12.345);
  const auto same = baseline_convert(px, {1.0, ""});
  EXPECT_EQ(same.values(), px.values());
  EXPECT_THROW(baseline_convert(cm, {0.05, ""}), UnitMismatch);
  EXPECT_THROW((ScaleFactor{0.0, ""}).validate(), InvalidArgument);
}

TEST(Svr, RecoversNoiselessLine) {
  const auto m = fit_svr("total", line(0.05, 0.3, 40), {0.0, 10.0});
  EXPECT_NEAR(m.alpha, 0.05, 1e-6);
  EXPECT_NEAR(m.beta, 0.3, 1e-6);
  EXPECT_EQ(m.n_train, 40u);
}

TEST(Svr, InTubeNoiseStaysInTube) {
  Rng rng(2);
  std::vector<CalibrationPair> pairs;
  for (int i = 0; i < 30; ++i) {
    const double x = 10.0 + 5.0 * i;
    pairs.emplace_back(x, 0.05 * x + 0.3 + (i % 2 ? 0.1 : -0.1));
  }
  const auto m = fit_svr("total", pairs, {0.1, 10.0});
  for (const auto& [x, y] : pairs) EXPECT_LE(std::abs(y - m.predict(x)), 0.1 + 1e-9);
}

TEST(Svr, NoisyFitIsGridOptimal) {
  const auto pairs = line(0.04, 0.5, 25, 0.2, 3);
  const SvrHyper h{0.05, 10.0};
  const auto m = fit_svr("l_head", pairs, h);
  const double best = svr_objective(m.alpha, m.beta, pairs, h);
  for (double a = m.alpha - 0.01; a <= m.alpha + 0.01; a += 0.0005) {
    for (double b = m.beta - 0.5; b <= m.beta + 0.5; b += 0.01) {
      EXPECT_GE(svr_objective(a, b, pairs, h), best - 1e-9);
    }
  }
}

TEST(Svr, DegenerateAndInvalid) {
  EXPECT_THROW(fit_svr("total", {{5.0, 1.0}, {5.0, 2.0}}), DegenerateData);
  EXPECT_THROW(fit_svr("total", line(1, 0, 5), {-1.0, 1.0}), InvalidArgument);
  EXPECT_THROW(fit_svr("total", line(1, 0, 5), {0.0, 0.0}), InvalidArgument);
}

TEST(Svr, ScaleEquivariance) {
  const auto pairs = line(0.05, 0.2, 30, 0.1, 4);
  const double k = 3.0;
  std::vector<CalibrationPair> scaled;
  for (const auto& [x, y] : pairs) scaled.emplace_back(k * x, y);
  const auto m = fit_svr("total", pairs, {0.05, 10.0});
  const auto ms = fit_svr("total", scaled, {0.05, 10.0 / (k * k)});
  for (const auto& [x, y] : pairs) EXPECT_NEAR(m.predict(x), ms.predict(k * x), 1e-9);
}

TEST(Ols, ClosedFormCases) {
  const auto a = fit_least_squares("total", {{1.0, 1.0}, {2.0, 2.0}});
  EXPECT_NEAR(a.alpha, 1.0, 1e-15);
  EXPECT_NEAR(a.beta, 0.0, 1e-15);
  const auto c = fit_least_squares("total", {{1.0, 4.0}, {2.0, 4.0}, {7.0, 4.0}});
  EXPECT_NEAR(c.alpha, 0.0, 1e-15);
  EXPECT_NEAR(c.beta, 4.0, 1e-12);
  EXPECT_THROW(fit_least_squares("total", {{1.0, 1.0}}), DegenerateData);
}

TEST(Ols, AgreesWithSvrOnExactLine) {
  const auto pairs = line(0.07, -0.2, 30);
  const auto s = fit_svr("total", pairs, {0.0, 1e3});
  const auto o = fit_least_squares("total", pairs);
  for (double x = 0; x <= 250; x += 25) EXPECT_NEAR(s.predict(x), o.predict(x), 1e-4);
}

TEST(Convert, AffineAndClamp) {
  RegressionSet models;
  models["total"] = {"total", 0.05, 0.3, {}, 10};
  models["abdomen"] = {"abdomen", 0.05, -10.0, {}, 10};
  MeasurementSet px;
  px.set("total", 100.0);
  px.set("abdomen", 10.0);
  const auto c = convert(models, px);
  EXPECT_DOUBLE_EQ(*c.cm.get("total"), 5.3);
  EXPECT_EQ(*c.cm.get("abdomen"), 0.0);
  EXPECT_EQ(c.clamped, std::vector<std::string>{"abdomen"});
  EXPECT_TRUE(convert(models, MeasurementSet{}).cm.empty());
  px.set("l_head", 1.0);
  EXPECT_THROW(convert(models, px), MissingModel);
}

TEST(Compare, IdenticalGivesZeroErrors) {
  RegressionSet models;
  models["total"] = {"total", 0.1, 0.0, {}, 1};
  MeasurementSet px, cm(Unit::Centimeters);
  px.set("total", 50.0);
  cm.set("total", 5.0);
  const auto r = compare_methods({{px, cm}}, models, {0.1, ""});
  ASSERT_EQ(r.variables.size(), 1u);
  EXPECT_NEAR(r.variables[0].baseline.mae, 0.0, 1e-12);
  EXPECT_NEAR(r.variables[0].regression.rmse, 0.0, 1e-12);
  MeasurementSet missing(Unit::Centimeters);
  EXPECT_THROW(compare_methods({{px, missing}}, models, {0.1, ""}), MissingVariable);
}

TEST(Compare, OffsetFavoursRegression) {
  std::vector<MeasurementPair> train, test;
  Rng rng(5);
  for (int i = 0; i < 80; ++i) {
    MeasurementSet px, cm(Unit::Centimeters);
    const double a = rng.uniform(50, 90), b = rng.uniform(8, 15);
    px.set("total", a);
    px.set("h_1seg", b);
    cm.set("total", 0.12 * a + 0.3 + rng.normal(0, 0.05));
    cm.set("h_1seg", 0.12 * b + 0.3 + rng.normal(0, 0.05));
    (i < 60 ? train : test).emplace_back(px, cm);
  }
  const auto models = fit_regression_set(train, {0.05, 10.0});
  const auto r = compare_methods(test, models, {0.12, ""});
  ASSERT_FALSE(r.groups.empty());
  const auto& general = r.groups.back();
  EXPECT_EQ(general.name, "General");
  EXPECT_LT(general.regression.mae, general.baseline.mae);
}

TEST(ErrorStats, HandValues) {
  const auto s = error_stats({1.0, 2.0, 4.0}, {1.0, 1.0, 2.0});
  EXPECT_EQ(s.n, 3u);
  EXPECT_DOUBLE_EQ(s.mae, 1.0);
  EXPECT_DOUBLE_EQ(s.rmse, std::sqrt(5.0 / 3.0));
  EXPECT_DOUBLE_EQ(s.mape, 100.0 * (0.0 + 1.0 + 1.0) / 3.0);
}

TEST(Serialization, RoundTripExact) {
  RegressionSet models;
  models["total"] = {"total", 0.1 + 0.2, 1.0 / 3.0, {0.05, 10.0}, 12};
  models["w_3seg"] = {"w_3seg", 1e-7, -2.5, {0.0, 1e3}, 2};
  EXPECT_EQ(parse_regression_set(format_regression_set(models)), models);
  const auto dir = testutil::temp_dir("regression");
  save_regression_set(models, dir / "r.txt");
  EXPECT_EQ(load_regression_set(dir / "r.txt"), models);
  std::filesystem::remove_all(dir);
  EXPECT_THROW(parse_regression_set("garbage\n"), Error);
}
