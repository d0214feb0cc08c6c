#include <gtest/gtest.h>

#include <cmath>

#include "shrimpmorph/errors.hpp"
#include "shrimpmorph/metrics.hpp"
#include "test_util.hpp"

using namespace shrimpmorph;

namespace {

VirtualSkeleton jitter(const VirtualSkeleton& s, Rng& rng, double sd) {
  VirtualSkeleton out = s;
  for (auto& k : out.keypoints) {
    k.x += rng.normal(0.0, sd);
    k.y += rng.normal(0.0, sd);
  }
  return out;
}

VirtualSkeleton shifted(const VirtualSkeleton& s, double dx, double dy) {
  VirtualSkeleton out = s;
  for (auto& k : out.keypoints) k.x += dx, k.y += dy;
  return out;
}

}  // namespace

TEST(Epe, IdenticalAndThreeFourFive) {
  Rng rng(1);
  const auto gt = testutil::random_skeleton(rng, View::Lateral, RostrumState::Intact);
  for (double d : epe(gt, gt)) EXPECT_EQ(d, 0.0);
  auto pred = gt;
  pred.keypoints[3].x += 3.0;
  pred.keypoints[3].y += 4.0;
  const auto e = epe(pred, gt);
  EXPECT_DOUBLE_EQ(e[3], 5.0);
  EXPECT_EQ(e[2], 0.0);
}

TEST(Epe, VariantMismatch) {
  Rng rng(2);
  const auto a = testutil::random_skeleton(rng, View::Lateral, RostrumState::Intact);
  const auto b = testutil::random_skeleton(rng, View::Lateral, RostrumState::Broken);
  EXPECT_THROW(epe(a, b), VariantMismatch);
  EXPECT_THROW(pck({a}, {b}, 10.0), VariantMismatch);
}

TEST(Epe, HiddenGtKeypointsAreSkipped) {
  Rng rng(3);
  auto gt = testutil::random_skeleton(rng, View::Dorsal, RostrumState::Broken);
  gt.keypoints[0].visible = false;
  EXPECT_EQ(epe(gt, gt).size(), 21u);
}

TEST(Rows, MatchBruteForce) {
  Rng rng(4);
  std::vector<VirtualSkeleton> preds, gts;
  std::vector<double> norms;
  for (int i = 0; i < 7; ++i) {
    gts.push_back(testutil::random_skeleton(rng, View::Lateral, RostrumState::Intact));
    preds.push_back(jitter(gts.back(), rng, 2.0));
    norms.push_back(image_diagonal(128 + i, 96));
  }
  const auto rows = keypoint_error_rows(preds, gts, norms);
  ASSERT_EQ(rows.size(), 23u);
  for (int k = 0; k < 23; ++k) {
    double sum = 0, sq = 0, pct = 0;
    std::vector<double> d;
    for (int i = 0; i < 7; ++i) {
      const auto& p = preds[i].keypoints[k];
      const auto& g = gts[i].keypoints[k];
      d.push_back(std::sqrt((p.x - g.x) * (p.x - g.x) + (p.y - g.y) * (p.y - g.y)));
      sum += d.back();
      sq += d.back() * d.back();
      pct += d.back() / norms[i];
    }
    const double mean = sum / 7;
    double var = 0;
    for (double v : d) var += (v - mean) * (v - mean);
    EXPECT_EQ(rows[k].keypoint_index, k + 1);
    EXPECT_NEAR(rows[k].epe_mean, mean, 1e-9);
    EXPECT_NEAR(rows[k].epe_std, std::sqrt(var / 7), 1e-9);
    EXPECT_NEAR(rows[k].rmse, std::sqrt(sq / 7), 1e-9);
    EXPECT_NEAR(rows[k].mape_pct, 100 * pct / 7, 1e-9);
  }
}

TEST(Rmse, ConstantEpeFive) {
  Rng rng(5);
  std::vector<VirtualSkeleton> preds, gts;
  for (int i = 0; i < 3; ++i) {
    gts.push_back(testutil::random_skeleton(rng, View::Dorsal, RostrumState::Intact));
    preds.push_back(shifted(gts.back(), 3.0, -4.0));
  }
  for (const auto& [k, v] : rmse(preds, gts)) EXPECT_DOUBLE_EQ(v, 5.0);
  for (const auto& [k, v] : mape(gts, gts, {1.0, 1.0, 1.0})) EXPECT_EQ(v, 0.0);
}

TEST(Mape, TwoSampleHandCase) {
  Rng rng(6);
  std::vector<VirtualSkeleton> gts{testutil::random_skeleton(rng, View::Lateral, RostrumState::Broken),
                                   testutil::random_skeleton(rng, View::Lateral, RostrumState::Broken)};
  std::vector<VirtualSkeleton> preds{shifted(gts[0], 6.0, 8.0), shifted(gts[1], 0.0, 2.0)};
  // EPE 10 over diagonal 200, EPE 2 over diagonal 100: (5% + 2%) / 2
  for (const auto& [k, v] : mape(preds, gts, {200.0, 100.0})) EXPECT_NEAR(v, 3.5, 1e-12);
}

TEST(Pck, BoundaryAndCounting) {
  Rng rng(7);
  auto gt = testutil::random_skeleton(rng, View::Lateral, RostrumState::Intact);
  for (auto& k : gt.keypoints) k.x = std::round(k.x), k.y = std::round(k.y);
  EXPECT_EQ(pck({gt}, {gt}, 10.0), 100.0);
  EXPECT_EQ(pck({shifted(gt, 6.0, 8.0)}, {gt}, 10.0), 100.0);
  EXPECT_EQ(pck({shifted(gt, 6.0, 8.0)}, {gt}, 9.999), 0.0);
  std::vector<VirtualSkeleton> preds, gts;
  for (int i = 0; i < 5; ++i) {
    gts.push_back(testutil::random_skeleton(rng, View::Lateral, RostrumState::Intact));
    preds.push_back(jitter(gts.back(), rng, 6.0));
  }
  for (double t : {2.0, 5.0, 10.0}) {
    int hit = 0, n = 0;
    for (int i = 0; i < 5; ++i) {
      for (double d : epe(preds[i], gts[i])) hit += d <= t, ++n;
    }
    EXPECT_DOUBLE_EQ(pck(preds, gts, t), 100.0 * hit / n);
  }
  EXPECT_LE(pck(preds, gts, 2.0), pck(preds, gts, 5.0));
}

TEST(Oks, ClosedFormValues) {
  VirtualSkeleton gt;
  gt.view = View::Lateral;
  gt.rostrum = RostrumState::Intact;
  for (int i = 1; i <= 23; ++i) gt.keypoints.push_back({i, 10.0 + i, 20.0 + (i % 5), true});
  EXPECT_EQ(oks(gt, gt, OksParams::uniform()), 1.0);
  const double area = 22.0 * 4.0;
  const double k = 0.05;
  auto pred = gt;
  for (auto& kp : pred.keypoints) kp.x += std::sqrt(area) * k * std::sqrt(2.0);
  EXPECT_NEAR(oks(pred, gt, OksParams::uniform()), std::exp(-1.0), 1e-12);
  EXPECT_LT(oks(shifted(gt, 1e4, 0.0), gt, OksParams::uniform()), 1e-12);
}

TEST(Oks, DegenerateArea) {
  VirtualSkeleton gt;
  gt.rostrum = RostrumState::Intact;
  for (int i = 1; i <= 23; ++i) gt.keypoints.push_back({i, 5.0 + i, 7.0, true});
  EXPECT_THROW(oks(gt, gt, OksParams::uniform()), DegenerateArea);
}

TEST(Oks, TranslationAndScaleInvariant) {
  Rng rng(8);
  const auto gt = testutil::random_skeleton(rng, View::Dorsal, RostrumState::Intact);
  const auto pred = jitter(gt, rng, 3.0);
  const double base = oks(pred, gt, OksParams::uniform());
  EXPECT_NEAR(oks(shifted(pred, 17, -3), shifted(gt, 17, -3), OksParams::uniform()), base, 1e-12);
  auto scale = [](VirtualSkeleton s, double f) {
    for (auto& k : s.keypoints) k.x *= f, k.y *= f;
    return s;
  };
  EXPECT_NEAR(oks(scale(pred, 2.5), scale(gt, 2.5), OksParams::uniform()), base, 1e-12);
}

TEST(Oks, PerVariantConstants) {
  Rng rng(9);
  const auto gt = testutil::random_skeleton(rng, View::Lateral, RostrumState::Broken);
  const auto pred = jitter(gt, rng, 2.0);
  EXPECT_DOUBLE_EQ(oks(pred, gt, {std::vector<double>(22, 0.05)}), oks(pred, gt, OksParams::uniform()));
  EXPECT_THROW(oks(pred, gt, {std::vector<double>(5, 0.05)}), InvalidArgument);
}

TEST(Map, ThresholdCounting) {
  EXPECT_EQ(map_50_95({1.0, 1.0}), 100.0);
  EXPECT_EQ(map_50_95({0.7, 0.7, 0.7}), 50.0);
  EXPECT_THROW(map_50_95(std::vector<double>{}), EmptyCorpus);
  const std::vector<double> o{0.52, 0.81, 0.95};
  double sum = 0;
  for (int t = 50; t <= 95; t += 5) {
    int pass = 0;
    for (double v : o) pass += v >= t / 100.0;
    sum += pass / 3.0;
  }
  EXPECT_NEAR(map_50_95(o), 100.0 * sum / 10.0, 1e-12);
  const double p50 = 100.0, p95 = 100.0 / 3.0;
  EXPECT_LE(map_50_95(o), p50);
  EXPECT_GE(map_50_95(o), p95);
}
