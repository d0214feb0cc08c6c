#pragma once

// Keypoint accuracy metrics: EPE, RMSE, MAPE, PCK, OKS and single-instance
// mAP over OKS thresholds 0.50:0.05:0.95. Only keypoints visible in the
// ground truth are scored.

#include <cstddef>
#include <map>
#include <vector>

#include "shrimpmorph/skeleton.hpp"

namespace shrimpmorph {

/// Distance per visible gt keypoint, in gt order. Throws VariantMismatch when
/// the variants differ or the prediction lacks a keypoint.
std::vector<double> epe(const VirtualSkeleton& pred, const VirtualSkeleton& gt);

struct KeypointErrorRow {
  int keypoint_index = 0;
  std::size_t n = 0;
  double epe_mean = 0.0;
  double epe_std = 0.0;  // population
  double rmse = 0.0;
  double mape_pct = 0.0;
};

/// Per-keypoint aggregates over aligned corpora. normalizers[i] is the MAPE
/// denominator of sample i (see image_diagonal). Throws InvalidArgument for
/// misaligned inputs, VariantMismatch as epe().
std::vector<KeypointErrorRow> keypoint_error_rows(const std::vector<VirtualSkeleton>& preds,
                                                  const std::vector<VirtualSkeleton>& gts,
                                                  const std::vector<double>& normalizers);

/// sqrt(mean squared EPE) per keypoint index.
std::map<int, double> rmse(const std::vector<VirtualSkeleton>& preds,
                           const std::vector<VirtualSkeleton>& gts);

/// mean(EPE / normalizer) * 100 per keypoint index.
std::map<int, double> mape(const std::vector<VirtualSkeleton>& preds,
                           const std::vector<VirtualSkeleton>& gts,
                           const std::vector<double>& normalizers);

double image_diagonal(int width, int height);

/// Percentage of keypoints with EPE <= threshold_px.
double pck(const std::vector<VirtualSkeleton>& preds, const std::vector<VirtualSkeleton>& gts,
           double threshold_px);

struct OksParams {
  /// Either 23 constants indexed by keypoint index - 1, or one per keypoint
  /// of the variant in index order.
  std::vector<double> per_keypoint_k;

  static OksParams uniform(double k = 0.05) { return {std::vector<double>(kMaxKeypoints, k)}; }
  double k_for(int index, const VirtualSkeleton& gt) const;
};

/// Mean over visible gt keypoints of exp(-d^2 / (2 s^2 k^2)), s^2 = area of
/// the bounding box of the visible gt keypoints. Throws DegenerateArea when
/// that area is not positive, VariantMismatch as epe().
double oks(const VirtualSkeleton& pred, const VirtualSkeleton& gt, const OksParams& params);

/// OKS thresholds 0.50, 0.55, ..., 0.95.
std::vector<double> oks_thresholds();

/// Mean over thresholds of the fraction of images with OKS >= t, times 100.
/// Throws EmptyCorpus.
double map_50_95(const std::vector<double>& oks_values);
double map_50_95(const std::vector<VirtualSkeleton>& preds, const std::vector<VirtualSkeleton>& gts,
                 const OksParams& params);

}  // namespace shrimpmorph
