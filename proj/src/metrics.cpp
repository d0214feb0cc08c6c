#include "shrimpmorph/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "shrimpmorph/errors.hpp"

namespace shrimpmorph {

namespace {

void check_aligned(std::size_t a, std::size_t b) {
  if (a != b) throw InvalidArgument("prediction and ground-truth corpora differ in length");
}

// (keypoint index, distance) for every visible gt keypoint.
std::vector<std::pair<int, double>> indexed_epe(const VirtualSkeleton& pred, const VirtualSkeleton& gt) {
  if (variant_of(pred) != variant_of(gt)) {
    throw VariantMismatch("prediction is " + variant_name(variant_of(pred)) + ", ground truth is " +
                          variant_name(variant_of(gt)));
  }
  std::vector<std::pair<int, double>> out;
  for (const auto& g : gt.keypoints) {
    if (!g.visible) continue;
    const Keypoint* p = pred.find(g.index);
    if (!p) throw VariantMismatch("prediction lacks keypoint " + std::to_string(g.index));
    out.emplace_back(g.index, std::hypot(p->x - g.x, p->y - g.y));
  }
  return out;
}

}  // namespace

std::vector<double> epe(const VirtualSkeleton& pred, const VirtualSkeleton& gt) {
  std::vector<double> out;
  for (const auto& [index, d] : indexed_epe(pred, gt)) out.push_back(d);
  return out;
}

std::vector<KeypointErrorRow> keypoint_error_rows(const std::vector<VirtualSkeleton>& preds,
                                                  const std::vector<VirtualSkeleton>& gts,
                                                  const std::vector<double>& normalizers) {
  check_aligned(preds.size(), gts.size());
  check_aligned(preds.size(), normalizers.size());
  std::map<int, std::vector<std::pair<double, double>>> per_kp;  // (epe, normalizer)
  for (std::size_t i = 0; i < preds.size(); ++i) {
    if (!(normalizers[i] > 0.0)) throw InvalidArgument("MAPE normalizer must be > 0");
    for (const auto& [index, d] : indexed_epe(preds[i], gts[i])) per_kp[index].emplace_back(d, normalizers[i]);
  }
  std::vector<KeypointErrorRow> rows;
  for (const auto& [index, values] : per_kp) {
    KeypointErrorRow r;
    r.keypoint_index = index;
    r.n = values.size();
    const auto n = static_cast<double>(r.n);
    double sq = 0.0, pct = 0.0;
    for (const auto& [d, norm] : values) {
      r.epe_mean += d / n;
      sq += d * d;
      pct += d / norm;
    }
    double var = 0.0;
    for (const auto& [d, norm] : values) var += (d - r.epe_mean) * (d - r.epe_mean);
    r.epe_std = std::sqrt(var / n);
    r.rmse = std::sqrt(sq / n);
    r.mape_pct = 100.0 * pct / n;
    rows.push_back(r);
  }
  return rows;
}

std::map<int, double> rmse(const std::vector<VirtualSkeleton>& preds,
                           const std::vector<VirtualSkeleton>& gts) {
  std::map<int, double> out;
  for (const auto& row : keypoint_error_rows(preds, gts, std::vector<double>(preds.size(), 1.0))) {
    out[row.keypoint_index] = row.rmse;
  }
  return out;
}

std::map<int, double> mape(const std::vector<VirtualSkeleton>& preds,
                           const std::vector<VirtualSkeleton>& gts,
                           const std::vector<double>& normalizers) {
  std::map<int, double> out;
  for (const auto& row : keypoint_error_rows(preds, gts, normalizers)) out[row.keypoint_index] = row.mape_pct;
  return out;
}

double image_diagonal(int width, int height) { return std::hypot(width, height); }

double pck(const std::vector<VirtualSkeleton>& preds, const std::vector<VirtualSkeleton>& gts,
           double threshold_px) {
  check_aligned(preds.size(), gts.size());
  std::size_t hit = 0, total = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    for (double d : epe(preds[i], gts[i])) {
      ++total;
      if (d <= threshold_px) ++hit;
    }
  }
  if (total == 0) throw EmptyCorpus("no visible keypoints to score");
  return 100.0 * static_cast<double>(hit) / static_cast<double>(total);
}

double OksParams::k_for(int index, const VirtualSkeleton& gt) const {
  double k = 0.0;
  if (per_keypoint_k.size() == static_cast<std::size_t>(kMaxKeypoints)) {
    k = per_keypoint_k.at(static_cast<std::size_t>(index - 1));
  } else if (per_keypoint_k.size() == static_cast<std::size_t>(keypoint_count(gt.rostrum))) {
    k = per_keypoint_k.at(static_cast<std::size_t>(index - first_keypoint_index(gt.rostrum)));
  } else {
    throw InvalidArgument("OKS constants must number 23 or match the variant's keypoint count");
  }
  if (!(k > 0.0)) throw InvalidArgument("OKS constants must be > 0");
  return k;
}

double oks(const VirtualSkeleton& pred, const VirtualSkeleton& gt, const OksParams& params) {
  double min_x = INFINITY, max_x = -INFINITY, min_y = INFINITY, max_y = -INFINITY;
  for (const auto& g : gt.keypoints) {
    if (!g.visible) continue;
    min_x = std::min(min_x, g.x);
    max_x = std::max(max_x, g.x);
    min_y = std::min(min_y, g.y);
    max_y = std::max(max_y, g.y);
  }
  const double area = (max_x - min_x) * (max_y - min_y);
  if (!(area > 0.0)) throw DegenerateArea("ground-truth keypoint bounding box has no area");
  const auto distances = indexed_epe(pred, gt);
  double sum = 0.0;
  for (const auto& [index, d] : distances) {
    const double k = params.k_for(index, gt);
    sum += std::exp(-d * d / (2.0 * area * k * k));
  }
  return sum / static_cast<double>(distances.size());
}

std::vector<double> oks_thresholds() {
  std::vector<double> t;
  for (int i = 0; i < 10; ++i) t.push_back((50.0 + 5.0 * i) / 100.0);
  return t;
}

double map_50_95(const std::vector<double>& oks_values) {
  if (oks_values.empty()) throw EmptyCorpus("mAP needs at least one image");
  const auto thresholds = oks_thresholds();
  double sum = 0.0;
  for (double t : thresholds) {
    const auto pass = std::count_if(oks_values.begin(), oks_values.end(), [t](double o) { return o >= t; });
    sum += static_cast<double>(pass) / static_cast<double>(oks_values.size());
  }
  return 100.0 * sum / static_cast<double>(thresholds.size());
}

double map_50_95(const std::vector<VirtualSkeleton>& preds, const std::vector<VirtualSkeleton>& gts,
                 const OksParams& params) {
  check_aligned(preds.size(), gts.size());
  std::vector<double> values;
  values.reserve(preds.size());
  for (std::size_t i = 0; i < preds.size(); ++i) values.push_back(oks(preds[i], gts[i], params));
  return map_50_95(values);
}

}  // namespace shrimpmorph
