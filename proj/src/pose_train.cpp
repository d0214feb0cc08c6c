#include "shrimpmorph/pose_train.hpp"

#if defined(__GLIBC__)
#include <malloc.h>
#endif

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <numeric>

#include "shrimpmorph/errors.hpp"
#include "shrimpmorph/rng.hpp"

namespace shrimpmorph {

std::vector<PoseExample> make_pose_examples(const PoseModel& model,
                                            const std::vector<const SampleRecord*>& samples) {
  std::vector<PoseExample> out;
  out.reserve(samples.size());
  for (const SampleRecord* s : samples) {
    if (!s->gt_skeleton) throw MissingLabel("sample " + s->sample_id + " has no gt skeleton");
    if (variant_of(*s->gt_skeleton) != model.variant) {
      throw VariantMismatch("sample " + s->sample_id + " is " +
                            variant_name(variant_of(*s->gt_skeleton)) + ", model is " +
                            variant_name(model.variant));
    }
    out.push_back({patchify(s->raster, model.norm, model.config),
                   gaussian_target(*s->gt_skeleton, model.config)});
  }
  return out;
}

RgbdRaster shift_raster(const RgbdRaster& raster, int dx, int dy) {
  RgbdRaster out(raster.width, raster.height);
  for (int y = 0; y < raster.height; ++y) {
    const int sy = std::clamp(y - dy, 0, raster.height - 1);
    for (int x = 0; x < raster.width; ++x) {
      const int sx = std::clamp(x - dx, 0, raster.width - 1);
      const std::size_t to = out.offset(x, y), from = raster.offset(sx, sy);
      for (int c = 0; c < 3; ++c) out.rgb[3 * to + c] = raster.rgb[3 * from + c];
      out.depth[to] = raster.depth[from];
    }
  }
  return out;
}

namespace {

/// Integer shift in [-limit, limit] per axis that keeps every keypoint inside.
std::pair<int, int> draw_shift(Rng& rng, const VirtualSkeleton& skel, int width, int height,
                               int limit) {
  double min_x = width, max_x = 0, min_y = height, max_y = 0;
  for (const auto& k : skel.keypoints) {
    min_x = std::min(min_x, k.x);
    max_x = std::max(max_x, k.x);
    min_y = std::min(min_y, k.y);
    max_y = std::max(max_y, k.y);
  }
  auto pick = [&](double lo, double hi, int extent) {
    const int a = std::max(-limit, static_cast<int>(std::ceil(-lo)));
    const int b = std::min(limit, static_cast<int>(std::floor(extent - 1 - hi)));
    if (a >= b) return 0;
    return a + static_cast<int>(rng.below(static_cast<std::uint64_t>(b - a + 1)));
  };
  const int dx = pick(min_x, max_x, width);
  const int dy = pick(min_y, max_y, height);
  return {dx, dy};
}

}  // namespace

PoseModel prepare_pose_model(const PoseNetConfig& config, Variant variant,
                             const std::vector<const SampleRecord*>& train_samples) {
  PoseModel model = init_pose_model(config, variant);
  std::vector<const RgbdRaster*> rasters;
  rasters.reserve(train_samples.size());
  for (const SampleRecord* s : train_samples) rasters.push_back(&s->raster);
  model.norm = compute_norm_stats(rasters);
  return model;
}

namespace {

/// before_epoch may rewrite the examples in place.
PoseTrainResult train_impl(PoseModel model, const std::vector<PoseExample>& examples,
                           const PoseTrainHyper& hyper, const std::function<void()>& before_epoch) {
  if (examples.empty()) throw EmptyCorpus("pose training needs at least one sample");
  if (hyper.epochs < 0 || hyper.batch_size < 1 || !(hyper.lr >= 0.0)) {
    throw InvalidArgument("pose training needs epochs >= 0, batch_size >= 1, lr >= 0");
  }
  PoseTrainResult result;
  PoseParams m1, m2;
  if (hyper.optimizer == Optimizer::Adam) {
    m1 = model.params.zeros_like();
    m2 = model.params.zeros_like();
  }
  std::int64_t step = 0;
  std::vector<std::size_t> order(examples.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(derive_seed(hyper.seed, 0x7a41));

  for (int epoch = 0; epoch < hyper.epochs; ++epoch) {
    if (before_epoch) before_epoch();
    rng.shuffle(order.begin(), order.end());
    const double lr = hyper.schedule == LrSchedule::Cosine
                          ? hyper.lr * 0.5 * (1.0 + std::cos(std::numbers::pi * epoch / hyper.epochs))
                          : hyper.lr;
    double weighted = 0.0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(hyper.batch_size)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(hyper.batch_size));
      std::vector<const PoseExample*> batch;
      for (std::size_t i = start; i < end; ++i) batch.push_back(&examples[order[i]]);
      LossAndGrads lg = loss_and_gradients(model, batch);
      weighted += lg.loss * static_cast<double>(batch.size());
      ++step;

      if (hyper.optimizer == Optimizer::Sgd) {
        std::vector<Mat*> grads;
        lg.grads.visit([&](const std::string&, Mat& g) { grads.push_back(&g); });
        std::size_t i = 0;
        model.params.visit([&](const std::string&, Mat& p) { p -= lr * *grads[i++]; });
      } else {
        std::vector<Mat*> grads, first, second;
        lg.grads.visit([&](const std::string&, Mat& g) { grads.push_back(&g); });
        m1.visit([&](const std::string&, Mat& g) { first.push_back(&g); });
        m2.visit([&](const std::string&, Mat& g) { second.push_back(&g); });
        const double b1 = hyper.adam_beta1, b2 = hyper.adam_beta2;
        const double c1 = 1.0 - std::pow(b1, static_cast<double>(step));
        const double c2 = 1.0 - std::pow(b2, static_cast<double>(step));
        std::size_t i = 0;
        model.params.visit([&](const std::string&, Mat& p) {
          Mat& g = *grads[i];
          Mat& a = *first[i];
          Mat& b = *second[i];
          ++i;
          a = b1 * a + (1.0 - b1) * g;
          b = b2 * b + (1.0 - b2) * g.cwiseProduct(g);
          p.array() -= lr * (a.array() / c1) / ((b.array() / c2).sqrt() + hyper.adam_eps);
        });
      }
    }
    const double mean_loss = weighted / static_cast<double>(examples.size());
    result.loss_curve.push_back(mean_loss);
    if (hyper.on_epoch) hyper.on_epoch(epoch, mean_loss);
  }
  result.model = std::move(model);
  return result;
}

}  // namespace

PoseTrainResult train_pose(PoseModel model, const std::vector<PoseExample>& examples,
                           const PoseTrainHyper& hyper) {
  return train_impl(std::move(model), examples, hyper, nullptr);
}

PoseTrainResult train_pose(PoseModel model, const std::vector<const SampleRecord*>& samples,
                           const PoseTrainHyper& hyper) {
  if (samples.empty()) throw EmptyCorpus("pose training needs at least one sample");
  auto examples = make_pose_examples(model, samples);
  if (hyper.shift_px <= 0) return train_impl(std::move(model), examples, hyper, nullptr);
  Rng rng(derive_seed(hyper.seed, 0x5417));
  const NormStats norm = model.norm;
  const PoseNetConfig config = model.config;
  auto shift = [&] {
    for (std::size_t i = 0; i < samples.size(); ++i) {
      const SampleRecord& s = *samples[i];
      const auto [dx, dy] =
          draw_shift(rng, *s.gt_skeleton, s.raster.width, s.raster.height, hyper.shift_px);
      VirtualSkeleton skel = *s.gt_skeleton;
      for (auto& k : skel.keypoints) {
        k.x += dx;
        k.y += dy;
      }
      examples[i] = {patchify(shift_raster(s.raster, dx, dy), norm, config),
                     gaussian_target(skel, config)};
    }
  };
  return train_impl(std::move(model), examples, hyper, shift);
}

PoseTrainHyper desk_pose_hyper() {
  PoseTrainHyper h;
  h.optimizer = Optimizer::Adam;
  h.schedule = LrSchedule::Cosine;
  h.lr = 2e-3;
  h.epochs = 200;
  h.batch_size = 8;
  h.shift_px = 3;
  return h;
}

void tune_allocator_for_training() {
#if defined(__GLIBC__)
  mallopt(M_MMAP_THRESHOLD, 1 << 30);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);
#endif
}

}  // namespace shrimpmorph
