#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "shrimpmorph/data_io.hpp"
#include "shrimpmorph/pose_net.hpp"

namespace shrimpmorph {

enum class Optimizer { Sgd, Adam };

/// Constant: lr throughout. Cosine: lr * 0.5 * (1 + cos(pi * epoch / epochs)).
enum class LrSchedule { Constant, Cosine };

struct PoseTrainHyper {
  double lr = 0.05;
  int epochs = 10;
  int batch_size = 8;
  std::uint64_t seed = 0;
  Optimizer optimizer = Optimizer::Sgd;
  LrSchedule schedule = LrSchedule::Constant;
  /// Each epoch, every sample is translated by a random integer offset in
  /// [-shift_px, shift_px] per axis (kept inside the image). 0 disables it.
  /// Only the sample overload of train_pose can apply it.
  int shift_px = 0;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  /// Called after each epoch with (epoch, mean training loss).
  std::function<void(int, double)> on_epoch;
};

/// Recipe used for the desk-scale configuration: Adam with a cosine decay.
PoseTrainHyper desk_pose_hyper();

struct PoseTrainResult {
  PoseModel model;
  std::vector<double> loss_curve;  // per-epoch mean minibatch loss
};

/// The raster translated by (dx, dy) pixels with edge pixels replicated into
/// the uncovered border.
RgbdRaster shift_raster(const RgbdRaster& raster, int dx, int dy);

/// Patchified inputs and Gaussian targets for samples with a gt skeleton.
/// Throws MissingLabel for samples without one.
std::vector<PoseExample> make_pose_examples(const PoseModel& model,
                                            const std::vector<const SampleRecord*>& samples);

/// Fresh model for a variant with normalisation statistics of the given
/// training samples.
PoseModel prepare_pose_model(const PoseNetConfig& config, Variant variant,
                             const std::vector<const SampleRecord*>& train_samples);

/// Minibatch gradient descent on the heatmap MSE. Samples are shuffled each
/// epoch with the hyper seed. Throws EmptyCorpus for no samples,
/// VariantMismatch when a sample's gt variant differs from the model's.
PoseTrainResult train_pose(PoseModel model, const std::vector<const SampleRecord*>& samples,
                           const PoseTrainHyper& hyper);
PoseTrainResult train_pose(PoseModel model, const std::vector<PoseExample>& examples,
                           const PoseTrainHyper& hyper);

/// Keeps glibc from returning large training temporaries to the kernel
/// after every step (no-op elsewhere). Call once at program start.
void tune_allocator_for_training();

}  // namespace shrimpmorph
