#pragma once

// ViT heatmap keypoint network: patch embedding, transformer encoder,
// bilinear + ReLU decoder, 1x1 predictor. Double precision throughout, with
// hand-written backward passes.

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "shrimpmorph/raster.hpp"
#include "shrimpmorph/skeleton.hpp"

namespace shrimpmorph {

using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct PoseNetConfig {
  int input_height = 96;
  int input_width = 128;
  int in_channels = 4;
  int patch_size = 8;
  int embed_dim = 64;
  int num_layers = 4;
  int num_heads = 4;
  double mlp_ratio = 2.0;
  int num_keypoints = 23;
  int decoder_upscale = 2;      // must equal patch_size / 4
  double heatmap_sigma = 2.0;   // heatmap cells
  std::uint64_t seed = 0;

  /// Throws ShapeMismatch when the invariants do not hold.
  void validate() const;

  int grid_height() const { return input_height / patch_size; }
  int grid_width() const { return input_width / patch_size; }
  int tokens() const { return grid_height() * grid_width(); }
  int patch_dim() const { return in_channels * patch_size * patch_size; }
  int head_dim() const { return embed_dim / num_heads; }
  int mlp_dim() const;
  int heatmap_height() const { return grid_height() * decoder_upscale; }
  int heatmap_width() const { return grid_width() * decoder_upscale; }

  static PoseNetConfig desk();
  static PoseNetConfig tiny();   // 16x16, d=4, C=8, L=2, 2 heads, 3 keypoints
  static PoseNetConfig full();  // 192x256, d=16, C=1280, L=16; shape checks only

  friend bool operator==(const PoseNetConfig&, const PoseNetConfig&) = default;
};

/// Grid of token features, one row per token (row-major over the grid).
struct FeatureMap {
  int grid_height = 0;
  int grid_width = 0;
  Mat data;  // tokens x C
};

/// One map per keypoint; data(y * width + x, k).
struct HeatmapStack {
  int height = 0;
  int width = 0;
  int num_maps = 0;
  Mat data;

  double at(int k, int y, int x) const { return data(y * width + x, k); }
  double& at(int k, int y, int x) { return data(y * width + x, k); }
};

struct LayerParams {
  Mat ln_gamma, ln_beta;  // 1 x C
  Mat wq, wk, wv, wo;     // C x C
  Mat bq, bv, bo;         // 1 x C; no key bias, softmax ignores it
  Mat w1, b1;             // C x M, 1 x M
  Mat w2, b2;             // M x C, 1 x C
};

struct PoseParams {
  Mat patch_w;  // P x C
  Mat patch_b;  // 1 x C
  Mat pos;      // T x C
  std::vector<LayerParams> layers;
  Mat head_w;  // C x N_k
  Mat head_b;  // 1 x N_k

  /// Calls f(name, tensor) for every tensor in a fixed order.
  void visit(const std::function<void(const std::string&, Mat&)>& f);
  void visit(const std::function<void(const std::string&, const Mat&)>& f) const;

  /// Same shapes, all zeros.
  PoseParams zeros_like() const;
  std::size_t parameter_count() const;
};

struct TensorShape {
  std::string name;
  int rows = 0;
  int cols = 0;
  friend bool operator==(const TensorShape&, const TensorShape&) = default;
};

/// Parameter shapes implied by a config, without allocating them.
std::vector<TensorShape> parameter_shapes(const PoseNetConfig& config);

struct HeatmapShape {
  int height = 0;
  int width = 0;
  int num_maps = 0;
  friend bool operator==(const HeatmapShape&, const HeatmapShape&) = default;
};

/// Output shape of the forward pass, derived stage by stage.
HeatmapShape output_shape(const PoseNetConfig& config);

/// Per-channel input normalisation (R, G, B, depth) from training rasters.
struct NormStats {
  std::array<double, 4> mean{0.0, 0.0, 0.0, 0.0};
  std::array<double, 4> stddev{1.0, 1.0, 1.0, 1.0};
  friend bool operator==(const NormStats&, const NormStats&) = default;
};

NormStats compute_norm_stats(const std::vector<const RgbdRaster*>& rasters);

/// Normalised raster cut into non-overlapping patches: tokens x (4*d*d).
/// Patch vectors are ordered channel, row within patch, column within patch.
/// Throws ShapeMismatch when the raster size differs from the config.
Mat patchify(const RgbdRaster& raster, const NormStats& norm, const PoseNetConfig& config);

struct PoseModel {
  PoseNetConfig config;
  PoseParams params;
  NormStats norm;
  Variant variant{View::Lateral, RostrumState::Intact};
};

/// Seeded random initialisation (config.seed).
PoseModel init_pose_model(const PoseNetConfig& config, Variant variant);

/// Linear patch projection plus learned positional embedding.
FeatureMap patch_embed(const Mat& patches, const PoseParams& params, const PoseNetConfig& config);

/// F' = A + MLP(A) with A = F + Attn(LN(F)); no normalisation before the MLP.
FeatureMap vit_block(const FeatureMap& f, const LayerParams& layer, const PoseNetConfig& config);

/// Bilinear resampling with half-pixel centres and clamped borders.
/// Returns the (out_h*out_w) x (in_h*in_w) interpolation weights.
Mat bilinear_matrix(int in_h, int in_w, int out_h, int out_w);

/// Value of a grid (row-major, in_h x in_w) at fractional position (y, x)
/// in grid coordinates; clamps outside the grid.
double bilinear_sample(const Mat& grid, double y, double x);

/// Bilinear upsample by decoder_upscale, ReLU, 1x1 predictor.
HeatmapStack decode_heatmaps(const FeatureMap& f, const PoseParams& params,
                             const PoseNetConfig& config);

/// Full forward pass on pre-patchified input.
HeatmapStack forward(const PoseModel& model, const Mat& patches);
HeatmapStack forward(const PoseModel& model, const RgbdRaster& raster);

/// Per map: first row-major argmax, sub-cell refinement, scaled by 4.
/// Refinement first smooths the peak and its four neighbours with a Gaussian
/// (sigma 1 cell, radius up to 3, shrunk symmetrically to stay inside the
/// map), then fits a parabola to the log values along each axis when all
/// three are positive, and otherwise shifts a quarter cell toward the larger
/// neighbour. A peak on the map edge is refined on raw values.
VirtualSkeleton extract_keypoints(const HeatmapStack& h, Variant variant);

/// Unit-peak Gaussians of sigma = heatmap_sigma cells centred at
/// coordinate / 4. Hidden keypoints give all-zero maps. Throws OutOfBounds
/// for coordinates outside the input image, VariantMismatch when the
/// skeleton's keypoint count differs from the config.
HeatmapStack gaussian_target(const VirtualSkeleton& skel, const PoseNetConfig& config);

struct PoseExample {
  Mat patches;
  HeatmapStack target;
};

struct LossAndGrads {
  double loss = 0.0;
  PoseParams grads;
};

/// Mean squared error over all heatmap cells and samples, with exact
/// gradients. Throws InvalidArgument for an empty batch, ShapeMismatch when
/// shapes disagree with the config.
LossAndGrads loss_and_gradients(const PoseModel& model, const std::vector<const PoseExample*>& batch);
LossAndGrads loss_and_gradients(const PoseModel& model, const std::vector<PoseExample>& batch);

/// Mean squared error only.
double loss_only(const PoseModel& model, const std::vector<PoseExample>& batch);

// Checkpoint: versioned binary, config block, variant, normalisation stats,
// then named little-endian f64 tensors.
std::vector<std::uint8_t> encode_pose_model(const PoseModel& model);
PoseModel decode_pose_model(const std::vector<std::uint8_t>& bytes);
void save_pose_model(const PoseModel& model, const std::filesystem::path& path);
PoseModel load_pose_model(const std::filesystem::path& path);

/// One model per (view, rostrum) variant.
class PoseRegistry {
public:
  /// Throws VariantMismatch when the model's keypoint count does not fit.
  void add(PoseModel model);
  bool contains(Variant v) const { return models_.count(v) != 0; }
  /// Throws MissingVariant.
  const PoseModel& get(Variant v) const;
  const std::map<Variant, PoseModel>& models() const { return models_; }

private:
  std::map<Variant, PoseModel> models_;
};

/// Runs the model registered for (view, rostrum); throws MissingVariant.
VirtualSkeleton route_and_predict(const PoseRegistry& registry, const RgbdRaster& raster,
                                  View view, RostrumState rostrum);

}  // namespace shrimpmorph
