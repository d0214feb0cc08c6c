#pragma once

// Procedural shrimp-like RGB-D samples with exactly known skeletons, labels
// and centimetre ground truth.

#include <cstdint>
#include <vector>

#include "shrimpmorph/data_io.hpp"

namespace shrimpmorph {

enum class Background { Black, Textured };

struct Range {
  double min = 0.0;
  double max = 0.0;
};

struct LabelNoise {
  double view_flip_prob = 0.0097;
  double rostrum_flip_prob = 0.1246;
};

struct SynthParams {
  std::uint64_t seed = 0;
  int image_width = 128;
  int image_height = 96;
  double scale_cm_per_px = 0.12;
  Range body_length_range_cm{8.5, 10.5};
  Range curvature_range{0.0, 0.6};  // total bend of the spine, radians
  double rostrum_break_prob = 0.15;
  double view_mix = 2.0 / 3.0;  // probability of a lateral view
  LabelNoise label_noise;
  double keypoint_jitter_px = 0.0;
  Background background = Background::Black;
  std::uint64_t background_seed = 0;
  int samples_per_specimen = 12;
  std::vector<int> rotations{0, 90, 180, 270};

  /// Throws InvalidArgument when a field is out of its domain.
  void validate() const;
};

SampleRecord generate_sample(const SynthParams& params, std::uint64_t index);

/// Samples 0..n-1; "synth-000000", "synth-000001", ...
std::vector<SampleRecord> generate_corpus(const SynthParams& params, std::size_t n);

/// Depth of the empty capture plane in millimetres.
inline constexpr float kCameraDistanceMm = 300.0f;

}  // namespace shrimpmorph
