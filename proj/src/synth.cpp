#include "shrimpmorph/synth.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <optional>

#include "shrimpmorph/errors.hpp"
#include "shrimpmorph/rng.hpp"

namespace shrimpmorph {

namespace {

constexpr std::uint64_t kSpecimenStream = 0x5e5e5e5e;
constexpr std::uint64_t kLabelStream = 0x1abe1abe;
constexpr std::uint64_t kJitterStream = 0x7177e777;

struct Vec2 {
  double x = 0.0;
  double y = 0.0;
};

Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
Vec2 operator*(double k, Vec2 a) { return {k * a.x, k * a.y}; }

// Per-animal body plan, shared by all images of one specimen.
struct BodyPlan {
  double length_cm = 0.0;
  // Arc-length fractions: rostrum, carapace, six abdominal segments, tail.
  std::array<double, 9> fractions{};
  double height_cm = 0.0;  // maximum dorso-ventral height
  double width_cm = 0.0;   // maximum lateral width
  bool rostrum_broken = false;
};

BodyPlan draw_body_plan(const SynthParams& p, std::uint64_t specimen) {
  Rng rng(derive_seed(p.seed ^ kSpecimenStream, specimen));
  BodyPlan plan;
  plan.length_cm = rng.uniform(p.body_length_range_cm.min, p.body_length_range_cm.max);
  const std::array<double, 9> base = {0.13, 0.25, 0.085, 0.085, 0.085, 0.085, 0.085, 0.10, 0.095};
  double total = 0.0;
  for (std::size_t i = 0; i < base.size(); ++i) {
    plan.fractions[i] = base[i] * rng.uniform(0.9, 1.1);
    total += plan.fractions[i];
  }
  for (auto& f : plan.fractions) f /= total;
  plan.height_cm = plan.length_cm * rng.uniform(0.16, 0.20);
  plan.width_cm = plan.height_cm * rng.uniform(0.60, 0.75);
  plan.rostrum_broken = rng.bernoulli(p.rostrum_break_prob);
  return plan;
}

// Relative cross-section size along the body, u in [0, 1] from the carapace
// front to the tail tip.
double body_profile(double u) {
  const double front = std::sqrt(std::clamp(u / 0.05, 0.0, 1.0));
  const double back = std::sqrt(std::clamp((1.0 - u) / 0.03, 0.0, 1.0));
  return front * back * (1.0 - 0.55 * std::pow(u, 1.3));
}

class Spine {
public:
  Spine(double length_px, double bend_rad) : length_(length_px) {
    curvature_ = bend_rad / length_px;
  }

  double length() const { return length_; }

  double heading(double s) const { return curvature_ * (s - 0.5 * length_); }

  // Centred at the spine midpoint, heading +x there.
  Vec2 point(double s) const {
    const double a = s - 0.5 * length_;
    if (std::abs(curvature_) < 1e-12) return {a, 0.0};
    const double phi = curvature_ * a;
    return {std::sin(phi) / curvature_, (1.0 - std::cos(phi)) / curvature_};
  }

  // Closest spine point to q: arc length s and Euclidean distance. Returns
  // false when q lies more than half a pixel beyond either end.
  bool project(Vec2 q, double& s, double& dist) const {
    double a;
    if (std::abs(curvature_) < 1e-12) {
      a = q.x;
    } else {
      const double r = 1.0 / curvature_;
      const Vec2 v{q.x, q.y - r};
      a = (r > 0.0 ? std::atan2(v.x, -v.y) : std::atan2(-v.x, v.y)) / curvature_;
    }
    const double half = 0.5 * length_;
    const double clamped = std::clamp(a, -half, half);
    if (std::abs(a - clamped) > 0.5) return false;
    s = clamped + half;
    const Vec2 foot = point(s);
    dist = std::hypot(q.x - foot.x, q.y - foot.y);
    return true;
  }

  Vec2 normal(double s) const {
    const double phi = heading(s);
    return {-std::sin(phi), std::cos(phi)};
  }

private:
  double length_;
  double curvature_ = 0.0;
};

struct Placement {
  double cos_r = 1.0;
  double sin_r = 0.0;
  Vec2 offset;

  Vec2 apply(Vec2 p) const {
    return {cos_r * p.x - sin_r * p.y + offset.x, sin_r * p.x + cos_r * p.y + offset.y};
  }
  Vec2 rotate(Vec2 v) const { return {cos_r * v.x - sin_r * v.y, sin_r * v.x + cos_r * v.y}; }
};

std::uint8_t to_byte(double v) {
  return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
}

}  // namespace

void SynthParams::validate() const {
  auto prob = [](double p, const char* name) {
    if (!(p >= 0.0 && p <= 1.0)) throw InvalidArgument(std::string(name) + " must lie in [0,1]");
  };
  if (image_width < 16 || image_height < 16) throw InvalidArgument("image too small");
  if (!(scale_cm_per_px > 0.0) || !std::isfinite(scale_cm_per_px)) {
    throw InvalidArgument("scale_cm_per_px must be > 0");
  }
  if (!(body_length_range_cm.min > 0.0) ||
      body_length_range_cm.max < body_length_range_cm.min) {
    throw InvalidArgument("body_length_range_cm must be a nonempty positive range");
  }
  if (curvature_range.max < curvature_range.min || curvature_range.min < 0.0 ||
      curvature_range.max > std::numbers::pi) {
    throw InvalidArgument("curvature_range must be a nonempty range within [0, pi]");
  }
  prob(rostrum_break_prob, "rostrum_break_prob");
  prob(view_mix, "view_mix");
  prob(label_noise.view_flip_prob, "view_flip_prob");
  prob(label_noise.rostrum_flip_prob, "rostrum_flip_prob");
  if (!(keypoint_jitter_px >= 0.0)) throw InvalidArgument("keypoint_jitter_px must be >= 0");
  if (samples_per_specimen < 1) throw InvalidArgument("samples_per_specimen must be >= 1");
  if (rotations.empty()) throw InvalidArgument("rotations must not be empty");
  for (int r : rotations) {
    if (r != 0 && r != 90 && r != 180 && r != 270) {
      throw InvalidArgument("rotations must be drawn from {0, 90, 180, 270}");
    }
  }
}

SampleRecord generate_sample(const SynthParams& p, std::uint64_t index) {
  const std::uint64_t specimen = index / static_cast<std::uint64_t>(p.samples_per_specimen);
  const BodyPlan plan = draw_body_plan(p, specimen);
  Rng rng(derive_seed(p.seed, index));

  SampleRecord rec;
  char id[32];
  std::snprintf(id, sizeof id, "synth-%06llu", static_cast<unsigned long long>(index));
  rec.sample_id = id;
  std::snprintf(id, sizeof id, "specimen-%05llu", static_cast<unsigned long long>(specimen));
  rec.specimen_id = id;

  rec.gt_view = rng.bernoulli(p.view_mix) ? View::Lateral : View::Dorsal;
  rec.gt_rostrum = plan.rostrum_broken ? RostrumState::Broken : RostrumState::Intact;
  rec.rotation_deg = p.rotations[rng.below(p.rotations.size())];
  const double bend = rng.uniform(p.curvature_range.min, p.curvature_range.max) *
                      (rng.bernoulli(0.5) ? 1.0 : -1.0);
  const bool lateral = rec.gt_view == View::Lateral;

  const double scale = p.scale_cm_per_px;
  const Spine spine(plan.length_cm / scale, bend);
  const double length_px = spine.length();

  // Arc-length stations of keypoints 1..9 plus the rostrum base.
  std::array<double, 9> station{};
  station[0] = 0.0;
  double acc = plan.fractions[0] * length_px;
  const double rostrum_base = acc;
  for (int k = 1; k < 9; ++k) {
    acc += plan.fractions[static_cast<std::size_t>(k)] * length_px;
    station[static_cast<std::size_t>(k)] = acc;
  }
  // station[1] = back of head (keypoint 2), ..., station[8] = tail tip (keypoint 9).
  station[8] = length_px;

  const double silhouette_cm = lateral ? plan.height_cm : plan.width_cm;
  const double depth_cm = lateral ? plan.width_cm : plan.height_cm;
  auto body_u = [&](double s) { return (s - rostrum_base) / (length_px - rostrum_base); };
  auto half_px = [&](double s) {
    return 0.5 * silhouette_cm / scale * body_profile(std::clamp(body_u(s), 0.0, 1.0));
  };
  auto rostrum_half_px = [&](double s) { return 0.5 + 0.9 * s / rostrum_base; };
  const bool draw_rostrum = !plan.rostrum_broken;

  // Placement: rotate about the spine midpoint, then translate so the body
  // (with its outline) fits inside the image.
  const double angle = rec.rotation_deg * std::numbers::pi / 180.0;
  Placement place;
  place.cos_r = std::round(std::cos(angle));
  place.sin_r = std::round(std::sin(angle));

  constexpr int kSpineSamples = 64;
  std::vector<double> sample_s(kSpineSamples + 1);
  std::vector<Vec2> local(kSpineSamples + 1);
  for (int i = 0; i <= kSpineSamples; ++i) {
    sample_s[static_cast<std::size_t>(i)] = length_px * i / kSpineSamples;
    local[static_cast<std::size_t>(i)] = spine.point(sample_s[static_cast<std::size_t>(i)]);
  }
  double min_x = 1e300, max_x = -1e300, min_y = 1e300, max_y = -1e300;
  for (int i = 0; i <= kSpineSamples; ++i) {
    const double s = sample_s[static_cast<std::size_t>(i)];
    const double h = s < rostrum_base ? 1.5 : half_px(s);
    for (double side : {-1.0, 1.0}) {
      const Vec2 q = place.rotate(local[static_cast<std::size_t>(i)] + (side * h) * spine.normal(s));
      min_x = std::min(min_x, q.x);
      max_x = std::max(max_x, q.x);
      min_y = std::min(min_y, q.y);
      max_y = std::max(max_y, q.y);
    }
  }
  constexpr double kMargin = 2.0;
  auto pick_offset = [&](double lo, double hi, int extent) {
    const double free_lo = kMargin - lo;
    const double free_hi = (extent - 1 - kMargin) - hi;
    if (free_hi < free_lo) return 0.5 * (free_lo + free_hi);
    return rng.uniform(free_lo, free_hi);
  };
  place.offset.x = pick_offset(min_x, max_x, p.image_width);
  place.offset.y = pick_offset(min_y, max_y, p.image_height);

  // Ground-truth skeleton.
  VirtualSkeleton skel;
  skel.view = rec.gt_view;
  skel.rostrum = rec.gt_rostrum;
  for (int k = 0; k < 9; ++k) {
    if (k == 0 && plan.rostrum_broken) continue;
    const Vec2 q = place.apply(spine.point(station[static_cast<std::size_t>(k)]));
    skel.keypoints.push_back({k + 1, q.x, q.y, true});
  }
  for (int pair = 0; pair < 7; ++pair) {
    const double s = pair == 0 ? 0.5 * (rostrum_base + station[1])
                               : 0.5 * (station[static_cast<std::size_t>(pair)] +
                                        station[static_cast<std::size_t>(pair + 1)]);
    const Vec2 c = spine.point(s);
    const Vec2 n = spine.normal(s);
    const double h = half_px(s);
    const Vec2 a = place.apply(c + h * n);
    const Vec2 b = place.apply(c - h * n);
    skel.keypoints.push_back({10 + 2 * pair, a.x, a.y, true});
    skel.keypoints.push_back({11 + 2 * pair, b.x, b.y, true});
  }

  // Rendering.
  RgbdRaster raster(p.image_width, p.image_height);
  for (int y = 0; y < p.image_height; ++y) {
    for (int x = 0; x < p.image_width; ++x) {
      const auto o = raster.offset(x, y);
      double bg = 0.0;
      if (p.background == Background::Textured) {
        const double phase = static_cast<double>(p.background_seed % 1000) * 0.01;
        bg = 45.0 + 25.0 * std::sin(0.31 * x + phase) * std::cos(0.23 * y - phase) +
             10.0 * std::sin(0.07 * (x + y) + 3.0 * phase);
      }
      raster.rgb[3 * o] = to_byte(bg);
      raster.rgb[3 * o + 1] = to_byte(bg * 0.9);
      raster.rgb[3 * o + 2] = to_byte(bg * 0.8);
      raster.depth[o] = kCameraDistanceMm;
    }
  }

  const int x_lo = std::max(0, static_cast<int>(std::floor(min_x + place.offset.x)) - 2);
  const int x_hi = std::min(p.image_width - 1, static_cast<int>(std::ceil(max_x + place.offset.x)) + 2);
  const int y_lo = std::max(0, static_cast<int>(std::floor(min_y + place.offset.y)) - 2);
  const int y_hi = std::min(p.image_height - 1, static_cast<int>(std::ceil(max_y + place.offset.y)) + 2);

  struct Surface {
    std::array<double, 3> rgb;
    double thickness_mm;
  };
  // Appearance of the body at image point (px, py); nullopt for background.
  auto surface_at = [&](double px, double py) -> std::optional<Surface> {
    const Vec2 d{px - place.offset.x, py - place.offset.y};
    const Vec2 q{place.cos_r * d.x + place.sin_r * d.y, -place.sin_r * d.x + place.cos_r * d.y};
    double s = 0.0, dist = 0.0;
    if (!spine.project(q, s, dist)) return std::nullopt;
    if (s < rostrum_base) {
      if (!draw_rostrum || dist > rostrum_half_px(s)) return std::nullopt;
      return Surface{{235.0, 215.0, 200.0}, 0.6};
    }
    const double half = half_px(s);
    if (half <= 0.0 || dist > half) return std::nullopt;
    const double r = dist / half;
    const double bulge = std::sqrt(std::max(0.0, 1.0 - r * r));
    double shade = 0.72 + 0.28 * bulge;
    for (int k = 1; k < 8; ++k) {
      if (std::abs(s - station[static_cast<std::size_t>(k)]) < 0.9) shade *= 0.55;
    }
    if (!lateral && dist < 0.8) shade *= 0.7;  // dorsal midline
    const double profile = body_profile(std::clamp(body_u(s), 0.0, 1.0));
    return Surface{{205.0 * shade, 160.0 * shade, 140.0 * shade},
                   10.0 * depth_cm * profile * (0.5 + 0.5 * bulge)};
  };

  // Colour is supersampled; depth takes the pixel-centre sample only, like a
  // sensor that reports one range per pixel.
  constexpr int kSub = 4;
  for (int y = y_lo; y <= y_hi; ++y) {
    for (int x = x_lo; x <= x_hi; ++x) {
      const auto o = raster.offset(x, y);
      std::array<double, 3> sum{};
      int hits = 0;
      for (int sy = 0; sy < kSub; ++sy) {
        for (int sx = 0; sx < kSub; ++sx) {
          const auto surf = surface_at(x + (sx + 0.5) / kSub - 0.5, y + (sy + 0.5) / kSub - 0.5);
          if (!surf) continue;
          ++hits;
          for (int c = 0; c < 3; ++c) sum[static_cast<std::size_t>(c)] += surf->rgb[static_cast<std::size_t>(c)];
        }
      }
      if (hits > 0) {
        const double w = static_cast<double>(hits) / (kSub * kSub);
        for (int c = 0; c < 3; ++c) {
          const double bg = raster.rgb[3 * o + static_cast<std::size_t>(c)];
          raster.rgb[3 * o + static_cast<std::size_t>(c)] =
              to_byte(sum[static_cast<std::size_t>(c)] / hits * w + bg * (1.0 - w));
        }
      }
      if (const auto centre = surface_at(x, y)) {
        raster.depth[o] = kCameraDistanceMm - static_cast<float>(centre->thickness_mm);
      }
    }
  }
  rec.raster = std::move(raster);

  // Annotation jitter perturbs the reference skeleton, not the render.
  if (p.keypoint_jitter_px > 0.0) {
    Rng jitter(derive_seed(p.seed ^ kJitterStream, index));
    for (auto& kp : skel.keypoints) {
      kp.x = std::clamp(kp.x + jitter.normal(0.0, p.keypoint_jitter_px), 0.0, p.image_width - 1.0);
      kp.y = std::clamp(kp.y + jitter.normal(0.0, p.keypoint_jitter_px), 0.0, p.image_height - 1.0);
    }
  }

  const MeasurementSet px = extract_pixel_measurements(skel);
  MeasurementSet cm(Unit::Centimeters);
  for (const auto& [name, value] : px.values()) cm.set(name, value * scale);
  rec.gt_measurements_cm = std::move(cm);
  rec.gt_skeleton = std::move(skel);

  Rng labels(derive_seed(p.seed ^ kLabelStream, index));
  const bool flip_view = labels.bernoulli(p.label_noise.view_flip_prob);
  const bool flip_rostrum = labels.bernoulli(p.label_noise.rostrum_flip_prob);
  rec.human_view = flip_view ? (lateral ? View::Dorsal : View::Lateral) : rec.gt_view;
  rec.human_rostrum = flip_rostrum ? (plan.rostrum_broken ? RostrumState::Intact
                                                          : RostrumState::Broken)
                                   : rec.gt_rostrum;
  return rec;
}

std::vector<SampleRecord> generate_corpus(const SynthParams& params, std::size_t n) {
  params.validate();
  if (n < 1) throw InvalidArgument("corpus size must be >= 1");
  std::vector<SampleRecord> corpus;
  corpus.reserve(n);
  for (std::size_t i = 0; i < n; ++i) corpus.push_back(generate_sample(params, i));
  return corpus;
}

}  // namespace shrimpmorph
