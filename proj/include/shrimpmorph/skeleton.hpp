#pragma once

// Lateral/dorsal virtual skeletons and the morphological variables measured on them.

#include <array>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace shrimpmorph {

enum class View { Lateral, Dorsal };
enum class RostrumState { Intact, Broken };
enum class AxisClass { Length, Height, Width };
enum class Unit { Pixels, Centimeters };

inline constexpr int kMaxKeypoints = 23;
inline constexpr int kRostrumTip = 1;
inline constexpr int kLongitudinalCount = 9;

std::string_view to_string(View view);
std::string_view to_string(RostrumState rostrum);
std::string_view to_string(AxisClass axis);
std::string_view to_string(Unit unit);
View parse_view(std::string_view text);
RostrumState parse_rostrum(std::string_view text);

/// Number of keypoints carried by a skeleton with the given rostrum state (23 or 22).
constexpr int keypoint_count(RostrumState rostrum) {
  return rostrum == RostrumState::Intact ? kMaxKeypoints : kMaxKeypoints - 1;
}

/// First keypoint index present for the rostrum state (1 intact, 2 broken).
constexpr int first_keypoint_index(RostrumState rostrum) {
  return rostrum == RostrumState::Intact ? 1 : 2;
}

struct Keypoint {
  int index = 0;  // 1..23
  double x = 0.0;
  double y = 0.0;
  bool visible = true;

  friend bool operator==(const Keypoint&, const Keypoint&) = default;
};

struct VirtualSkeleton {
  View view = View::Lateral;
  RostrumState rostrum = RostrumState::Intact;
  std::vector<Keypoint> keypoints;

  const Keypoint* find(int index) const;

  friend bool operator==(const VirtualSkeleton&, const VirtualSkeleton&) = default;
};

/// An unordered skeleton variant: which of the four pose networks applies.
struct Variant {
  View view = View::Lateral;
  RostrumState rostrum = RostrumState::Intact;

  friend auto operator<=>(const Variant&, const Variant&) = default;
};

/// "lateral-23", "dorsal-22", ...
std::string variant_name(Variant variant);
Variant parse_variant_name(std::string_view name);
inline Variant variant_of(const VirtualSkeleton& skel) { return {skel.view, skel.rostrum}; }

struct MeasurementDefinition {
  std::string_view name;
  int first = 0;
  int second = 0;
  AxisClass axis = AxisClass::Length;

  bool measurable_in(View view) const;
  bool needs_rostrum() const { return first == kRostrumTip || second == kRostrumTip; }
};

/// The full declarative table of the 23 variables, in canonical order.
const std::array<MeasurementDefinition, 23>& all_measurements();

/// Canonical variable names (same order as all_measurements()).
const std::vector<std::string>& variable_names();

bool is_known_variable(std::string_view name);
const MeasurementDefinition& measurement_definition(std::string_view name);

std::vector<MeasurementDefinition> measurement_table(View view, RostrumState rostrum);

/// Human-readable rendering of the measurement table for documentation.
std::string format_measurement_table();

class MeasurementSet {
public:
  explicit MeasurementSet(Unit unit = Unit::Pixels) : unit_(unit) {}

  Unit unit() const { return unit_; }
  void set_unit(Unit unit) { unit_ = unit; }

  // Throws UnknownVariable for names outside the taxonomy and InvalidArgument
  // for negative or non-finite values.
  void set(std::string_view name, double value);
  std::optional<double> get(std::string_view name) const;
  bool contains(std::string_view name) const { return values_.count(std::string(name)) > 0; }
  void erase(std::string_view name) { values_.erase(std::string(name)); }

  std::size_t size() const { return values_.size(); }
  bool empty() const { return values_.empty(); }
  const std::map<std::string, double>& values() const { return values_; }

  friend bool operator==(const MeasurementSet&, const MeasurementSet&) = default;

private:
  Unit unit_;
  std::map<std::string, double> values_;
};

/// Euclidean pixel distances for every variable applicable to the skeleton's variant.
MeasurementSet extract_pixel_measurements(const VirtualSkeleton& skel);

/// Empty iff the skeleton satisfies every structural invariant.
std::vector<std::string> validate_skeleton(const VirtualSkeleton& skel);

}  // namespace shrimpmorph
