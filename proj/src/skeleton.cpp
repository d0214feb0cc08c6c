#include "shrimpmorph/skeleton.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <set>
#include <sstream>

#include "shrimpmorph/errors.hpp"

namespace shrimpmorph {

std::string_view to_string(View view) {
  return view == View::Lateral ? "lateral" : "dorsal";
}

std::string_view to_string(RostrumState rostrum) {
  return rostrum == RostrumState::Intact ? "intact" : "broken";
}

std::string_view to_string(AxisClass axis) {
  switch (axis) {
    case AxisClass::Length: return "length";
    case AxisClass::Height: return "height";
    case AxisClass::Width: return "width";
  }
  return "?";
}

std::string_view to_string(Unit unit) {
  return unit == Unit::Pixels ? "px" : "cm";
}

View parse_view(std::string_view text) {
  if (text == "lateral") return View::Lateral;
  if (text == "dorsal") return View::Dorsal;
  throw ParseError("unknown view '" + std::string(text) + "'");
}

RostrumState parse_rostrum(std::string_view text) {
  if (text == "intact") return RostrumState::Intact;
  if (text == "broken") return RostrumState::Broken;
  throw ParseError("unknown rostrum state '" + std::string(text) + "'");
}

std::string variant_name(Variant variant) {
  return std::string(to_string(variant.view)) + "-" +
         std::to_string(keypoint_count(variant.rostrum));
}

Variant parse_variant_name(std::string_view name) {
  const auto dash = name.rfind('-');
  if (dash == std::string_view::npos) {
    throw ParseError("malformed variant name '" + std::string(name) + "'");
  }
  const auto count = name.substr(dash + 1);
  Variant v;
  v.view = parse_view(name.substr(0, dash));
  if (count == "23") {
    v.rostrum = RostrumState::Intact;
  } else if (count == "22") {
    v.rostrum = RostrumState::Broken;
  } else {
    throw ParseError("malformed variant name '" + std::string(name) + "'");
  }
  return v;
}

const Keypoint* VirtualSkeleton::find(int index) const {
  for (const auto& kp : keypoints) {
    if (kp.index == index) return &kp;
  }
  return nullptr;
}

bool MeasurementDefinition::measurable_in(View view) const {
  switch (axis) {
    case AxisClass::Length: return true;
    case AxisClass::Height: return view == View::Lateral;
    case AxisClass::Width: return view == View::Dorsal;
  }
  return false;
}

// Keypoints 1..9 run along the body axis (rostrum tip, back of head, six
// segment boundaries, tail tip); 10..23 are the seven transverse pairs, head
// pair first. Edit here if the endpoint convention changes.
const std::array<MeasurementDefinition, 23>& all_measurements() {
  static const std::array<MeasurementDefinition, 23> table = {{
      {"total", 1, 9, AxisClass::Length},
      {"abdomen", 2, 9, AxisClass::Length},
      {"l_head", 1, 2, AxisClass::Length},
      {"l_1seg", 2, 3, AxisClass::Length},
      {"l_2seg", 3, 4, AxisClass::Length},
      {"l_3seg", 4, 5, AxisClass::Length},
      {"l_4seg", 5, 6, AxisClass::Length},
      {"l_5seg", 6, 7, AxisClass::Length},
      {"l_6seg", 7, 8, AxisClass::Length},
      {"h_head", 10, 11, AxisClass::Height},
      {"h_1seg", 12, 13, AxisClass::Height},
      {"h_2seg", 14, 15, AxisClass::Height},
      {"h_3seg", 16, 17, AxisClass::Height},
      {"h_4seg", 18, 19, AxisClass::Height},
      {"h_5seg", 20, 21, AxisClass::Height},
      {"h_6seg", 22, 23, AxisClass::Height},
      {"w_head", 10, 11, AxisClass::Width},
      {"w_1seg", 12, 13, AxisClass::Width},
      {"w_2seg", 14, 15, AxisClass::Width},
      {"w_3seg", 16, 17, AxisClass::Width},
      {"w_4seg", 18, 19, AxisClass::Width},
      {"w_5seg", 20, 21, AxisClass::Width},
      {"w_6seg", 22, 23, AxisClass::Width},
  }};
  return table;
}

const std::vector<std::string>& variable_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> out;
    for (const auto& def : all_measurements()) out.emplace_back(def.name);
    return out;
  }();
  return names;
}

bool is_known_variable(std::string_view name) {
  const auto& table = all_measurements();
  return std::any_of(table.begin(), table.end(),
                     [&](const MeasurementDefinition& d) { return d.name == name; });
}

const MeasurementDefinition& measurement_definition(std::string_view name) {
  for (const auto& def : all_measurements()) {
    if (def.name == name) return def;
  }
  throw UnknownVariable("unknown morphological variable '" + std::string(name) + "'");
}

std::vector<MeasurementDefinition> measurement_table(View view, RostrumState rostrum) {
  std::vector<MeasurementDefinition> out;
  for (const auto& def : all_measurements()) {
    if (!def.measurable_in(view)) continue;
    if (rostrum == RostrumState::Broken && def.needs_rostrum()) continue;
    out.push_back(def);
  }
  return out;
}

std::string format_measurement_table() {
  std::ostringstream os;
  os << std::left << std::setw(10) << "variable" << std::setw(8) << "axis"
     << std::setw(10) << "endpoints" << "views\n";
  for (const auto& def : all_measurements()) {
    std::string views;
    if (def.measurable_in(View::Lateral)) views += "lateral";
    if (def.measurable_in(View::Dorsal)) views += views.empty() ? "dorsal" : ",dorsal";
    if (def.needs_rostrum()) views += " (intact rostrum only)";
    os << std::setw(10) << def.name << std::setw(8) << to_string(def.axis)
       << std::setw(10) << ("(" + std::to_string(def.first) + "," + std::to_string(def.second) + ")")
       << views << '\n';
  }
  return os.str();
}

void MeasurementSet::set(std::string_view name, double value) {
  if (!is_known_variable(name)) {
    throw UnknownVariable("unknown morphological variable '" + std::string(name) + "'");
  }
  if (!std::isfinite(value) || value < 0.0) {
    throw InvalidArgument("measurement '" + std::string(name) + "' must be finite and >= 0");
  }
  values_[std::string(name)] = value;
}

std::optional<double> MeasurementSet::get(std::string_view name) const {
  const auto it = values_.find(std::string(name));
  if (it == values_.end()) return std::nullopt;
  return it->second;
}

MeasurementSet extract_pixel_measurements(const VirtualSkeleton& skel) {
  MeasurementSet out(Unit::Pixels);
  for (const auto& def : measurement_table(skel.view, skel.rostrum)) {
    const Keypoint* a = skel.find(def.first);
    const Keypoint* b = skel.find(def.second);
    for (const auto& [kp, idx] : {std::pair{a, def.first}, std::pair{b, def.second}}) {
      if (kp == nullptr || !kp->visible) {
        throw MissingKeypoint("variable '" + std::string(def.name) + "' needs keypoint " +
                              std::to_string(idx));
      }
    }
    out.set(def.name, std::hypot(a->x - b->x, a->y - b->y));
  }
  return out;
}

std::vector<std::string> validate_skeleton(const VirtualSkeleton& skel) {
  // The count invariant (23 intact, 22 broken) follows from the per-index
  // checks below, so every violation can name the offending index.
  std::vector<std::string> violations;
  std::set<int> seen;
  std::set<int> reported;
  for (const auto& kp : skel.keypoints) {
    if (kp.index < 1 || kp.index > kMaxKeypoints) {
      violations.push_back("index " + std::to_string(kp.index) + " outside 1..23");
      continue;
    }
    if (!seen.insert(kp.index).second && reported.insert(kp.index).second) {
      violations.push_back("duplicate index " + std::to_string(kp.index));
    }
    if (kp.index == kRostrumTip && skel.rostrum == RostrumState::Broken) {
      violations.push_back("index 1 (rostrum tip) present on a broken-rostrum skeleton");
    }
    if (!std::isfinite(kp.x) || !std::isfinite(kp.y) || kp.x < 0.0 || kp.y < 0.0) {
      violations.push_back("index " + std::to_string(kp.index) +
                           " has non-finite or negative coordinates");
    }
  }
  for (int idx = first_keypoint_index(skel.rostrum); idx <= kMaxKeypoints; ++idx) {
    if (!seen.count(idx)) violations.push_back("missing index " + std::to_string(idx));
  }
  return violations;
}

}  // namespace shrimpmorph
