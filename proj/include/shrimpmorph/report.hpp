#pragma once

// Evaluation report: plain-text tables plus a long-format CSV with one
// `table,row,column,value` line per cell.

#include <optional>
#include <string>
#include <vector>

#include "shrimpmorph/discriminator.hpp"
#include "shrimpmorph/metrics.hpp"
#include "shrimpmorph/unit_regression.hpp"

namespace shrimpmorph {

struct PoseResult {
  std::string sample_id;
  VirtualSkeleton pred;
  VirtualSkeleton gt;
  double normalizer = 1.0;  // MAPE denominator, usually the image diagonal
};

/// A length variable measured in one sample, converted to centimetres.
struct LengthObservation {
  View view = View::Lateral;
  std::string variable;
  double predicted_cm = 0.0;
  double truth_cm = 0.0;
};

struct EvaluationResults {
  std::vector<DiscriminationReport> discrimination;
  std::vector<PoseResult> pose;
  std::optional<ConversionReport> conversion;
  std::vector<LengthObservation> lengths;
  OksParams oks = OksParams::uniform();
  double pck_threshold_px = 10.0;
};

struct Report {
  std::string text;
  std::string csv;
};

// Table keys used in the CSV.
inline constexpr const char* kTableDiscrimination = "discrimination";
inline constexpr const char* kTablePose = "pose_by_variant";
inline constexpr const char* kTableKeypointsLateral = "keypoint_errors_lateral";
inline constexpr const char* kTableKeypointsDorsal = "keypoint_errors_dorsal";
inline constexpr const char* kTableConversion = "conversion_errors";
inline constexpr const char* kTableLengthView = "length_by_view";

/// Groups without data are omitted and named in a note. Output depends only
/// on the inputs. Throws whatever the underlying metrics throw.
Report report_tables(const EvaluationResults& results);

}  // namespace shrimpmorph
