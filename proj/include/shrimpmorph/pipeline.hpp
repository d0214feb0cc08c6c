#pragma once

// Per-sample orchestration: discriminators, XOR fusion gating, variant
// routing, pose estimation, measurement extraction and cm conversion.

#include <filesystem>
#include <optional>
#include <string>

#include <json.hpp>

#include "shrimpmorph/discriminator.hpp"
#include "shrimpmorph/pose_net.hpp"
#include "shrimpmorph/unit_regression.hpp"

namespace shrimpmorph {

enum class ResultStatus { Completed, AwaitingReview, Failed };

std::string_view to_string(ResultStatus status);
ResultStatus parse_result_status(std::string_view text);

struct PipelineResult {
  std::string sample_id;
  FusionDecision fusion_pose;
  FusionDecision fusion_rostrum;
  std::optional<VirtualSkeleton> skeleton;
  std::optional<MeasurementSet> measurements_px;
  std::optional<MeasurementSet> measurements_cm;
  ResultStatus status = ResultStatus::Failed;
  std::string failure_reason;  // Failed only

  friend bool operator==(const PipelineResult&, const PipelineResult&) = default;
};

struct Resolution {
  bool resolved_value = false;
  std::string resolver;
  std::string timestamp;
  friend bool operator==(const Resolution&, const Resolution&) = default;
};

struct AlertRecord {
  std::string alert_id;
  std::string sample_id;
  AssessmentKind kind = AssessmentKind::Pose;
  bool human_value = false;
  bool ai_value = false;
  std::optional<Resolution> resolution;

  bool open() const { return !resolution.has_value(); }
  friend bool operator==(const AlertRecord&, const AlertRecord&) = default;
};

/// "<sample_id>-pose" or "<sample_id>-rostrum".
std::string alert_id_for(const std::string& sample_id, AssessmentKind kind);

struct PipelineModels {
  BinaryClassifierModel view;
  BinaryClassifierModel rostrum;
  PoseRegistry poses;
  RegressionSet regression;
};

// Model directory layout.
inline constexpr const char* kViewModelFile = "view.smdc";
inline constexpr const char* kRostrumModelFile = "rostrum.smdc";
inline constexpr const char* kRegressionFile = "regression.txt";
/// pose-lateral-23.smpn etc.
std::string pose_model_file(Variant variant);

/// Loads both classifiers, the regression set and every pose model present
/// (at least one). Throws ModelLoadError naming the offending path.
PipelineModels load_models(const std::filesystem::path& dir);
void save_models(const PipelineModels& models, const std::filesystem::path& dir);

/// Labels that replace the human assessment after an alert was resolved.
struct LabelOverrides {
  std::optional<bool> pose;     // true = Lateral
  std::optional<bool> rostrum;  // true = Intact
};

/// Fusion runs on both kinds. A kind with an override counts as agreed on
/// the override. Any remaining alert gives AwaitingReview without a pose
/// run. Otherwise the agreed labels pick the pose model and measurements are
/// extracted and converted. Module errors give Failed with the message.
PipelineResult run_pipeline(const SampleRecord& sample, const PipelineModels& models,
                            const LabelOverrides& overrides = {});

/// Alerts raised by a result (open, unresolved).
std::vector<AlertRecord> alerts_of(const PipelineResult& result);

// JSON codecs shared by the event log and the HTTP API.
nlohmann::json to_json(const VirtualSkeleton& skel);
VirtualSkeleton skeleton_from_json(const nlohmann::json& j);
nlohmann::json to_json(const MeasurementSet& m);
MeasurementSet measurements_from_json(const nlohmann::json& j);
nlohmann::json to_json(const FusionDecision& d);
FusionDecision fusion_from_json(const nlohmann::json& j);
nlohmann::json to_json(const PipelineResult& r);
PipelineResult result_from_json(const nlohmann::json& j);
nlohmann::json to_json(const AlertRecord& a);
AlertRecord alert_from_json(const nlohmann::json& j);

}  // namespace shrimpmorph
