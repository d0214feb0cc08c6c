#include "shrimpmorph/pipeline.hpp"

#include "shrimpmorph/errors.hpp"

namespace shrimpmorph {

using nlohmann::json;

std::string_view to_string(ResultStatus status) {
  switch (status) {
    case ResultStatus::Completed: return "completed";
    case ResultStatus::AwaitingReview: return "awaiting_review";
    case ResultStatus::Failed: return "failed";
  }
  return "failed";
}

ResultStatus parse_result_status(std::string_view text) {
  if (text == "completed") return ResultStatus::Completed;
  if (text == "awaiting_review") return ResultStatus::AwaitingReview;
  if (text == "failed") return ResultStatus::Failed;
  throw ParseError("unknown result status '" + std::string(text) + "'");
}

std::string alert_id_for(const std::string& sample_id, AssessmentKind kind) {
  return sample_id + "-" + std::string(to_string(kind));
}

std::string pose_model_file(Variant variant) { return "pose-" + variant_name(variant) + ".smpn"; }

namespace {

const Variant kVariants[] = {{View::Lateral, RostrumState::Intact},
                             {View::Lateral, RostrumState::Broken},
                             {View::Dorsal, RostrumState::Intact},
                             {View::Dorsal, RostrumState::Broken}};

template <class F>
auto load_or_throw(const std::filesystem::path& path, F&& load) {
  if (!std::filesystem::exists(path)) throw ModelLoadError("model file not found: " + path.string());
  try {
    return load(path);
  } catch (const Error& e) {
    throw ModelLoadError("cannot load " + path.string() + ": " + e.what());
  }
}

}  // namespace

PipelineModels load_models(const std::filesystem::path& dir) {
  PipelineModels m;
  m.view = load_or_throw(dir / kViewModelFile, load_classifier);
  m.rostrum = load_or_throw(dir / kRostrumModelFile, load_classifier);
  if (m.view.kind != AssessmentKind::Pose) {
    throw ModelLoadError((dir / kViewModelFile).string() + " is not a view classifier");
  }
  if (m.rostrum.kind != AssessmentKind::Rostrum) {
    throw ModelLoadError((dir / kRostrumModelFile).string() + " is not a rostrum classifier");
  }
  m.regression = load_or_throw(dir / kRegressionFile, load_regression_set);
  for (const auto& v : kVariants) {
    const auto path = dir / pose_model_file(v);
    if (!std::filesystem::exists(path)) continue;
    PoseModel model = load_or_throw(path, load_pose_model);
    if (!(model.variant == v)) throw ModelLoadError(path.string() + " holds a different variant");
    m.poses.add(std::move(model));
  }
  if (m.poses.models().empty()) {
    throw ModelLoadError("no pose model found: " + (dir / pose_model_file(kVariants[0])).string());
  }
  return m;
}

void save_models(const PipelineModels& models, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  save_classifier(models.view, dir / kViewModelFile);
  save_classifier(models.rostrum, dir / kRostrumModelFile);
  save_regression_set(models.regression, dir / kRegressionFile);
  for (const auto& [variant, model] : models.poses.models()) {
    save_pose_model(model, dir / pose_model_file(variant));
  }
}

PipelineResult run_pipeline(const SampleRecord& sample, const PipelineModels& models,
                            const LabelOverrides& overrides) {
  PipelineResult r;
  r.sample_id = sample.sample_id;
  try {
    const Assessment ai_view = predict(models.view, sample.raster);
    const Assessment ai_rostrum = predict(models.rostrum, sample.raster);
    r.fusion_pose = fuse(human_assessment(AssessmentKind::Pose, sample.human_view == View::Lateral),
                         ai_view);
    r.fusion_rostrum = fuse(
        human_assessment(AssessmentKind::Rostrum, sample.human_rostrum == RostrumState::Intact),
        ai_rostrum);
  } catch (const Error& e) {
    r.status = ResultStatus::Failed;
    r.failure_reason = e.what();
    return r;
  }
  const bool pose_open = r.fusion_pose.alert && !overrides.pose;
  const bool rostrum_open = r.fusion_rostrum.alert && !overrides.rostrum;
  if (pose_open || rostrum_open) {
    r.status = ResultStatus::AwaitingReview;
    return r;
  }
  const bool lateral = overrides.pose.value_or(r.fusion_pose.human_value);
  const bool intact = overrides.rostrum.value_or(r.fusion_rostrum.human_value);
  try {
    VirtualSkeleton skel =
        route_and_predict(models.poses, sample.raster, lateral ? View::Lateral : View::Dorsal,
                          intact ? RostrumState::Intact : RostrumState::Broken);
    MeasurementSet px = extract_pixel_measurements(skel);
    Conversion cm = convert(models.regression, px);
    r.skeleton = std::move(skel);
    r.measurements_px = std::move(px);
    r.measurements_cm = std::move(cm.cm);
    r.status = ResultStatus::Completed;
  } catch (const Error& e) {
    r.status = ResultStatus::Failed;
    r.failure_reason = e.what();
  }
  return r;
}

std::vector<AlertRecord> alerts_of(const PipelineResult& result) {
  std::vector<AlertRecord> out;
  for (const FusionDecision* d : {&result.fusion_pose, &result.fusion_rostrum}) {
    if (!d->alert) continue;
    AlertRecord a;
    a.alert_id = alert_id_for(result.sample_id, d->kind);
    a.sample_id = result.sample_id;
    a.kind = d->kind;
    a.human_value = d->human_value;
    a.ai_value = d->ai_value;
    out.push_back(std::move(a));
  }
  return out;
}

// ---------------------------------------------------------------- JSON

namespace {

template <class F>
auto decoding(const char* what, F&& f) {
  try {
    return f();
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed ") + what + ": " + e.what());
  }
}

}  // namespace

json to_json(const VirtualSkeleton& skel) {
  json kps = json::array();
  for (const auto& k : skel.keypoints) {
    kps.push_back({{"index", k.index}, {"x", k.x}, {"y", k.y}, {"visible", k.visible}});
  }
  return {{"view", to_string(skel.view)}, {"rostrum", to_string(skel.rostrum)}, {"keypoints", kps}};
}

VirtualSkeleton skeleton_from_json(const json& j) {
  return decoding("skeleton", [&] {
    VirtualSkeleton s;
    s.view = parse_view(j.at("view").get<std::string>());
    s.rostrum = parse_rostrum(j.at("rostrum").get<std::string>());
    for (const auto& k : j.at("keypoints")) {
      s.keypoints.push_back({k.at("index").get<int>(), k.at("x").get<double>(), k.at("y").get<double>(),
                             k.at("visible").get<bool>()});
    }
    return s;
  });
}

json to_json(const MeasurementSet& m) {
  return {{"unit", to_string(m.unit())}, {"values", m.values()}};
}

MeasurementSet measurements_from_json(const json& j) {
  return decoding("measurements", [&] {
    const auto unit = j.at("unit").get<std::string>();
    if (unit != "px" && unit != "cm") throw FormatError("unknown unit '" + unit + "'");
    MeasurementSet m(unit == "px" ? Unit::Pixels : Unit::Centimeters);
    for (const auto& [name, value] : j.at("values").items()) m.set(name, value.get<double>());
    return m;
  });
}

json to_json(const FusionDecision& d) {
  return {{"kind", to_string(d.kind)},
          {"alert", d.alert},
          {"human_value", d.human_value},
          {"ai_value", d.ai_value}};
}

FusionDecision fusion_from_json(const json& j) {
  return decoding("fusion decision", [&] {
    FusionDecision d;
    d.kind = parse_assessment_kind(j.at("kind").get<std::string>());
    d.alert = j.at("alert").get<bool>();
    d.human_value = j.at("human_value").get<bool>();
    d.ai_value = j.at("ai_value").get<bool>();
    return d;
  });
}

json to_json(const PipelineResult& r) {
  json j = {{"sample_id", r.sample_id},
            {"status", to_string(r.status)},
            {"fusion_pose", to_json(r.fusion_pose)},
            {"fusion_rostrum", to_json(r.fusion_rostrum)},
            {"skeleton", r.skeleton ? to_json(*r.skeleton) : json(nullptr)},
            {"measurements_px", r.measurements_px ? to_json(*r.measurements_px) : json(nullptr)},
            {"measurements_cm", r.measurements_cm ? to_json(*r.measurements_cm) : json(nullptr)}};
  if (r.status == ResultStatus::Failed) j["failure_reason"] = r.failure_reason;
  return j;
}

PipelineResult result_from_json(const json& j) {
  return decoding("pipeline result", [&] {
    PipelineResult r;
    r.sample_id = j.at("sample_id").get<std::string>();
    r.status = parse_result_status(j.at("status").get<std::string>());
    r.fusion_pose = fusion_from_json(j.at("fusion_pose"));
    r.fusion_rostrum = fusion_from_json(j.at("fusion_rostrum"));
    if (!j.at("skeleton").is_null()) r.skeleton = skeleton_from_json(j.at("skeleton"));
    if (!j.at("measurements_px").is_null()) r.measurements_px = measurements_from_json(j.at("measurements_px"));
    if (!j.at("measurements_cm").is_null()) r.measurements_cm = measurements_from_json(j.at("measurements_cm"));
    if (j.contains("failure_reason")) r.failure_reason = j.at("failure_reason").get<std::string>();
    return r;
  });
}

json to_json(const AlertRecord& a) {
  json j = {{"alert_id", a.alert_id},
            {"sample_id", a.sample_id},
            {"kind", to_string(a.kind)},
            {"human_value", a.human_value},
            {"ai_value", a.ai_value},
            {"status", a.open() ? "open" : "resolved"},
            {"resolution", nullptr}};
  if (a.resolution) {
    j["resolution"] = {{"resolved_value", a.resolution->resolved_value},
                       {"resolver", a.resolution->resolver},
                       {"timestamp", a.resolution->timestamp}};
  }
  return j;
}

AlertRecord alert_from_json(const json& j) {
  return decoding("alert", [&] {
    AlertRecord a;
    a.alert_id = j.at("alert_id").get<std::string>();
    a.sample_id = j.at("sample_id").get<std::string>();
    a.kind = parse_assessment_kind(j.at("kind").get<std::string>());
    a.human_value = j.at("human_value").get<bool>();
    a.ai_value = j.at("ai_value").get<bool>();
    if (j.contains("resolution") && !j.at("resolution").is_null()) {
      const auto& r = j.at("resolution");
      a.resolution = Resolution{r.at("resolved_value").get<bool>(), r.at("resolver").get<std::string>(),
                                r.at("timestamp").get<std::string>()};
    }
    return a;
  });
}

}  // namespace shrimpmorph
