#include "shrimpmorph/workflows.hpp"

#include "shrimpmorph/errors.hpp"
#include "shrimpmorph/rng.hpp"

namespace shrimpmorph {

SynthParams synth_params_from_config(const KvConfig& c, std::uint64_t seed) {
  SynthParams p;
  p.seed = seed;
  p.image_width = static_cast<int>(c.get_int("synth.image_width", p.image_width));
  p.image_height = static_cast<int>(c.get_int("synth.image_height", p.image_height));
  p.scale_cm_per_px = c.get_double("synth.scale_cm_per_px", p.scale_cm_per_px);
  p.body_length_range_cm.min = c.get_double("synth.body_length_min_cm", p.body_length_range_cm.min);
  p.body_length_range_cm.max = c.get_double("synth.body_length_max_cm", p.body_length_range_cm.max);
  p.curvature_range.min = c.get_double("synth.curvature_min", p.curvature_range.min);
  p.curvature_range.max = c.get_double("synth.curvature_max", p.curvature_range.max);
  p.rostrum_break_prob = c.get_double("synth.rostrum_break_prob", p.rostrum_break_prob);
  p.view_mix = c.get_double("synth.view_mix", p.view_mix);
  p.label_noise.view_flip_prob = c.get_double("synth.view_flip_prob", p.label_noise.view_flip_prob);
  p.label_noise.rostrum_flip_prob =
      c.get_double("synth.rostrum_flip_prob", p.label_noise.rostrum_flip_prob);
  p.keypoint_jitter_px = c.get_double("synth.keypoint_jitter_px", p.keypoint_jitter_px);
  p.samples_per_specimen =
      static_cast<int>(c.get_int("synth.samples_per_specimen", p.samples_per_specimen));
  const auto bg = c.get_string("synth.background", "black");
  if (bg == "black") {
    p.background = Background::Black;
  } else if (bg == "textured") {
    p.background = Background::Textured;
  } else {
    throw ParseError("synth.background must be black or textured");
  }
  p.background_seed = c.get_uint("synth.background_seed", p.background_seed);
  p.validate();
  return p;
}

ClassifierHyper classifier_hyper_from_config(const KvConfig& c, std::uint64_t seed) {
  ClassifierHyper h;
  h.seed = seed;
  h.learning_rate = c.get_double("disc.lr", h.learning_rate);
  h.epochs = static_cast<int>(c.get_int("disc.epochs", h.epochs));
  h.batch_size = static_cast<int>(c.get_int("disc.batch_size", h.batch_size));
  h.l2 = c.get_double("disc.l2", h.l2);
  return h;
}

PoseNetConfig pose_config_from_config(const KvConfig& c, std::uint64_t seed) {
  const auto preset = c.get_string("pose.preset", "desk");
  PoseNetConfig p;
  if (preset == "desk") {
    p = PoseNetConfig::desk();
  } else if (preset == "tiny") {
    p = PoseNetConfig::tiny();
  } else {
    throw ParseError("pose.preset must be desk or tiny");
  }
  p.seed = seed;
  p.input_height = static_cast<int>(c.get_int("pose.input_height", p.input_height));
  p.input_width = static_cast<int>(c.get_int("pose.input_width", p.input_width));
  p.patch_size = static_cast<int>(c.get_int("pose.patch_size", p.patch_size));
  p.embed_dim = static_cast<int>(c.get_int("pose.embed_dim", p.embed_dim));
  p.num_layers = static_cast<int>(c.get_int("pose.num_layers", p.num_layers));
  p.num_heads = static_cast<int>(c.get_int("pose.num_heads", p.num_heads));
  p.mlp_ratio = c.get_double("pose.mlp_ratio", p.mlp_ratio);
  p.decoder_upscale = p.patch_size / 4;
  p.heatmap_sigma = c.get_double("pose.heatmap_sigma", p.heatmap_sigma);
  return p;
}

PoseTrainHyper pose_hyper_from_config(const KvConfig& c, std::uint64_t seed) {
  PoseTrainHyper h = desk_pose_hyper();
  h.seed = seed;
  h.lr = c.get_double("pose.lr", h.lr);
  h.epochs = static_cast<int>(c.get_int("pose.epochs", h.epochs));
  h.batch_size = static_cast<int>(c.get_int("pose.batch_size", h.batch_size));
  h.shift_px = static_cast<int>(c.get_int("pose.shift_px", h.shift_px));
  const auto opt = c.get_string("pose.optimizer", h.optimizer == Optimizer::Adam ? "adam" : "sgd");
  if (opt == "sgd") {
    h.optimizer = Optimizer::Sgd;
  } else if (opt == "adam") {
    h.optimizer = Optimizer::Adam;
  } else {
    throw ParseError("pose.optimizer must be sgd or adam");
  }
  const auto sched =
      c.get_string("pose.schedule", h.schedule == LrSchedule::Cosine ? "cosine" : "constant");
  if (sched == "constant") {
    h.schedule = LrSchedule::Constant;
  } else if (sched == "cosine") {
    h.schedule = LrSchedule::Cosine;
  } else {
    throw ParseError("pose.schedule must be constant or cosine");
  }
  return h;
}

SvrHyper svr_hyper_from_config(const KvConfig& c) {
  SvrHyper h;
  h.epsilon = c.get_double("regression.epsilon", h.epsilon);
  h.c = c.get_double("regression.c", h.c);
  return h;
}

Discriminators train_discriminators(const std::vector<SampleRecord>& corpus,
                                    const ClassifierHyper& hyper) {
  std::vector<std::vector<double>> features;
  std::vector<bool> view_labels, rostrum_labels;
  features.reserve(corpus.size());
  for (const auto& s : corpus) {
    features.push_back(extract_features(s.raster));
    view_labels.push_back(label_value(AssessmentKind::Pose, s.gt_view, s.gt_rostrum));
    rostrum_labels.push_back(label_value(AssessmentKind::Rostrum, s.gt_view, s.gt_rostrum));
  }
  ClassifierHyper rostrum_hyper = hyper;
  rostrum_hyper.seed = derive_seed(hyper.seed, 1);
  return {train_classifier_features(AssessmentKind::Pose, {}, features, view_labels, hyper).model,
          train_classifier_features(AssessmentKind::Rostrum, {}, features, rostrum_labels,
                                    rostrum_hyper)
              .model};
}

PoseRegistry train_pose_models(const std::vector<SampleRecord>& corpus, const PoseNetConfig& config,
                               const PoseTrainHyper& hyper, std::size_t min_samples) {
  std::map<Variant, std::vector<const SampleRecord*>> by_variant;
  for (const auto& s : corpus) {
    if (s.gt_skeleton) by_variant[variant_of(*s.gt_skeleton)].push_back(&s);
  }
  PoseRegistry registry;
  for (const auto& [variant, samples] : by_variant) {
    if (samples.size() < std::max<std::size_t>(min_samples, 1)) continue;
    PoseNetConfig c = config;
    c.num_keypoints = keypoint_count(variant.rostrum);
    registry.add(train_pose(prepare_pose_model(c, variant, samples), samples, hyper).model);
  }
  if (registry.models().empty()) throw EmptyCorpus("no variant has enough labelled samples");
  return registry;
}

std::vector<MeasurementPair> measurement_pairs(const std::vector<SampleRecord>& corpus) {
  std::vector<MeasurementPair> out;
  for (const auto& s : corpus) {
    if (!s.gt_skeleton || !s.gt_measurements_cm) continue;
    out.emplace_back(extract_pixel_measurements(*s.gt_skeleton), *s.gt_measurements_cm);
  }
  return out;
}

RegressionSet fit_regression_from_corpus(const std::vector<SampleRecord>& corpus,
                                         const SvrHyper& hyper) {
  const auto pairs = measurement_pairs(corpus);
  if (pairs.empty()) throw EmptyCorpus("no samples with both a gt skeleton and gt centimetres");
  return fit_regression_set(pairs, hyper);
}

EvaluationResults evaluate_corpus(const std::vector<SampleRecord>& corpus,
                                  const PipelineModels& models, const ScaleFactor& scale) {
  EvaluationResults res;
  std::vector<const SampleRecord*> all;
  for (const auto& s : corpus) all.push_back(&s);
  res.discrimination.push_back(evaluate_discrimination(all, models.view));
  res.discrimination.push_back(evaluate_discrimination(all, models.rostrum));

  for (const auto& s : corpus) {
    if (!s.gt_skeleton || !models.poses.contains(variant_of(*s.gt_skeleton))) continue;
    const auto& gt = *s.gt_skeleton;
    PoseResult r;
    r.sample_id = s.sample_id;
    r.pred = route_and_predict(models.poses, s.raster, gt.view, gt.rostrum);
    r.gt = gt;
    r.normalizer = image_diagonal(s.raster.width, s.raster.height);
    if (s.gt_measurements_cm && !models.regression.empty()) {
      const Conversion cm = convert(models.regression, extract_pixel_measurements(r.pred));
      for (const auto& [name, value] : cm.cm.values()) {
        if (measurement_definition(name).axis != AxisClass::Length) continue;
        if (auto truth = s.gt_measurements_cm->get(name)) {
          res.lengths.push_back({gt.view, name, value, *truth});
        }
      }
    }
    res.pose.push_back(std::move(r));
  }

  const auto pairs = measurement_pairs(corpus);
  if (!pairs.empty() && !models.regression.empty()) {
    res.conversion = compare_methods(pairs, models.regression, scale);
  }
  return res;
}

}  // namespace shrimpmorph
