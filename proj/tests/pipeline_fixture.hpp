#pragma once

#include <vector>

#include "shrimpmorph/discriminator.hpp"
#include "shrimpmorph/pipeline.hpp"
#include "shrimpmorph/synth.hpp"
#include "shrimpmorph/workflows.hpp"

namespace testutil {

struct PipelineFixture {
  std::vector<shrimpmorph::SampleRecord> corpus;
  shrimpmorph::PipelineModels models;
};

/// Small corpus with cheap but complete models for every variant.
inline const PipelineFixture& pipeline_fixture() {
  static const PipelineFixture f = [] {
    using namespace shrimpmorph;
    PipelineFixture out;
    SynthParams p;
    p.seed = 11;
    p.rostrum_break_prob = 0.4;
    p.samples_per_specimen = 1;
    out.corpus = generate_corpus(p, 40);
    ClassifierHyper ch;
    ch.seed = 3;
    const auto disc = train_discriminators(out.corpus, ch);
    out.models.view = disc.view;
    out.models.rostrum = disc.rostrum;
    PoseNetConfig cfg = PoseNetConfig::desk();
    cfg.embed_dim = 16;
    cfg.num_heads = 2;
    cfg.num_layers = 1;
    PoseTrainHyper hyper;
    hyper.epochs = 1;
    hyper.optimizer = Optimizer::Adam;
    hyper.lr = 1e-3;
    out.models.poses = train_pose_models(out.corpus, cfg, hyper);
    out.models.regression = fit_regression_from_corpus(out.corpus, {});
    return out;
  }();
  return f;
}

/// The sample with its human label of `kind` set against the AI's answer.
inline shrimpmorph::SampleRecord with_disagreement(shrimpmorph::SampleRecord s,
                                                   const shrimpmorph::PipelineModels& models,
                                                   shrimpmorph::AssessmentKind kind) {
  using namespace shrimpmorph;
  if (kind == AssessmentKind::Pose) {
    const bool lateral = predict(models.view, s.raster).value;
    s.human_view = lateral ? View::Dorsal : View::Lateral;
  } else {
    const bool intact = predict(models.rostrum, s.raster).value;
    s.human_rostrum = intact ? RostrumState::Broken : RostrumState::Intact;
  }
  return s;
}

/// The sample with both human labels equal to the AI's answers.
inline shrimpmorph::SampleRecord with_agreement(shrimpmorph::SampleRecord s,
                                                const shrimpmorph::PipelineModels& models) {
  using namespace shrimpmorph;
  s.human_view = predict(models.view, s.raster).value ? View::Lateral : View::Dorsal;
  s.human_rostrum =
      predict(models.rostrum, s.raster).value ? RostrumState::Intact : RostrumState::Broken;
  return s;
}

}  // namespace testutil
