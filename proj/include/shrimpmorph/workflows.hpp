#pragma once

// Corpus-level training and evaluation used by the CLI, the Python module
// and the acceptance suite.

#include <vector>

#include "shrimpmorph/kv_config.hpp"
#include "shrimpmorph/pipeline.hpp"
#include "shrimpmorph/pose_train.hpp"
#include "shrimpmorph/report.hpp"
#include "shrimpmorph/synth.hpp"

namespace shrimpmorph {

/// synth.* keys override SynthParams fields; the seed comes from `seed`.
SynthParams synth_params_from_config(const KvConfig& config, std::uint64_t seed);
/// disc.* keys.
ClassifierHyper classifier_hyper_from_config(const KvConfig& config, std::uint64_t seed);
/// pose.* keys; the network config preset is pose.preset (desk | tiny).
PoseNetConfig pose_config_from_config(const KvConfig& config, std::uint64_t seed);
PoseTrainHyper pose_hyper_from_config(const KvConfig& config, std::uint64_t seed);
/// regression.* keys.
SvrHyper svr_hyper_from_config(const KvConfig& config);

struct Discriminators {
  BinaryClassifierModel view;
  BinaryClassifierModel rostrum;
};

/// Both classifiers on the ground-truth labels. Throws DegenerateData when a
/// class is missing.
Discriminators train_discriminators(const std::vector<SampleRecord>& corpus,
                                    const ClassifierHyper& hyper);

/// One model per variant that has at least `min_samples` labelled samples.
PoseRegistry train_pose_models(const std::vector<SampleRecord>& corpus, const PoseNetConfig& config,
                               const PoseTrainHyper& hyper, std::size_t min_samples = 1);

/// Pixel measurements of the gt skeletons against the gt centimetres.
std::vector<MeasurementPair> measurement_pairs(const std::vector<SampleRecord>& corpus);
RegressionSet fit_regression_from_corpus(const std::vector<SampleRecord>& corpus,
                                         const SvrHyper& hyper);

/// Discrimination with the corpus' human labels, pose accuracy with the
/// model of each sample's gt variant, conversion errors on the gt skeletons
/// and length errors of predicted skeletons by view.
EvaluationResults evaluate_corpus(const std::vector<SampleRecord>& corpus,
                                  const PipelineModels& models, const ScaleFactor& scale);

}  // namespace shrimpmorph
