#pragma once

// View and rostrum classifiers (engineered features + logistic regression)
// and the human/AI XOR fusion that raises correction alerts.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "shrimpmorph/data_io.hpp"
#include "shrimpmorph/raster.hpp"

namespace shrimpmorph {

enum class Source { Human, AI };
enum class AssessmentKind { Pose, Rostrum };

std::string_view to_string(Source source);
std::string_view to_string(AssessmentKind kind);
AssessmentKind parse_assessment_kind(std::string_view text);

/// Pose: true = Lateral. Rostrum: true = Intact.
struct Assessment {
  Source source = Source::Human;
  AssessmentKind kind = AssessmentKind::Pose;
  bool value = false;
  double confidence = 1.0;
};

Assessment human_assessment(AssessmentKind kind, bool value);

/// Label of a sample as the boolean an assessment of `kind` carries.
bool label_value(AssessmentKind kind, View view, RostrumState rostrum);

struct FusionDecision {
  AssessmentKind kind = AssessmentKind::Pose;
  bool alert = false;
  bool human_value = false;
  bool ai_value = false;
  friend bool operator==(const FusionDecision&, const FusionDecision&) = default;
};

/// alert = human XOR AI. Throws KindMismatch when kinds differ or the sources
/// are not (Human, AI).
FusionDecision fuse(const Assessment& human, const Assessment& ai);

enum class FeatureLayout : std::uint8_t {
  Raster = 1,  // extract_features() on an RGB-D raster
  Raw = 2,     // caller-supplied vectors of a fixed dimension
};

struct FeatureSpec {
  FeatureLayout layout = FeatureLayout::Raster;
  int raw_dimension = 0;  // Raw layout only

  int dimension() const;
  static FeatureSpec raw(int dimension) { return {FeatureLayout::Raw, dimension}; }
  friend bool operator==(const FeatureSpec&, const FeatureSpec&) = default;
};

// Raster feature layout, in order:
//   16x12 grayscale grid (mean luma / 255)
//   16 column-bin and 12 row-bin silhouette extents (fraction of the image)
//   bounding-box aspect ratio (short / long side; 0 without foreground)
//   foreground area fraction, breadth / length ratio
//   thickness mean, variance, max (mm), 8-bin thickness histogram
//   thickness / breadth ratio, 8-bin foreground luma histogram
// Thickness is background depth minus depth; depth 0 means no reading.
inline constexpr int kGridCols = 16;
inline constexpr int kGridRows = 12;
inline constexpr int kProfileCols = 16;
inline constexpr int kProfileRows = 12;
inline constexpr int kHistBins = 8;
inline constexpr int kRasterFeatureDim =
    kGridCols * kGridRows + kProfileCols + kProfileRows + 3 + 3 + kHistBins + 1 + kHistBins;
inline constexpr int kAspectFeature = kGridCols * kGridRows + kProfileCols + kProfileRows;

std::vector<double> extract_features(const RgbdRaster& raster);

struct BinaryClassifierModel {
  AssessmentKind kind = AssessmentKind::Pose;
  FeatureSpec feature_spec;
  std::vector<double> feature_mean;   // standardisation, applied before weights
  std::vector<double> feature_scale;
  std::vector<double> weights;
  double bias = 0.0;
  double threshold = 0.5;

  /// Throws InvalidArgument when vector lengths do not match the spec.
  void validate() const;
};

struct ClassifierHyper {
  double learning_rate = 0.5;
  int epochs = 40;
  int batch_size = 64;
  std::uint64_t seed = 0;
  double l2 = 1e-4;
};

struct ClassifierTraining {
  BinaryClassifierModel model;
  std::vector<double> loss_curve;  // full-batch loss after each epoch
};

/// Logistic regression by minibatch gradient descent. An epoch that would
/// raise the full-batch loss is undone and the step size halved, so the loss
/// curve never increases. Throws DegenerateData when one class is absent.
ClassifierTraining train_classifier_features(AssessmentKind kind, FeatureSpec spec,
                                             const std::vector<std::vector<double>>& features,
                                             const std::vector<bool>& labels,
                                             const ClassifierHyper& hyper);
ClassifierTraining train_classifier(AssessmentKind kind,
                                    const std::vector<std::pair<const RgbdRaster*, bool>>& labelled,
                                    const ClassifierHyper& hyper);

/// Sigmoid of the standardised score.
double predict_probability(const BinaryClassifierModel& model, const std::vector<double>& features);
Assessment predict_features(const BinaryClassifierModel& model, const std::vector<double>& features);
Assessment predict(const BinaryClassifierModel& model, const RgbdRaster& raster);

std::vector<std::uint8_t> encode_classifier(const BinaryClassifierModel& model);
BinaryClassifierModel decode_classifier(const std::vector<std::uint8_t>& bytes);
void save_classifier(const BinaryClassifierModel& model, const std::filesystem::path& path);
BinaryClassifierModel load_classifier(const std::filesystem::path& path);

struct JudgedSample {
  std::string sample_id;
  std::optional<bool> gt;
  std::optional<bool> human;
  std::optional<bool> ai;
};

struct DiscriminationReport {
  AssessmentKind kind = AssessmentKind::Pose;
  std::size_t samples = 0;
  std::size_t human_errors = 0;
  std::size_t ai_errors = 0;
  std::size_t alerts = 0;
  std::size_t hybrid_undetected = 0;
  double human_error_pct = 0.0;
  double ai_error_pct = 0.0;
  double hybrid_undetected_error_pct = 0.0;
  std::set<std::string> human_error_ids;
  std::set<std::string> ai_error_ids;
  std::set<std::string> hybrid_undetected_ids;
};

/// Hybrid undetected errors are samples where human and AI agree on a wrong
/// value, the only case the XOR alert cannot flag. Throws MissingLabel.
DiscriminationReport evaluate_discrimination(AssessmentKind kind,
                                             const std::vector<JudgedSample>& judged);
/// Uses the samples' gt and human labels and the model's predictions.
DiscriminationReport evaluate_discrimination(const std::vector<const SampleRecord*>& corpus,
                                             const BinaryClassifierModel& model);

}  // namespace shrimpmorph
