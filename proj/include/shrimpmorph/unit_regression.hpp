#pragma once

// Pixel to centimetre conversion: a single scale factor, or one affine
// epsilon-insensitive SVR per variable (cm = alpha * px + beta).

#include <cstddef>
#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "shrimpmorph/skeleton.hpp"

namespace shrimpmorph {

struct ScaleFactor {
  double cm_per_px = 1.0;
  std::string provenance;

  /// Throws InvalidArgument unless cm_per_px is finite and > 0.
  void validate() const;
};

/// Every value times cm_per_px. Throws UnitMismatch unless m is in pixels.
MeasurementSet baseline_convert(const MeasurementSet& m, const ScaleFactor& s);

struct SvrHyper {
  double epsilon = 0.05;  // cm
  double c = 10.0;
  friend bool operator==(const SvrHyper&, const SvrHyper&) = default;
};

struct RegressionModel {
  std::string variable;
  double alpha = 0.0;  // cm per px
  double beta = 0.0;   // cm
  SvrHyper hyper;
  std::size_t n_train = 0;

  double predict(double px) const { return alpha * px + beta; }
  friend bool operator==(const RegressionModel&, const RegressionModel&) = default;
};

using RegressionSet = std::map<std::string, RegressionModel>;

/// (pixel value, centimetre value)
using CalibrationPair = std::pair<double, double>;

/// 0.5 * alpha^2 + c * sum(max(0, |y - alpha x - beta| - epsilon))
double svr_objective(double alpha, double beta, const std::vector<CalibrationPair>& pairs,
                     const SvrHyper& hyper);

/// Exact minimiser of the SVR objective. For fixed alpha the best beta is the
/// middle of the optimal interval, the two central values among the 2n
/// breakpoints y - alpha x +- epsilon. The profile over alpha is convex and
/// piecewise quadratic; a golden-section search brackets the minimiser and
/// the bracket is then resolved exactly over its kinks and the stationary
/// points of the pieces between them. Throws DegenerateData for fewer than
/// two distinct x values, InvalidArgument for bad hyperparameters or
/// non-finite data.
RegressionModel fit_svr(const std::string& variable, const std::vector<CalibrationPair>& pairs,
                        const SvrHyper& hyper = {});

/// Closed-form ordinary least squares. Throws DegenerateData.
RegressionModel fit_least_squares(const std::string& variable,
                                  const std::vector<CalibrationPair>& pairs);

/// (pixel measurements, ground-truth centimetres) of one sample.
using MeasurementPair = std::pair<MeasurementSet, MeasurementSet>;

/// One SVR per variable with at least two distinct pixel values in the data.
RegressionSet fit_regression_set(const std::vector<MeasurementPair>& training,
                                 const SvrHyper& hyper = {});

struct Conversion {
  MeasurementSet cm{Unit::Centimeters};
  std::vector<std::string> clamped;  // variables whose affine value was negative
};

/// alpha * value + beta per variable, negative results clamped to 0 and
/// reported. Throws MissingModel, UnitMismatch.
Conversion convert(const RegressionSet& models, const MeasurementSet& m);

struct ErrorStats {
  std::size_t n = 0;
  double mae = 0.0;
  double std = 0.0;   // population std of absolute errors
  double rmse = 0.0;
  double mape = 0.0;  // percent of the ground truth
};

struct ConversionRow {
  std::string name;
  ErrorStats baseline;
  ErrorStats regression;
};

struct ConversionReport {
  std::vector<ConversionRow> variables;  // canonical variable order
  std::vector<ConversionRow> groups;     // Lengths, Heights, Widths, General
};

/// Errors of both methods against ground truth, per variable and pooled per
/// axis group. Throws MissingVariable when the ground truth lacks a variable
/// present in the pixel set.
ConversionReport compare_methods(const std::vector<MeasurementPair>& test,
                                 const RegressionSet& models, const ScaleFactor& scale);

ErrorStats error_stats(const std::vector<double>& predicted, const std::vector<double>& truth);

// Text table: a version line, a header, then
// `variable alpha beta epsilon c n_train` rows with round-trip precision.
std::string format_regression_set(const RegressionSet& models);
RegressionSet parse_regression_set(const std::string& text);
void save_regression_set(const RegressionSet& models, const std::filesystem::path& path);
RegressionSet load_regression_set(const std::filesystem::path& path);

}  // namespace shrimpmorph
