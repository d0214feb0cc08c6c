#include "shrimpmorph/discriminator.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "shrimpmorph/binary_io.hpp"
#include "shrimpmorph/errors.hpp"
#include "shrimpmorph/rng.hpp"

namespace shrimpmorph {

namespace {

constexpr std::string_view kModelMagic = "SMDC";
constexpr std::uint32_t kModelVersion = 1;
constexpr double kForegroundMm = 0.3;
constexpr std::array<double, kHistBins> kThicknessEdges = {0.3, 1.0, 2.0, 4.0, 6.0, 8.0, 11.0, 15.0};

double luma(const RgbdRaster& r, std::size_t o) {
  return 0.299 * r.rgb[3 * o] + 0.587 * r.rgb[3 * o + 1] + 0.114 * r.rgb[3 * o + 2];
}

// Depth of the empty capture plane: median of the valid border readings.
double background_depth(const RgbdRaster& r) {
  std::vector<float> border;
  for (int x = 0; x < r.width; ++x) {
    for (int y : {0, r.height - 1}) {
      const float d = r.depth[r.offset(x, y)];
      if (d > 0.0f) border.push_back(d);
    }
  }
  for (int y = 1; y + 1 < r.height; ++y) {
    for (int x : {0, r.width - 1}) {
      const float d = r.depth[r.offset(x, y)];
      if (d > 0.0f) border.push_back(d);
    }
  }
  if (border.empty()) {
    const float m = *std::max_element(r.depth.begin(), r.depth.end());
    return m;
  }
  const auto mid = border.begin() + static_cast<std::ptrdiff_t>(border.size() / 2);
  std::nth_element(border.begin(), mid, border.end());
  return *mid;
}

double sigmoid(double s) {
  if (s >= 0.0) return 1.0 / (1.0 + std::exp(-s));
  const double e = std::exp(s);
  return e / (1.0 + e);
}

// Cross-entropy of logit s against label y, computed without overflow.
double log_loss(double s, bool y) {
  const double m = y ? -s : s;  // loss = log(1 + exp(m))
  return m > 0.0 ? m + std::log1p(std::exp(-m)) : std::log1p(std::exp(m));
}

struct Standardised {
  std::vector<std::vector<double>> rows;
  std::vector<double> mean, scale;
};

Standardised standardise(const std::vector<std::vector<double>>& x, std::size_t dim) {
  Standardised s;
  s.mean.assign(dim, 0.0);
  s.scale.assign(dim, 1.0);
  const auto n = static_cast<double>(x.size());
  for (const auto& row : x) {
    for (std::size_t j = 0; j < dim; ++j) s.mean[j] += row[j] / n;
  }
  std::vector<double> var(dim, 0.0);
  for (const auto& row : x) {
    for (std::size_t j = 0; j < dim; ++j) var[j] += (row[j] - s.mean[j]) * (row[j] - s.mean[j]) / n;
  }
  for (std::size_t j = 0; j < dim; ++j) s.scale[j] = var[j] > 1e-24 ? std::sqrt(var[j]) : 1.0;
  s.rows.reserve(x.size());
  for (const auto& row : x) {
    std::vector<double> z(dim);
    for (std::size_t j = 0; j < dim; ++j) z[j] = (row[j] - s.mean[j]) / s.scale[j];
    s.rows.push_back(std::move(z));
  }
  return s;
}

double score(const std::vector<double>& w, double b, const std::vector<double>& z) {
  return std::inner_product(w.begin(), w.end(), z.begin(), b);
}

double full_loss(const std::vector<double>& w, double b, const Standardised& data,
                 const std::vector<bool>& labels, double l2) {
  double total = 0.0;
  for (std::size_t i = 0; i < data.rows.size(); ++i) total += log_loss(score(w, b, data.rows[i]), labels[i]);
  double reg = 0.0;
  for (double v : w) reg += v * v;
  return total / static_cast<double>(data.rows.size()) + 0.5 * l2 * reg;
}

}  // namespace

std::string_view to_string(Source source) { return source == Source::Human ? "human" : "ai"; }

std::string_view to_string(AssessmentKind kind) {
  return kind == AssessmentKind::Pose ? "pose" : "rostrum";
}

AssessmentKind parse_assessment_kind(std::string_view text) {
  if (text == "pose") return AssessmentKind::Pose;
  if (text == "rostrum") return AssessmentKind::Rostrum;
  throw ParseError("unknown assessment kind '" + std::string(text) + "'");
}

Assessment human_assessment(AssessmentKind kind, bool value) {
  return {Source::Human, kind, value, 1.0};
}

bool label_value(AssessmentKind kind, View view, RostrumState rostrum) {
  return kind == AssessmentKind::Pose ? view == View::Lateral : rostrum == RostrumState::Intact;
}

FusionDecision fuse(const Assessment& human, const Assessment& ai) {
  if (human.kind != ai.kind) throw KindMismatch("cannot fuse a pose and a rostrum assessment");
  if (human.source != Source::Human || ai.source != Source::AI) {
    throw KindMismatch("fusion needs one human and one AI assessment");
  }
  return {human.kind, human.value != ai.value, human.value, ai.value};
}

int FeatureSpec::dimension() const {
  return layout == FeatureLayout::Raster ? kRasterFeatureDim : raw_dimension;
}

std::vector<double> extract_features(const RgbdRaster& r) {
  r.check();
  const int w = r.width, h = r.height;
  std::vector<double> f;
  f.reserve(kRasterFeatureDim);

  for (int gy = 0; gy < kGridRows; ++gy) {
    for (int gx = 0; gx < kGridCols; ++gx) {
      const int x0 = gx * w / kGridCols, x1 = (gx + 1) * w / kGridCols;
      const int y0 = gy * h / kGridRows, y1 = (gy + 1) * h / kGridRows;
      double sum = 0.0;
      int n = 0;
      for (int y = y0; y < y1; ++y) {
        for (int x = x0; x < x1; ++x, ++n) sum += luma(r, r.offset(x, y));
      }
      f.push_back(n > 0 ? sum / n / 255.0 : 0.0);
    }
  }

  const double bg = background_depth(r);
  std::vector<double> thickness(r.pixel_count(), 0.0);
  std::vector<int> col_count(static_cast<std::size_t>(w), 0), row_count(static_cast<std::size_t>(h), 0);
  int min_x = w, max_x = -1, min_y = h, max_y = -1;
  std::size_t fg = 0;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const auto o = r.offset(x, y);
      const double d = r.depth[o];
      const double t = d > 0.0 ? std::max(0.0, bg - d) : 0.0;
      thickness[o] = t;
      if (t > kForegroundMm) {
        ++fg;
        ++col_count[static_cast<std::size_t>(x)];
        ++row_count[static_cast<std::size_t>(y)];
        min_x = std::min(min_x, x);
        max_x = std::max(max_x, x);
        min_y = std::min(min_y, y);
        max_y = std::max(max_y, y);
      }
    }
  }

  auto profile = [&](const std::vector<int>& counts, int bins, int extent, double norm) {
    for (int b = 0; b < bins; ++b) {
      const int i0 = b * extent / bins, i1 = (b + 1) * extent / bins;
      double sum = 0.0;
      for (int i = i0; i < i1; ++i) sum += counts[static_cast<std::size_t>(i)];
      f.push_back(i1 > i0 ? sum / (i1 - i0) / norm : 0.0);
    }
  };
  profile(col_count, kProfileCols, w, h);
  profile(row_count, kProfileRows, h, w);

  double aspect = 0.0, breadth = 0.0, breadth_ratio = 0.0;
  if (fg > 0) {
    const int bw = max_x - min_x + 1, bh = max_y - min_y + 1;
    aspect = static_cast<double>(std::min(bw, bh)) / std::max(bw, bh);
    const bool horizontal = bw >= bh;
    breadth = horizontal ? *std::max_element(col_count.begin(), col_count.end())
                         : *std::max_element(row_count.begin(), row_count.end());
    breadth_ratio = breadth / (horizontal ? bw : bh);
  }
  f.push_back(aspect);
  f.push_back(static_cast<double>(fg) / static_cast<double>(r.pixel_count()));
  f.push_back(breadth_ratio);

  double mean = 0.0, var = 0.0, max_t = 0.0;
  std::array<double, kHistBins> t_hist{}, l_hist{};
  for (std::size_t o = 0; o < r.pixel_count(); ++o) {
    const double t = thickness[o];
    if (t <= kForegroundMm) continue;
    mean += t;
    max_t = std::max(max_t, t);
    const auto bin = static_cast<std::size_t>(
        std::upper_bound(kThicknessEdges.begin(), kThicknessEdges.end(), t) - kThicknessEdges.begin() - 1);
    t_hist[bin] += 0.01;
    l_hist[std::min<std::size_t>(kHistBins - 1, static_cast<std::size_t>(luma(r, o) / 32.0))] += 0.01;
  }
  if (fg > 0) {
    mean /= static_cast<double>(fg);
    for (std::size_t o = 0; o < r.pixel_count(); ++o) {
      if (thickness[o] > kForegroundMm) var += (thickness[o] - mean) * (thickness[o] - mean);
    }
    var /= static_cast<double>(fg);
  }
  f.push_back(mean);
  f.push_back(var);
  f.push_back(max_t);
  f.insert(f.end(), t_hist.begin(), t_hist.end());
  f.push_back(breadth > 0.0 ? max_t / breadth : 0.0);
  f.insert(f.end(), l_hist.begin(), l_hist.end());
  return f;
}

void BinaryClassifierModel::validate() const {
  const auto dim = static_cast<std::size_t>(feature_spec.dimension());
  if (dim == 0) throw InvalidArgument("classifier feature dimension must be positive");
  if (weights.size() != dim || feature_mean.size() != dim || feature_scale.size() != dim) {
    throw InvalidArgument("classifier vectors do not match feature dimension " + std::to_string(dim));
  }
  if (!(threshold >= 0.0 && threshold <= 1.0)) throw InvalidArgument("threshold must lie in [0,1]");
  for (double s : feature_scale) {
    if (!(s > 0.0)) throw InvalidArgument("feature scales must be > 0");
  }
}

ClassifierTraining train_classifier_features(AssessmentKind kind, FeatureSpec spec,
                                             const std::vector<std::vector<double>>& features,
                                             const std::vector<bool>& labels,
                                             const ClassifierHyper& hyper) {
  if (features.size() != labels.size()) throw InvalidArgument("features and labels differ in length");
  const auto positives = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), true));
  if (positives == 0 || positives == labels.size()) {
    throw DegenerateData("classifier training needs both classes");
  }
  if (hyper.epochs < 0 || hyper.batch_size < 1 || !(hyper.learning_rate > 0.0) || hyper.l2 < 0.0) {
    throw InvalidArgument("classifier hyperparameters out of range");
  }
  const auto dim = static_cast<std::size_t>(spec.dimension());
  for (const auto& row : features) {
    if (row.size() != dim) throw InvalidArgument("feature vector length does not match spec");
  }

  const Standardised data = standardise(features, dim);
  std::vector<double> w(dim, 0.0);
  double b = 0.0;
  double lr = hyper.learning_rate;
  double loss = full_loss(w, b, data, labels, hyper.l2);
  std::vector<std::size_t> order(features.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(derive_seed(hyper.seed, 0xd15c));

  ClassifierTraining out;
  std::vector<double> grad(dim);
  for (int epoch = 0; epoch < hyper.epochs; ++epoch) {
    const std::vector<double> w0 = w;
    const double b0 = b;
    rng.shuffle(order.begin(), order.end());
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(hyper.batch_size)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(hyper.batch_size));
      const auto n = static_cast<double>(end - start);
      std::fill(grad.begin(), grad.end(), 0.0);
      double grad_b = 0.0;
      for (std::size_t k = start; k < end; ++k) {
        const auto& z = data.rows[order[k]];
        const double err = sigmoid(score(w, b, z)) - (labels[order[k]] ? 1.0 : 0.0);
        for (std::size_t j = 0; j < dim; ++j) grad[j] += err * z[j] / n;
        grad_b += err / n;
      }
      for (std::size_t j = 0; j < dim; ++j) w[j] -= lr * (grad[j] + hyper.l2 * w[j]);
      b -= lr * grad_b;
    }
    const double next = full_loss(w, b, data, labels, hyper.l2);
    if (next > loss) {
      w = w0;
      b = b0;
      lr *= 0.5;
    } else {
      loss = next;
    }
    out.loss_curve.push_back(loss);
  }

  out.model.kind = kind;
  out.model.feature_spec = spec;
  out.model.feature_mean = data.mean;
  out.model.feature_scale = data.scale;
  out.model.weights = std::move(w);
  out.model.bias = b;
  return out;
}

ClassifierTraining train_classifier(AssessmentKind kind,
                                    const std::vector<std::pair<const RgbdRaster*, bool>>& labelled,
                                    const ClassifierHyper& hyper) {
  std::vector<std::vector<double>> x;
  std::vector<bool> y;
  x.reserve(labelled.size());
  for (const auto& [raster, label] : labelled) {
    x.push_back(extract_features(*raster));
    y.push_back(label);
  }
  return train_classifier_features(kind, FeatureSpec{}, x, y, hyper);
}

double predict_probability(const BinaryClassifierModel& model, const std::vector<double>& features) {
  model.validate();
  if (features.size() != model.weights.size()) {
    throw InvalidArgument("feature vector length does not match the model");
  }
  double s = model.bias;
  for (std::size_t j = 0; j < features.size(); ++j) {
    s += model.weights[j] * (features[j] - model.feature_mean[j]) / model.feature_scale[j];
  }
  return sigmoid(s);
}

Assessment predict_features(const BinaryClassifierModel& model, const std::vector<double>& features) {
  const double p = predict_probability(model, features);
  const bool value = p >= model.threshold;
  return {Source::AI, model.kind, value, value ? p : 1.0 - p};
}

Assessment predict(const BinaryClassifierModel& model, const RgbdRaster& raster) {
  if (model.feature_spec.layout != FeatureLayout::Raster) {
    throw InvalidArgument("model was trained on raw feature vectors, not rasters");
  }
  return predict_features(model, extract_features(raster));
}

std::vector<std::uint8_t> encode_classifier(const BinaryClassifierModel& model) {
  model.validate();
  detail::ByteWriter w;
  w.magic(kModelMagic);
  w.u32(kModelVersion);
  w.u8(model.kind == AssessmentKind::Pose ? 0 : 1);
  w.u8(static_cast<std::uint8_t>(model.feature_spec.layout));
  w.u32(static_cast<std::uint32_t>(model.feature_spec.dimension()));
  w.f64s(model.feature_mean.data(), model.feature_mean.size());
  w.f64s(model.feature_scale.data(), model.feature_scale.size());
  w.f64s(model.weights.data(), model.weights.size());
  w.f64(model.bias);
  w.f64(model.threshold);
  return std::move(w.buffer());
}

BinaryClassifierModel decode_classifier(const std::vector<std::uint8_t>& bytes) {
  detail::ByteReader r(bytes);
  r.expect_magic(kModelMagic);
  if (r.u32() != kModelVersion) throw FormatError("unsupported classifier version");
  BinaryClassifierModel m;
  const auto kind = r.u8();
  if (kind > 1) throw FormatError("bad classifier kind");
  m.kind = kind == 0 ? AssessmentKind::Pose : AssessmentKind::Rostrum;
  const auto layout = r.u8();
  const auto dim = static_cast<int>(r.u32());
  if (layout == static_cast<std::uint8_t>(FeatureLayout::Raster)) {
    if (dim != kRasterFeatureDim) throw FormatError("raster feature dimension mismatch");
    m.feature_spec = FeatureSpec{};
  } else if (layout == static_cast<std::uint8_t>(FeatureLayout::Raw)) {
    m.feature_spec = FeatureSpec::raw(dim);
  } else {
    throw FormatError("unknown feature layout");
  }
  m.feature_mean = r.f64s();
  m.feature_scale = r.f64s();
  m.weights = r.f64s();
  m.bias = r.f64();
  m.threshold = r.f64();
  if (!r.at_end()) throw FormatError("trailing bytes after classifier");
  try {
    m.validate();
  } catch (const InvalidArgument& e) {
    throw FormatError(std::string("classifier invalid: ") + e.what());
  }
  return m;
}

void save_classifier(const BinaryClassifierModel& model, const std::filesystem::path& path) {
  write_file_bytes(path, encode_classifier(model));
}

BinaryClassifierModel load_classifier(const std::filesystem::path& path) {
  return decode_classifier(read_file_bytes(path));
}

DiscriminationReport evaluate_discrimination(AssessmentKind kind,
                                             const std::vector<JudgedSample>& judged) {
  DiscriminationReport rep;
  rep.kind = kind;
  for (const auto& s : judged) {
    if (!s.gt || !s.human || !s.ai) {
      throw MissingLabel("sample " + s.sample_id + " lacks a " +
                         std::string(!s.gt ? "ground-truth" : !s.human ? "human" : "AI") + " label");
    }
    ++rep.samples;
    const bool human_wrong = *s.human != *s.gt;
    const bool ai_wrong = *s.ai != *s.gt;
    if (human_wrong) rep.human_error_ids.insert(s.sample_id);
    if (ai_wrong) rep.ai_error_ids.insert(s.sample_id);
    if (*s.human != *s.ai) ++rep.alerts;
    if (human_wrong && ai_wrong && *s.human == *s.ai) rep.hybrid_undetected_ids.insert(s.sample_id);
  }
  rep.human_errors = rep.human_error_ids.size();
  rep.ai_errors = rep.ai_error_ids.size();
  rep.hybrid_undetected = rep.hybrid_undetected_ids.size();
  if (rep.samples > 0) {
    const auto n = static_cast<double>(rep.samples);
    rep.human_error_pct = 100.0 * static_cast<double>(rep.human_errors) / n;
    rep.ai_error_pct = 100.0 * static_cast<double>(rep.ai_errors) / n;
    rep.hybrid_undetected_error_pct = 100.0 * static_cast<double>(rep.hybrid_undetected) / n;
  }
  return rep;
}

DiscriminationReport evaluate_discrimination(const std::vector<const SampleRecord*>& corpus,
                                             const BinaryClassifierModel& model) {
  std::vector<JudgedSample> judged;
  judged.reserve(corpus.size());
  for (const SampleRecord* s : corpus) {
    judged.push_back({s->sample_id, label_value(model.kind, s->gt_view, s->gt_rostrum),
                      label_value(model.kind, s->human_view, s->human_rostrum),
                      predict(model, s->raster).value});
  }
  return evaluate_discrimination(model.kind, judged);
}

}  // namespace shrimpmorph
