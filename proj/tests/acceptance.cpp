// Acceptance suite: one PASS/FAIL line per primary criterion.
//
//   acceptance [substring...]   runs the criteria whose name contains any substring

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <set>
#include <string>
#include <vector>

#include "shrimpmorph/data_io.hpp"
#include "shrimpmorph/discriminator.hpp"
#include "shrimpmorph/errors.hpp"
#include "shrimpmorph/event_log.hpp"
#include "shrimpmorph/metrics.hpp"
#include "shrimpmorph/pipeline.hpp"
#include "shrimpmorph/pose_net.hpp"
#include "shrimpmorph/pose_train.hpp"
#include "shrimpmorph/rng.hpp"
#include "shrimpmorph/service.hpp"
#include "shrimpmorph/synth.hpp"
#include "shrimpmorph/unit_regression.hpp"
#include "shrimpmorph/workflows.hpp"

using namespace shrimpmorph;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* format, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, format, args...);
  return buf;
}

std::vector<const SampleRecord*> pointers(const std::vector<SampleRecord>& v) {
  std::vector<const SampleRecord*> out;
  for (const auto& s : v) out.push_back(&s);
  return out;
}

std::filesystem::path scratch(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("shrimpmorph_acceptance_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

// ------------------------------------------------------------ fusion

Outcome xor_fusion() {
  std::size_t violations = 0;
  for (bool h : {false, true}) {
    for (bool a : {false, true}) {
      for (auto kind : {AssessmentKind::Pose, AssessmentKind::Rostrum}) {
        const auto d = fuse(human_assessment(kind, h), {Source::AI, kind, a, 0.9});
        violations += d.alert != (h != a) || d.human_value != h || d.ai_value != a;
      }
    }
  }
  Rng rng(1001);
  std::size_t cases = 0;
  for (int run = 0; run < 1000; ++run, ++cases) {
    const auto kind = run % 2 ? AssessmentKind::Pose : AssessmentKind::Rostrum;
    const double human_err = rng.uniform(0.0, 0.5), ai_err = rng.uniform(0.0, 0.5);
    const int n = 1 + static_cast<int>(rng.below(60));
    std::vector<JudgedSample> judged;
    std::set<std::string> expected;
    std::size_t disagreements = 0;
    for (int i = 0; i < n; ++i) {
      JudgedSample j;
      j.sample_id = "s" + std::to_string(i);
      const bool gt = rng.bernoulli(0.5);
      j.gt = gt;
      j.human = rng.bernoulli(human_err) ? !gt : gt;
      j.ai = rng.bernoulli(ai_err) ? !gt : gt;
      if (*j.human != gt && *j.ai != gt && *j.human == *j.ai) expected.insert(j.sample_id);
      const auto d = fuse(human_assessment(kind, *j.human), {Source::AI, kind, *j.ai, 0.5});
      violations += d.alert != (*j.human != *j.ai);
      disagreements += *j.human != *j.ai;
      judged.push_back(j);
    }
    const auto rep = evaluate_discrimination(kind, judged);
    violations += rep.hybrid_undetected_ids != expected;
    violations += rep.alerts != disagreements;
  }
  return {violations == 0, fmt("%zu random corpora + truth table, %zu violations", cases, violations)};
}

// ------------------------------------------------------------ discriminator

Outcome discriminator_learnability() {
  const auto t0 = Clock::now();
  SynthParams p;
  p.seed = 2024;
  p.label_noise.view_flip_prob = 0.01;
  p.label_noise.rostrum_flip_prob = 0.12;
  const auto corpus = generate_corpus(p, 2000);
  const auto split = make_split(corpus, {0.7, 0.1, 0.2}, 7);
  std::vector<SampleRecord> train;
  std::vector<const SampleRecord*> test;
  for (const auto& s : corpus) {
    if (split.train_ids.count(s.sample_id)) train.push_back(s);
    if (split.test_ids.count(s.sample_id)) test.push_back(&s);
  }
  ClassifierHyper hyper;
  hyper.seed = 5;
  const auto disc = train_discriminators(train, hyper);
  const auto view = evaluate_discrimination(test, disc.view);
  const auto rostrum = evaluate_discrimination(test, disc.rostrum);
  const double secs = seconds_since(t0);
  const double view_acc = 100.0 - view.ai_error_pct;
  const double rostrum_acc = 100.0 - rostrum.ai_error_pct;
  auto hybrid_ok = [](const DiscriminationReport& r) {
    return r.hybrid_undetected_error_pct <= r.human_error_pct &&
           r.hybrid_undetected_error_pct <= r.ai_error_pct;
  };
  const bool pass = view_acc >= 99.0 && rostrum_acc >= 95.0 && hybrid_ok(view) &&
                    hybrid_ok(rostrum) && secs < 120.0;
  return {pass, fmt("test n=%zu view acc %.2f%%, rostrum acc %.2f%%; human err %.2f%%/%.2f%%, "
                    "hybrid undetected %.2f%%/%.2f%%; %.1f s",
                    view.samples, view_acc, rostrum_acc, view.human_error_pct,
                    rostrum.human_error_pct, view.hybrid_undetected_error_pct,
                    rostrum.hybrid_undetected_error_pct, secs)};
}

// ------------------------------------------------------------ transformer block

Outcome residual_identity() {
  double worst = 0.0;
  for (auto config : {PoseNetConfig::tiny(), PoseNetConfig::desk()}) {
    auto model = init_pose_model(config, {View::Lateral, RostrumState::Intact});
    Rng rng(3);
    for (auto& layer : model.params.layers) {
      for (Mat* m : {&layer.wq, &layer.wk, &layer.wv, &layer.wo, &layer.bq, &layer.bv, &layer.bo,
                     &layer.w1, &layer.b1, &layer.w2, &layer.b2}) {
        m->setZero();
      }
      for (Eigen::Index i = 0; i < layer.ln_gamma.size(); ++i) {
        layer.ln_gamma.data()[i] = rng.normal(1.0, 0.5);
        layer.ln_beta.data()[i] = rng.normal(0.0, 0.5);
      }
    }
    FeatureMap f{config.grid_height(), config.grid_width(), Mat(config.tokens(), config.embed_dim)};
    for (Eigen::Index i = 0; i < f.data.size(); ++i) f.data.data()[i] = rng.normal(0.0, 3.0);
    for (const auto& layer : model.params.layers) {
      const auto out = vit_block(f, layer, config);
      worst = std::max(worst, (out.data - f.data).cwiseAbs().maxCoeff());
    }
  }
  return {worst == 0.0, fmt("tiny and desk configs, max abs deviation %g", worst)};
}

// ------------------------------------------------------------ gradients

Outcome gradient_check() {
  const auto t0 = Clock::now();
  const auto config = PoseNetConfig::tiny();
  auto model = init_pose_model(config, {View::Lateral, RostrumState::Intact});
  model.config.num_keypoints = config.num_keypoints;
  Rng rng(5);
  model.params.visit([&](const std::string&, Mat& t) {
    for (Eigen::Index i = 0; i < t.size(); ++i) t.data()[i] += rng.normal(0.0, 0.3);
  });
  std::vector<PoseExample> batch;
  for (int b = 0; b < 2; ++b) {
    PoseExample ex;
    ex.patches = Mat(config.tokens(), config.patch_dim());
    for (Eigen::Index i = 0; i < ex.patches.size(); ++i) ex.patches.data()[i] = rng.normal();
    const int cells = config.heatmap_height() * config.heatmap_width();
    ex.target = {config.heatmap_height(), config.heatmap_width(), config.num_keypoints,
                 Mat(cells, config.num_keypoints)};
    for (Eigen::Index i = 0; i < ex.target.data.size(); ++i) ex.target.data.data()[i] = rng.uniform();
    batch.push_back(std::move(ex));
  }
  const auto analytic = loss_and_gradients(model, batch);
  std::vector<const Mat*> grads;
  analytic.grads.visit([&](const std::string&, const Mat& g) { grads.push_back(&g); });
  // Per tensor: max |numeric - analytic| / max |numeric|.
  double worst = 0.0;
  std::string worst_name;
  std::size_t tensors = 0, entries = 0;
  const double h = 1e-5;
  model.params.visit([&](const std::string& name, Mat& t) {
    const Mat& g = *grads[tensors++];
    double num = 0.0, den = 0.0;
    for (Eigen::Index i = 0; i < t.size(); ++i, ++entries) {
      const double orig = t.data()[i];
      t.data()[i] = orig + h;
      const double lp = loss_only(model, batch);
      t.data()[i] = orig - h;
      const double lm = loss_only(model, batch);
      t.data()[i] = orig;
      const double fd = (lp - lm) / (2.0 * h);
      num = std::max(num, std::abs(fd - g.data()[i]));
      den = std::max(den, std::abs(fd));
    }
    const double rel = num / std::max(den, 1e-12);
    if (rel > worst) worst = rel, worst_name = name;
  });
  const double secs = seconds_since(t0);
  return {worst < 1e-4 && secs < 60.0,
          fmt("%zu tensors, %zu entries, worst relative error %.2e (%s), %.1f s", tensors, entries,
              worst, worst_name.c_str(), secs)};
}

// ------------------------------------------------------------ pose training

Outcome pose_training() {
  const auto t0 = Clock::now();
  SynthParams p;
  p.view_mix = 1.0;
  p.rostrum_break_prob = 0.0;
  p.seed = 11;
  const auto train = generate_corpus(p, 200);
  p.seed = 12;
  const auto test = generate_corpus(p, 50);
  const auto train_ptrs = pointers(train);
  PoseModel model = prepare_pose_model(PoseNetConfig::desk(),
                                       {View::Lateral, RostrumState::Intact}, train_ptrs);
  const auto result = train_pose(model, train_ptrs, desk_pose_hyper());
  std::vector<VirtualSkeleton> preds, gts;
  for (const auto& s : test) {
    preds.push_back(extract_keypoints(forward(result.model, s.raster), result.model.variant));
    gts.push_back(*s.gt_skeleton);
  }
  const double pck10 = pck(preds, gts, 10.0);
  const double map = map_50_95(preds, gts, OksParams::uniform());
  double mean_epe = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    for (double d : epe(preds[i], gts[i])) mean_epe += d, ++n;
  }
  mean_epe /= static_cast<double>(n);
  const double secs = seconds_since(t0);
  // Loss is expected to settle: no epoch after the first exceeds its predecessor by > 5%.
  std::size_t rises = 0;
  for (std::size_t e = 2; e < result.loss_curve.size(); ++e) {
    rises += result.loss_curve[e] > 1.05 * result.loss_curve[e - 1];
  }
  std::printf("  info: pose loss first %.3g last %.3g, %zu rises > 5%% after epoch 1\n",
              result.loss_curve.front(), result.loss_curve.back(), rises);
  return {pck10 >= 80.0 && map >= 60.0 && secs < 900.0,
          fmt("200 train / 50 test, PCK@10px %.2f%%, mAP50:95 %.2f%%, mean EPE %.3f px, %.0f s",
              pck10, map, mean_epe, secs)};
}

// ------------------------------------------------------------ decoding

Outcome decode_round_trip() {
  const auto config = PoseNetConfig::desk();
  Rng rng(77);
  int failures = 0;
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    VirtualSkeleton skel;
    skel.view = rng.bernoulli(0.5) ? View::Lateral : View::Dorsal;
    skel.rostrum = RostrumState::Intact;
    // Interior: at least two heatmap cells (8 px) from every border.
    for (int k = 1; k <= kMaxKeypoints; ++k) {
      skel.keypoints.push_back({k, rng.uniform(8.0, config.input_width - 9.0),
                                rng.uniform(8.0, config.input_height - 9.0), true});
    }
    const auto back = extract_keypoints(gaussian_target(skel, config), variant_of(skel));
    bool ok = true;
    for (std::size_t k = 0; k < skel.keypoints.size(); ++k) {
      const double dx = std::abs(back.keypoints[k].x - skel.keypoints[k].x);
      const double dy = std::abs(back.keypoints[k].y - skel.keypoints[k].y);
      worst = std::max({worst, dx, dy});
      ok = ok && dx <= 0.5 && dy <= 0.5;
    }
    failures += !ok;
  }
  return {failures == 0, fmt("100 skeletons, %d failures, worst coordinate error %.4f px", failures, worst)};
}

// ------------------------------------------------------------ regression

std::vector<MeasurementPair> offset_pairs(const std::vector<SampleRecord>& corpus, double scale,
                                          double beta, double sigma, Rng& rng) {
  std::vector<MeasurementPair> out;
  for (const auto& s : corpus) {
    const MeasurementSet px = extract_pixel_measurements(*s.gt_skeleton);
    MeasurementSet cm(Unit::Centimeters);
    for (const auto& [name, v] : px.values()) {
      cm.set(name, std::max(0.0, v * scale + beta + rng.normal(0.0, sigma)));
    }
    out.emplace_back(px, cm);
  }
  return out;
}

Outcome regression_superiority() {
  SynthParams p;
  p.seed = 404;
  const auto corpus = generate_corpus(p, 600);
  const auto split = make_split(corpus, {0.7, 0.1, 0.2}, 3);
  std::vector<SampleRecord> train, test;
  for (const auto& s : corpus) {
    if (split.train_ids.count(s.sample_id)) train.push_back(s);
    if (split.test_ids.count(s.sample_id)) test.push_back(s);
  }
  Rng rng(405);
  const auto train_pairs = offset_pairs(train, p.scale_cm_per_px, 0.3, 0.05, rng);
  const auto test_pairs = offset_pairs(test, p.scale_cm_per_px, 0.3, 0.05, rng);
  const auto models = fit_regression_set(train_pairs, {});
  const auto report = compare_methods(test_pairs, models, {p.scale_cm_per_px, "synthetic"});
  std::vector<double> base_pred, svr_pred, truth;
  for (const auto& [px, cm] : test_pairs) {
    const auto base = baseline_convert(px, {p.scale_cm_per_px, "synthetic"});
    const auto svr = convert(models, px);
    for (const auto& [name, v] : cm.values()) {
      truth.push_back(v);
      base_pred.push_back(*base.get(name));
      svr_pred.push_back(*svr.cm.get(name));
    }
  }
  const auto base = error_stats(base_pred, truth);
  const auto svr = error_stats(svr_pred, truth);
  bool report_agrees = true;
  for (const auto& row : report.variables) report_agrees = report_agrees && row.regression.mae < row.baseline.mae;
  return {svr.mae < base.mae && svr.mae < 0.1 && report_agrees,
          fmt("%zu test values, baseline MAE %.4f cm, SVR MAE %.4f cm, SVR better on %s variable",
              truth.size(), base.mae, svr.mae, report_agrees ? "every" : "not every")};
}

Outcome svr_ols_oracle() {
  const double alpha = 0.1234, beta = 0.3;
  std::vector<CalibrationPair> pairs;
  Rng rng(9);
  for (int i = 0; i < 50; ++i) {
    const double x = rng.uniform(10.0, 120.0);
    pairs.emplace_back(x, alpha * x + beta);
  }
  const auto svr = fit_svr("total_length", pairs, {0.0, 10.0});
  const auto ols = fit_least_squares("total_length", pairs);
  double gap = 0.0;
  for (double x = 0.0; x <= 200.0; x += 0.5) gap = std::max(gap, std::abs(svr.predict(x) - ols.predict(x)));
  const double da = std::abs(svr.alpha - alpha), db = std::abs(svr.beta - beta);
  return {da < 1e-6 && db < 1e-6 && gap < 1e-4,
          fmt("|da| %.2e, |db| %.2e, max SVR-OLS gap %.2e cm on [0, 200] px", da, db, gap)};
}

// ------------------------------------------------------------ metrics

struct BruteForce {
  static double dist(const Keypoint& a, const Keypoint& b) {
    return std::sqrt((a.x - b.x) * (a.x - b.x) + (a.y - b.y) * (a.y - b.y));
  }
  static double oks(const VirtualSkeleton& p, const VirtualSkeleton& g, double k) {
    double x0 = 1e300, x1 = -1e300, y0 = 1e300, y1 = -1e300;
    for (const auto& q : g.keypoints) {
      x0 = std::min(x0, q.x), x1 = std::max(x1, q.x), y0 = std::min(y0, q.y), y1 = std::max(y1, q.y);
    }
    const double area = (x1 - x0) * (y1 - y0);
    double sum = 0.0;
    for (std::size_t i = 0; i < g.keypoints.size(); ++i) {
      const double d = dist(p.keypoints[i], g.keypoints[i]);
      sum += std::exp(-d * d / (2.0 * area * k * k));
    }
    return sum / static_cast<double>(g.keypoints.size());
  }
  static double map(const std::vector<double>& oks_values) {
    double total = 0.0;
    for (int t = 0; t < 10; ++t) {
      const double thr = (50.0 + 5.0 * t) / 100.0;
      double hit = 0.0;
      for (double o : oks_values) hit += o >= thr;
      total += hit / static_cast<double>(oks_values.size());
    }
    return 100.0 * total / 10.0;
  }
};

Outcome metric_oracles() {
  Rng rng(31);
  double worst = 0.0;
  int corpora = 0;
  for (; corpora < 20; ++corpora) {
    const int n = 1 + static_cast<int>(rng.below(10));
    const RostrumState rostrum = corpora % 2 ? RostrumState::Broken : RostrumState::Intact;
    std::vector<VirtualSkeleton> preds, gts;
    std::vector<double> norms;
    for (int i = 0; i < n; ++i) {
      VirtualSkeleton g;
      g.view = View::Lateral;
      g.rostrum = rostrum;
      for (int k = first_keypoint_index(rostrum); k <= kMaxKeypoints; ++k) {
        g.keypoints.push_back({k, rng.uniform(0.0, 128.0), rng.uniform(0.0, 96.0), true});
      }
      VirtualSkeleton p = g;
      for (auto& q : p.keypoints) q.x += rng.normal(0.0, 4.0), q.y += rng.normal(0.0, 4.0);
      gts.push_back(g);
      preds.push_back(p);
      norms.push_back(std::hypot(128.0, 96.0));
    }
    const auto rows = keypoint_error_rows(preds, gts, norms);
    const auto rmse_map = rmse(preds, gts);
    const auto mape_map = mape(preds, gts, norms);
    const std::size_t nk = gts[0].keypoints.size();
    for (std::size_t k = 0; k < nk; ++k) {
      double s = 0.0, s2 = 0.0, rel = 0.0;
      for (int i = 0; i < n; ++i) {
        const double d = BruteForce::dist(preds[i].keypoints[k], gts[i].keypoints[k]);
        s += d, s2 += d * d, rel += d / norms[i];
      }
      const int idx = gts[0].keypoints[k].index;
      worst = std::max({worst, std::abs(rows[k].epe_mean - s / n),
                        std::abs(rmse_map.at(idx) - std::sqrt(s2 / n)),
                        std::abs(mape_map.at(idx) - 100.0 * rel / n)});
      for (int i = 0; i < n; ++i) {
        worst = std::max(worst, std::abs(epe(preds[i], gts[i])[k] -
                                         BruteForce::dist(preds[i].keypoints[k], gts[i].keypoints[k])));
      }
    }
    for (double thr : {2.0, 5.0, 10.0}) {
      double hit = 0.0;
      for (int i = 0; i < n; ++i) {
        for (std::size_t k = 0; k < nk; ++k) hit += BruteForce::dist(preds[i].keypoints[k], gts[i].keypoints[k]) <= thr;
      }
      worst = std::max(worst, std::abs(pck(preds, gts, thr) - 100.0 * hit / (n * nk)));
    }
    std::vector<double> brute_oks;
    for (int i = 0; i < n; ++i) {
      brute_oks.push_back(BruteForce::oks(preds[i], gts[i], 0.05));
      worst = std::max(worst, std::abs(oks(preds[i], gts[i], OksParams::uniform()) - brute_oks.back()));
    }
    worst = std::max(worst, std::abs(map_50_95(preds, gts, OksParams::uniform()) - BruteForce::map(brute_oks)));
  }
  const double uniform = map_50_95(std::vector<double>(7, 0.7));
  return {worst < 1e-9 && uniform == 50.0,
          fmt("%d hand corpora, max deviation %.2e; uniform OKS 0.7 mAP = %.17g", corpora, worst, uniform)};
}

// ------------------------------------------------------------ pipeline

PipelineModels train_small_models(const std::vector<SampleRecord>& corpus) {
  PipelineModels models;
  ClassifierHyper ch;
  ch.seed = 17;
  const auto disc = train_discriminators(corpus, ch);
  models.view = disc.view;
  models.rostrum = disc.rostrum;
  PoseNetConfig cfg = PoseNetConfig::desk();
  cfg.embed_dim = 16;
  cfg.num_heads = 2;
  cfg.num_layers = 1;
  cfg.seed = 19;
  PoseTrainHyper ph;
  ph.epochs = 2;
  ph.optimizer = Optimizer::Adam;
  ph.lr = 1e-3;
  ph.seed = 23;
  models.poses = train_pose_models(corpus, cfg, ph);
  models.regression = fit_regression_from_corpus(corpus, {});
  return models;
}

std::string model_bytes(const PipelineModels& m) {
  std::string out;
  for (const auto& b : {encode_classifier(m.view), encode_classifier(m.rostrum)}) out.append(b.begin(), b.end());
  for (const auto& [v, pm] : m.poses.models()) {
    const auto b = encode_pose_model(pm);
    out.append(b.begin(), b.end());
  }
  return out + format_regression_set(m.regression);
}

/// Trains, processes every sample, resolves every alert with the true label
/// and processes again. Returns the store path.
std::filesystem::path full_run(const std::vector<SampleRecord>& train,
                               const std::vector<SampleRecord>& samples,
                               const std::filesystem::path& dir, std::string* models_out) {
  PipelineModels models = train_small_models(train);
  *models_out = model_bytes(models);
  const auto store = dir / "store.log";
  PipelineService svc(samples, std::move(models), store, [] { return std::string("2026-01-01T00:00:00Z"); });
  svc.process_pending();
  std::map<std::string, const SampleRecord*> by_id;
  for (const auto& s : samples) by_id[s.sample_id] = &s;
  for (const auto& a : svc.alerts(AlertFilter::Open)) {
    const SampleRecord& s = *by_id.at(a.sample_id);
    svc.resolve_alert(a.alert_id, label_value(a.kind, s.gt_view, s.gt_rostrum), "reviewer");
  }
  svc.process_pending();
  return store;
}

/// Walks the log in order and counts results that ran pose estimation while
/// one of their alerts was unresolved at that point.
std::size_t gated_violations(const std::string& log_text, std::size_t* results, std::size_t* awaiting) {
  std::size_t violations = 0;
  std::map<std::string, bool> resolved;
  std::size_t pos = 0;
  while (pos < log_text.size()) {
    const auto nl = log_text.find('\n', pos);
    const std::string line = log_text.substr(pos, nl - pos);
    pos = nl + 1;
    const auto ev = nlohmann::json::parse(line.substr(0, line.rfind('\t')));
    const auto type = ev.at("type").get<std::string>();
    if (type == "alert") {
      resolved[ev.at("alert").at("alert_id").get<std::string>()] = false;
    } else if (type == "resolution") {
      resolved[ev.at("alert_id").get<std::string>()] = true;
    } else {
      const auto r = result_from_json(ev.at("result"));
      ++*results;
      *awaiting += r.status == ResultStatus::AwaitingReview;
      const bool ran = r.skeleton.has_value() || r.measurements_px.has_value();
      for (const auto* d : {&r.fusion_pose, &r.fusion_rostrum}) {
        if (!d->alert) continue;
        auto it = resolved.find(alert_id_for(r.sample_id, d->kind));
        const bool open = it == resolved.end() || !it->second;
        if (open && (ran || r.status != ResultStatus::AwaitingReview)) ++violations;
      }
    }
  }
  return violations;
}

/// Cuts the store at several offsets; the replay must equal the replay of
/// the complete lines before the cut, and reopening must continue cleanly.
bool truncation_recovery(const std::filesystem::path& store, const std::filesystem::path& dir,
                         std::size_t* checked) {
  const std::string text = read_text_file(store);
  std::vector<std::size_t> line_ends;
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (text[i] == '\n') line_ends.push_back(i + 1);
  }
  Rng rng(99);
  const auto path = dir / "cut.log";
  for (int trial = 0; trial < 25; ++trial, ++*checked) {
    const std::size_t cut = trial == 0 ? text.size() - 1 : 1 + rng.below(text.size() - 1);
    std::size_t prefix = 0;
    for (std::size_t end : line_ends) {
      if (end <= cut) prefix = end;
    }
    write_text_file(path, text.substr(0, cut));
    const auto replay = replay_log(path);
    const auto expected = replay_log_text(text.substr(0, prefix));
    if (!(replay.state == expected.state) || replay.valid_bytes != prefix) return false;
    if ((cut != prefix) != (replay.warnings.size() == 1)) return false;
    {
      EventLog log(path);
      if (std::filesystem::file_size(path) != prefix) return false;
      if (log.state().results.empty() && log.state().alerts.empty() && prefix != 0) return false;
      PipelineResult r;
      r.sample_id = "appended";
      r.status = ResultStatus::Failed;
      r.failure_reason = "probe";
      log.append_result(r);
    }
    const auto after = replay_log(path);
    if (!after.warnings.empty() || after.state.records != expected.state.records + 1) return false;
  }
  return true;
}

Outcome pipeline_determinism() {
  const auto t0 = Clock::now();
  SynthParams p;
  p.seed = 300;
  p.samples_per_specimen = 4;
  const auto train = generate_corpus(p, 240);
  p.seed = 301;
  const auto samples = generate_corpus(p, 300);
  const auto dir_a = scratch("run_a"), dir_b = scratch("run_b");
  std::string models_a, models_b;
  const auto store_a = full_run(train, samples, dir_a, &models_a);
  const auto store_b = full_run(train, samples, dir_b, &models_b);
  const std::string text_a = read_text_file(store_a), text_b = read_text_file(store_b);
  const bool identical = text_a == text_b && models_a == models_b;
  std::size_t results = 0, awaiting = 0;
  const std::size_t violations = gated_violations(text_a, &results, &awaiting);
  std::size_t checked = 0;
  const bool recovery = truncation_recovery(store_a, dir_a, &checked);
  const auto final_state = replay_log(store_a).state;
  std::size_t open = 0;
  for (const auto& [id, a] : final_state.alerts) open += a.open();
  std::filesystem::remove_all(dir_a);
  std::filesystem::remove_all(dir_b);
  const bool pass = identical && violations == 0 && awaiting > 0 && recovery && open == 0;
  return {pass, fmt("300 samples, stores %s (%zu bytes), %zu results (%zu awaiting review), "
                    "%zu gating violations, %zu alerts left open, truncation recovery %s (%zu cuts), %.0f s",
                    identical ? "byte-identical" : "DIFFER", text_a.size(), results, awaiting,
                    violations, open, recovery ? "ok" : "FAILED", checked, seconds_since(t0))};
}

struct Criterion {
  const char* name;
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  tune_allocator_for_training();
  const std::vector<Criterion> criteria = {
      {"xor_fusion_exactness", xor_fusion},
      {"discriminator_learnability", discriminator_learnability},
      {"residual_identity", residual_identity},
      {"gradient_check", gradient_check},
      {"pose_training_desk", pose_training},
      {"heatmap_decode_round_trip", decode_round_trip},
      {"regression_superiority", regression_superiority},
      {"svr_ols_oracle", svr_ols_oracle},
      {"metric_oracles", metric_oracles},
      {"pipeline_determinism_gating", pipeline_determinism},
  };
  int failed = 0, ran = 0;
  for (const auto& c : criteria) {
    bool selected = argc < 2;
    for (int i = 1; i < argc; ++i) selected = selected || std::string(c.name).find(argv[i]) != std::string::npos;
    if (!selected) continue;
    ++ran;
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("%s %s: %s\n", o.pass ? "PASS" : "FAIL", c.name, o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d/%d criteria passed\n", ran - failed, ran);
  return failed == 0 ? 0 : 1;
}
