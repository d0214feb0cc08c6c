#include "shrimpmorph/report.hpp"

#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>

namespace shrimpmorph {

namespace {

std::string num(double v, const char* fmt = "%.4f") {
  char buf[64];
  std::snprintf(buf, sizeof buf, fmt, v);
  return buf;
}

class Writer {
public:
  void title(const std::string& t) {
    if (!text_.str().empty()) text_ << '\n';
    text_ << t << '\n';
  }
  void note(const std::string& n) { text_ << "note: " << n << '\n'; }

  void header(const std::vector<std::string>& columns) {
    columns_ = columns;
    line("", columns);
  }

  void row(const std::string& table, const std::string& name, const std::vector<double>& values) {
    std::vector<std::string> cells;
    for (std::size_t i = 0; i < values.size(); ++i) {
      cells.push_back(num(values[i]));
      csv_ << table << ',' << name << ',' << columns_.at(i) << ',' << num(values[i], "%.10g") << '\n';
    }
    line(name, cells);
  }

  Report finish() { return {text_.str(), csv_.str()}; }

private:
  void line(const std::string& name, const std::vector<std::string>& cells) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%-28s", name.c_str());
    text_ << buf;
    for (const auto& c : cells) {
      std::snprintf(buf, sizeof buf, " %12s", c.c_str());
      text_ << buf;
    }
    text_ << '\n';
  }

  std::ostringstream text_;
  std::ostringstream csv_{"table,row,column,value\n", std::ios::ate};
  std::vector<std::string> columns_;
};

const std::vector<Variant>& all_variants() {
  static const std::vector<Variant> v{{View::Lateral, RostrumState::Intact},
                                      {View::Lateral, RostrumState::Broken},
                                      {View::Dorsal, RostrumState::Intact},
                                      {View::Dorsal, RostrumState::Broken}};
  return v;
}

void discrimination_table(Writer& w, const std::vector<DiscriminationReport>& reports) {
  w.title("Discrimination errors (%)");
  if (reports.empty()) {
    w.note("no discrimination results");
    return;
  }
  w.header({"samples", "human_err", "ai_err", "alerts", "hybrid_err"});
  for (const auto& r : reports) {
    w.row(kTableDiscrimination, std::string(to_string(r.kind)),
          {static_cast<double>(r.samples), r.human_error_pct, r.ai_error_pct,
           static_cast<double>(r.alerts), r.hybrid_undetected_error_pct});
  }
}

void pose_table(Writer& w, const EvaluationResults& res) {
  w.title("Pose estimation by variant");
  std::vector<std::string> empty;
  bool any = false;
  for (const auto& v : all_variants()) {
    std::vector<VirtualSkeleton> preds, gts;
    for (const auto& p : res.pose) {
      if (variant_of(p.gt) == v) {
        preds.push_back(p.pred);
        gts.push_back(p.gt);
      }
    }
    if (gts.empty()) {
      empty.push_back(variant_name(v));
      continue;
    }
    if (!any) w.header({"samples", "mAP50:95", "PCK@" + num(res.pck_threshold_px, "%g") + "px"});
    any = true;
    w.row(kTablePose, variant_name(v),
          {static_cast<double>(gts.size()), map_50_95(preds, gts, res.oks),
           pck(preds, gts, res.pck_threshold_px)});
  }
  for (const auto& name : empty) w.note("no samples for " + name + ", omitted");
}

void keypoint_table(Writer& w, const EvaluationResults& res, View view, const char* key) {
  w.title(std::string("Per-keypoint errors, ") + std::string(to_string(view)) + " view");
  std::vector<VirtualSkeleton> preds, gts;
  std::vector<double> norms;
  for (const auto& p : res.pose) {
    if (p.gt.view != view) continue;
    preds.push_back(p.pred);
    gts.push_back(p.gt);
    norms.push_back(p.normalizer);
  }
  if (gts.empty()) {
    w.note(std::string("no ") + std::string(to_string(view)) + " samples, omitted");
    return;
  }
  const auto rows = keypoint_error_rows(preds, gts, norms);
  w.header({"n", "epe_mean_px", "epe_std_px", "rmse_px", "mape_pct"});
  std::vector<double> mean(4, 0.0);
  for (const auto& r : rows) {
    const std::vector<double> v{r.epe_mean, r.epe_std, r.rmse, r.mape_pct};
    for (std::size_t i = 0; i < 4; ++i) mean[i] += v[i] / static_cast<double>(rows.size());
    w.row(key, "keypoint_" + std::to_string(r.keypoint_index),
          {static_cast<double>(r.n), v[0], v[1], v[2], v[3]});
  }
  w.row(key, "mean", {static_cast<double>(rows.size()), mean[0], mean[1], mean[2], mean[3]});
}

void conversion_table(Writer& w, const std::optional<ConversionReport>& report) {
  w.title("Pixel to centimetre conversion errors");
  if (!report || report->variables.empty()) {
    w.note("no conversion results");
    return;
  }
  w.header({"n", "base_mae_cm", "base_rmse_cm", "base_mape", "svr_mae_cm", "svr_rmse_cm",
            "svr_mape"});
  auto emit = [&](const ConversionRow& r) {
    w.row(kTableConversion, r.name,
          {static_cast<double>(r.regression.n), r.baseline.mae, r.baseline.rmse, r.baseline.mape,
           r.regression.mae, r.regression.rmse, r.regression.mape});
  };
  for (const auto& r : report->variables) emit(r);
  for (const auto& r : report->groups) emit(r);
}

void length_view_table(Writer& w, const std::vector<LengthObservation>& obs) {
  w.title("Length variables by point of view (MAE, cm)");
  std::map<std::string, std::map<View, std::vector<double>>> errors;
  for (const auto& o : obs) errors[o.variable][o.view].push_back(std::abs(o.predicted_cm - o.truth_cm));
  if (errors.empty()) {
    w.note("no length observations");
    return;
  }
  w.header({"lateral_n", "lateral_mae", "dorsal_n", "dorsal_mae"});
  std::vector<std::string> partial;
  for (const auto& name : variable_names()) {
    auto it = errors.find(name);
    if (it == errors.end()) continue;
    std::vector<double> cells;
    for (View v : {View::Lateral, View::Dorsal}) {
      const auto found = it->second.find(v);
      if (found == it->second.end()) {
        cells.insert(cells.end(), {0.0, 0.0});
        partial.push_back(name + " (" + std::string(to_string(v)) + ")");
        continue;
      }
      double sum = 0.0;
      for (double e : found->second) sum += e;
      cells.push_back(static_cast<double>(found->second.size()));
      cells.push_back(sum / static_cast<double>(found->second.size()));
    }
    w.row(kTableLengthView, name, cells);
  }
  for (const auto& p : partial) w.note("no observations for " + p + ", reported as 0");
}

}  // namespace

Report report_tables(const EvaluationResults& results) {
  Writer w;
  discrimination_table(w, results.discrimination);
  pose_table(w, results);
  keypoint_table(w, results, View::Lateral, kTableKeypointsLateral);
  keypoint_table(w, results, View::Dorsal, kTableKeypointsDorsal);
  conversion_table(w, results.conversion);
  length_view_table(w, results.lengths);
  return w.finish();
}

}  // namespace shrimpmorph
