#include <gtest/gtest.h>

#include <map>
#include <sstream>

#include "shrimpmorph/report.hpp"
#include "test_util.hpp"

using namespace shrimpmorph;

namespace {

EvaluationResults sample_results() {
  Rng rng(1);
  EvaluationResults r;
  for (int i = 0; i < 6; ++i) {
    PoseResult p;
    p.sample_id = "s" + std::to_string(i);
    p.gt = testutil::random_skeleton(rng, i % 2 ? View::Dorsal : View::Lateral, RostrumState::Intact);
    p.pred = p.gt;
    for (auto& k : p.pred.keypoints) k.x += rng.normal(0.0, 2.0);
    p.normalizer = image_diagonal(128, 96);
    r.pose.push_back(p);
  }
  r.lengths.push_back({View::Lateral, "total", 10.1, 10.0});
  r.lengths.push_back({View::Dorsal, "total", 9.7, 10.0});
  return r;
}

std::map<std::string, std::map<std::string, std::map<std::string, double>>> parse_csv(const std::string& csv) {
  std::map<std::string, std::map<std::string, std::map<std::string, double>>> out;
  std::istringstream in(csv);
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "table,row,column,value");
  while (std::getline(in, line)) {
    std::stringstream ss(line);
    std::string t, r, c, v;
    std::getline(ss, t, ',');
    std::getline(ss, r, ',');
    std::getline(ss, c, ',');
    std::getline(ss, v, ',');
    out[t][r][c] = std::stod(v);
  }
  return out;
}

}  // namespace

TEST(Report, EmptyGroupsAreNoted) {
  const auto rep = report_tables(sample_results());
  EXPECT_NE(rep.text.find("no samples for lateral-22, omitted"), std::string::npos);
  EXPECT_NE(rep.text.find("no discrimination results"), std::string::npos);
  EXPECT_NE(rep.text.find("no conversion results"), std::string::npos);
  const auto csv = parse_csv(rep.csv);
  EXPECT_EQ(csv.at(kTablePose).count("lateral-22"), 0u);
  EXPECT_EQ(csv.at(kTablePose).count("lateral-23"), 1u);
}

TEST(Report, Deterministic) {
  const auto a = report_tables(sample_results());
  const auto b = report_tables(sample_results());
  EXPECT_EQ(a.text, b.text);
  EXPECT_EQ(a.csv, b.csv);
}

TEST(Report, MeansAgreeWithReaggregation) {
  const auto results = sample_results();
  const auto csv = parse_csv(report_tables(results).csv);
  for (const char* table : {kTableKeypointsLateral, kTableKeypointsDorsal}) {
    const auto& rows = csv.at(table);
    for (const char* col : {"epe_mean_px", "epe_std_px", "rmse_px", "mape_pct"}) {
      double sum = 0;
      int n = 0;
      for (const auto& [row, cells] : rows) {
        if (row == "mean") continue;
        sum += cells.at(col);
        ++n;
      }
      EXPECT_EQ(n, 23);
      EXPECT_NEAR(rows.at("mean").at(col), sum / n, 1e-8) << table << " " << col;
    }
  }
  std::vector<VirtualSkeleton> preds, gts;
  for (const auto& p : results.pose) {
    if (p.gt.view == View::Lateral) preds.push_back(p.pred), gts.push_back(p.gt);
  }
  EXPECT_NEAR(csv.at(kTablePose).at("lateral-23").at("PCK@10px"), pck(preds, gts, 10.0), 1e-8);
  EXPECT_NEAR(csv.at(kTableLengthView).at("total").at("dorsal_mae"), 0.3, 1e-9);
}
