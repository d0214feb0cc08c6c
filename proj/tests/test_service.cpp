#include <gtest/gtest.h>

#include <filesystem>
#include <thread>

#include <json.hpp>

#include "pipeline_fixture.hpp"
#include "shrimpmorph/data_io.hpp"
#include "shrimpmorph/errors.hpp"
#include "shrimpmorph/http_api.hpp"
#include "shrimpmorph/service.hpp"
#include "test_util.hpp"

// After Eigen: resolv.h defines a `_res` macro that clashes with Eigen.
#include <httplib.h>

using namespace shrimpmorph;
using nlohmann::json;

namespace {

constexpr const char* kStamp = "2026-01-01T00:00:00Z";

/// Six samples; the first two disagree with the AI on pose and rostrum.
std::vector<SampleRecord> service_corpus() {
  const auto& f = testutil::pipeline_fixture();
  std::vector<SampleRecord> out;
  for (int i = 0; i < 6; ++i) {
    SampleRecord s = testutil::with_agreement(f.corpus[i], f.models);
    if (i == 0) s = testutil::with_disagreement(s, f.models, AssessmentKind::Pose);
    if (i == 1) s = testutil::with_disagreement(s, f.models, AssessmentKind::Rostrum);
    out.push_back(std::move(s));
  }
  return out;
}

struct ServiceTest : ::testing::Test {
  void SetUp() override { dir = testutil::temp_dir("service"); }
  void TearDown() override { std::filesystem::remove_all(dir); }

  PipelineService make() {
    return PipelineService(service_corpus(), testutil::pipeline_fixture().models, dir / "store.log",
                           [] { return std::string(kStamp); });
  }

  std::filesystem::path dir;
};

}  // namespace

TEST(Service, AlertFilterParse) {
  EXPECT_EQ(parse_alert_filter("open"), AlertFilter::Open);
  EXPECT_EQ(parse_alert_filter("resolved"), AlertFilter::Resolved);
  EXPECT_EQ(parse_alert_filter("all"), AlertFilter::All);
  EXPECT_THROW(parse_alert_filter("closed"), InvalidArgument);
  EXPECT_EQ(utc_timestamp().size(), 20u);
  EXPECT_EQ(utc_timestamp().back(), 'Z');
}

TEST_F(ServiceTest, ProcessPendingGatesAlerts) {
  auto svc = make();
  EXPECT_TRUE(svc.alerts().empty());
  EXPECT_EQ(svc.process_pending(), 6u);
  EXPECT_EQ(svc.process_pending(), 0u);
  const auto ids = svc.sample_ids();
  EXPECT_EQ(svc.result(ids[0]).status, ResultStatus::AwaitingReview);
  EXPECT_EQ(svc.result(ids[1]).status, ResultStatus::AwaitingReview);
  for (int i = 2; i < 6; ++i) EXPECT_EQ(svc.result(ids[i]).status, ResultStatus::Completed);
  const auto open = svc.alerts(AlertFilter::Open);
  ASSERT_EQ(open.size(), 2u);
  EXPECT_EQ(open[0].alert_id, ids[0] + "-pose");
  EXPECT_EQ(open[1].alert_id, ids[1] + "-rostrum");
  EXPECT_TRUE(svc.alerts(AlertFilter::Resolved).empty());
  const auto summary = svc.metrics_summary();
  EXPECT_EQ(summary.at("samples"), 6);
  EXPECT_EQ(summary.at("status").at("awaiting_review"), 2);
  EXPECT_EQ(summary.at("alerts").at("open"), 2);
}

TEST_F(ServiceTest, ResolveReleasesSample) {
  auto svc = make();
  svc.process_pending();
  const std::string id = svc.sample_ids()[0];
  const auto alert = svc.alert(id + "-pose");
  const auto [resolved, result] = svc.resolve_alert(id + "-pose", alert.ai_value, "tech");
  ASSERT_TRUE(resolved.resolution);
  EXPECT_EQ(resolved.resolution->resolver, "tech");
  EXPECT_EQ(resolved.resolution->timestamp, kStamp);
  EXPECT_EQ(result.status, ResultStatus::Completed);
  ASSERT_TRUE(result.skeleton);
  EXPECT_EQ(result.skeleton->view, alert.ai_value ? View::Lateral : View::Dorsal);
  EXPECT_EQ(svc.result(id), result);
  EXPECT_THROW(svc.resolve_alert(id + "-pose", true, "tech"), AlreadyResolved);
  EXPECT_THROW(svc.resolve_alert("nope-pose", true, "tech"), NotFound);
  EXPECT_EQ(svc.alerts(AlertFilter::Resolved).size(), 1u);
  EXPECT_EQ(svc.process_pending(), 0u);
}

TEST_F(ServiceTest, RestartRestoresState) {
  StoreState before;
  {
    auto svc = make();
    svc.process_pending();
    svc.resolve_alert(svc.sample_ids()[1] + "-rostrum", false, "tech");
    before = svc.snapshot();
  }
  auto svc = make();
  EXPECT_EQ(svc.snapshot(), before);
  EXPECT_TRUE(svc.warnings().empty());
  EXPECT_EQ(svc.process_pending(), 0u);
}

TEST_F(ServiceTest, Lookups) {
  auto svc = make();
  EXPECT_THROW(svc.result("synth-000000"), NotFound);
  EXPECT_THROW(svc.process("missing"), NotFound);
  EXPECT_THROW(svc.image_ppm("missing"), NotFound);
  EXPECT_THROW(svc.alert("missing"), NotFound);
  EXPECT_EQ(svc.image_ppm(svc.sample_ids()[0]).rfind("P6\n", 0), 0u);
  auto corpus = service_corpus();
  corpus.push_back(corpus.front());
  EXPECT_THROW(PipelineService(corpus, testutil::pipeline_fixture().models, dir / "dup.log"),
               InvalidArgument);
}

namespace {

struct Server {
  explicit Server(PipelineService& svc) : api(svc) {
    port = api.bind("127.0.0.1", 0);
    thread = std::thread([this] { api.listen(); });
    while (!api.running()) std::this_thread::yield();
  }
  ~Server() {
    api.stop();
    thread.join();
  }
  HttpApi api;
  int port = 0;
  std::thread thread;
};

}  // namespace

TEST_F(ServiceTest, HttpApi) {
  auto svc = make();
  Server server(svc);
  httplib::Client cli("127.0.0.1", server.port);

  auto r = cli.Get("/api/alerts?status=open");
  ASSERT_TRUE(r);
  EXPECT_EQ(r->status, 200);
  EXPECT_EQ(json::parse(r->body), json::array());

  svc.process_pending();
  const std::string id = svc.sample_ids()[0];
  r = cli.Get("/api/alerts?status=open");
  const auto open = json::parse(r->body);
  ASSERT_EQ(open.size(), 2u);
  EXPECT_EQ(open[0].at("alert_id"), id + "-pose");
  EXPECT_EQ(open[0].at("status"), "open");
  EXPECT_EQ(cli.Get("/api/alerts?status=bogus")->status, 400);

  r = cli.Get(("/api/alerts/" + id + "-pose").c_str());
  EXPECT_EQ(r->status, 200);
  EXPECT_EQ(json::parse(r->body).at("sample_id"), id);
  EXPECT_EQ(cli.Get("/api/alerts/unknown")->status, 404);

  const std::string resolve = "/api/alerts/" + id + "-pose/resolve";
  EXPECT_EQ(cli.Post(resolve.c_str(), "{", "application/json")->status, 400);
  EXPECT_EQ(cli.Post(resolve.c_str(), R"({"resolved_value": true})", "application/json")->status, 400);
  EXPECT_EQ(cli.Post(resolve.c_str(), R"({"resolved_value": 1, "resolver": "x"})", "application/json")->status, 400);
  r = cli.Post(resolve.c_str(), R"({"resolved_value": true, "resolver": "tech"})", "application/json");
  ASSERT_EQ(r->status, 200);
  const auto body = json::parse(r->body);
  EXPECT_EQ(body.at("alert").at("status"), "resolved");
  EXPECT_EQ(body.at("alert").at("resolution").at("resolver"), "tech");
  EXPECT_EQ(body.at("result").at("status"), "completed");
  r = cli.Post(resolve.c_str(), R"({"resolved_value": true, "resolver": "tech"})", "application/json");
  EXPECT_EQ(r->status, 409);
  EXPECT_TRUE(json::parse(r->body).contains("error"));
  EXPECT_EQ(cli.Post("/api/alerts/nope/resolve", R"({"resolved_value": true, "resolver": "t"})",
                     "application/json")->status, 404);

  r = cli.Get("/api/alerts?status=resolved");
  EXPECT_EQ(json::parse(r->body).size(), 1u);
  r = cli.Get(("/api/samples/" + id + "/result").c_str());
  EXPECT_EQ(r->status, 200);
  EXPECT_EQ(result_from_json(json::parse(r->body)), svc.result(id));
  EXPECT_EQ(cli.Get("/api/samples/missing/result")->status, 404);

  r = cli.Get(("/api/samples/" + id + "/image").c_str());
  EXPECT_EQ(r->status, 200);
  EXPECT_EQ(r->get_header_value("Content-Type"), "image/x-portable-pixmap");
  EXPECT_EQ(r->body, svc.image_ppm(id));
  EXPECT_EQ(cli.Get("/api/samples/missing/image")->status, 404);

  r = cli.Get("/api/metrics/summary");
  EXPECT_EQ(r->status, 200);
  EXPECT_EQ(json::parse(r->body), svc.metrics_summary());
  EXPECT_EQ(r->get_header_value("Access-Control-Allow-Origin"), "*");
}

TEST_F(ServiceTest, BindConflict) {
  auto svc = make();
  Server first(svc);
  HttpApi second(svc);
  EXPECT_THROW(second.bind("127.0.0.1", first.port), BindError);
}
