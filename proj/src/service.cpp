#include "shrimpmorph/service.hpp"

#include <chrono>
#include <cmath>
#include <ctime>
#include <mutex>

#include "shrimpmorph/errors.hpp"
#include "shrimpmorph/metrics.hpp"

namespace shrimpmorph {

using nlohmann::json;

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

AlertFilter parse_alert_filter(std::string_view text) {
  if (text == "all") return AlertFilter::All;
  if (text == "open") return AlertFilter::Open;
  if (text == "resolved") return AlertFilter::Resolved;
  throw InvalidArgument("alert status filter must be all, open or resolved");
}

namespace {

std::map<std::string, SampleRecord> index_samples(std::vector<SampleRecord> samples) {
  std::map<std::string, SampleRecord> out;
  for (auto& s : samples) {
    const std::string id = s.sample_id;
    if (!out.emplace(id, std::move(s)).second) throw InvalidArgument("duplicate sample id " + id);
  }
  return out;
}

}  // namespace

PipelineService::PipelineService(std::vector<SampleRecord> samples, PipelineModels models,
                                 std::filesystem::path store, Clock clock)
    : samples_(index_samples(std::move(samples))),
      models_(std::move(models)),
      clock_(std::move(clock)),
      log_(std::move(store)) {}

std::vector<std::string> PipelineService::warnings() const {
  std::shared_lock lock(mutex_);
  return log_.warnings();
}

const SampleRecord& PipelineService::sample_locked(const std::string& sample_id) const {
  auto it = samples_.find(sample_id);
  if (it == samples_.end()) throw NotFound("no sample " + sample_id);
  return it->second;
}

PipelineResult PipelineService::process_locked(const SampleRecord& sample) {
  LabelOverrides overrides;
  const auto& alerts = log_.state().alerts;
  for (AssessmentKind kind : {AssessmentKind::Pose, AssessmentKind::Rostrum}) {
    auto it = alerts.find(alert_id_for(sample.sample_id, kind));
    if (it == alerts.end() || it->second.open()) continue;
    (kind == AssessmentKind::Pose ? overrides.pose : overrides.rostrum) =
        it->second.resolution->resolved_value;
  }
  PipelineResult result = run_pipeline(sample, models_, overrides);
  for (const auto& alert : alerts_of(result)) {
    if (log_.state().alerts.count(alert.alert_id) == 0) log_.append_alert(alert);
  }
  log_.append_result(result);
  return result;
}

PipelineResult PipelineService::process(const std::string& sample_id) {
  std::unique_lock lock(mutex_);
  return process_locked(sample_locked(sample_id));
}

std::size_t PipelineService::process_pending() {
  std::unique_lock lock(mutex_);
  std::size_t n = 0;
  for (const auto& [id, sample] : samples_) {
    const auto& state = log_.state();
    auto it = state.results.find(id);
    if (it != state.results.end()) {
      if (it->second.status != ResultStatus::AwaitingReview) continue;
      bool open = false;
      for (const auto& alert : alerts_of(it->second)) {
        auto a = state.alerts.find(alert.alert_id);
        open = open || a == state.alerts.end() || a->second.open();
      }
      if (open) continue;
    }
    process_locked(sample);
    ++n;
  }
  return n;
}

std::pair<AlertRecord, PipelineResult> PipelineService::resolve_alert(const std::string& alert_id,
                                                                      bool resolved_value,
                                                                      const std::string& resolver) {
  std::unique_lock lock(mutex_);
  AlertRecord alert = log_.append_resolution(alert_id, {resolved_value, resolver, clock_()});
  auto it = samples_.find(alert.sample_id);
  if (it == samples_.end()) {
    throw NotFound("alert " + alert_id + " refers to unknown sample " + alert.sample_id);
  }
  PipelineResult result = process_locked(it->second);
  return {std::move(alert), std::move(result)};
}

std::vector<AlertRecord> PipelineService::alerts(AlertFilter filter) const {
  std::shared_lock lock(mutex_);
  std::vector<AlertRecord> out;
  for (const auto& [id, a] : log_.state().alerts) {
    if (filter == AlertFilter::Open && !a.open()) continue;
    if (filter == AlertFilter::Resolved && a.open()) continue;
    out.push_back(a);
  }
  return out;
}

AlertRecord PipelineService::alert(const std::string& alert_id) const {
  std::shared_lock lock(mutex_);
  auto it = log_.state().alerts.find(alert_id);
  if (it == log_.state().alerts.end()) throw NotFound("no alert " + alert_id);
  return it->second;
}

PipelineResult PipelineService::result(const std::string& sample_id) const {
  std::shared_lock lock(mutex_);
  auto it = log_.state().results.find(sample_id);
  if (it == log_.state().results.end()) throw NotFound("no result for sample " + sample_id);
  return it->second;
}

std::string PipelineService::image_ppm(const std::string& sample_id) const {
  std::shared_lock lock(mutex_);
  return encode_ppm(sample_locked(sample_id).raster);
}

std::vector<std::string> PipelineService::sample_ids() const {
  std::vector<std::string> out;
  for (const auto& [id, s] : samples_) out.push_back(id);
  return out;
}

StoreState PipelineService::snapshot() const {
  std::shared_lock lock(mutex_);
  return log_.state();
}

json PipelineService::metrics_summary() const {
  std::shared_lock lock(mutex_);
  const auto& state = log_.state();
  std::map<std::string, int> status_counts{{"completed", 0}, {"awaiting_review", 0}, {"failed", 0}};
  std::vector<VirtualSkeleton> preds, gts;
  std::size_t wrong_variant = 0;
  double abs_err = 0.0;
  std::size_t n_cm = 0;
  for (const auto& [id, r] : state.results) {
    ++status_counts[std::string(to_string(r.status))];
    if (r.status != ResultStatus::Completed) continue;
    auto s = samples_.find(id);
    if (s == samples_.end()) continue;
    const SampleRecord& sample = s->second;
    if (sample.gt_skeleton) {
      if (variant_of(*sample.gt_skeleton) == variant_of(*r.skeleton)) {
        preds.push_back(*r.skeleton);
        gts.push_back(*sample.gt_skeleton);
      } else {
        ++wrong_variant;
      }
    }
    if (sample.gt_measurements_cm && r.measurements_cm) {
      for (const auto& [name, value] : r.measurements_cm->values()) {
        if (auto truth = sample.gt_measurements_cm->get(name)) {
          abs_err += std::abs(value - *truth);
          ++n_cm;
        }
      }
    }
  }
  std::size_t open = 0;
  for (const auto& [id, a] : state.alerts) open += a.open() ? 1 : 0;
  json pose = {{"samples", gts.size()}, {"wrong_variant", wrong_variant}, {"pck_10px", nullptr},
               {"map_50_95", nullptr}};
  if (!gts.empty()) {
    pose["pck_10px"] = pck(preds, gts, 10.0);
    pose["map_50_95"] = map_50_95(preds, gts, OksParams::uniform());
  }
  return {{"samples", samples_.size()},
          {"results", state.results.size()},
          {"status", status_counts},
          {"alerts", {{"open", open}, {"resolved", state.alerts.size() - open}}},
          {"pose", pose},
          {"conversion", {{"values", n_cm}, {"mae_cm", n_cm ? json(abs_err / n_cm) : json(nullptr)}}}};
}

}  // namespace shrimpmorph
