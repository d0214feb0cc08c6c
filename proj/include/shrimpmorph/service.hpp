#pragma once

// Long-lived pipeline state behind the CLI and the HTTP API: the sample
// corpus, loaded models and the event log. Reads run concurrently; every
// mutation goes through one writer lock.

#include <functional>
#include <map>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include "shrimpmorph/event_log.hpp"
#include "shrimpmorph/pipeline.hpp"

namespace shrimpmorph {

/// Current UTC time as YYYY-MM-DDTHH:MM:SSZ.
std::string utc_timestamp();

enum class AlertFilter { All, Open, Resolved };
AlertFilter parse_alert_filter(std::string_view text);  // all | open | resolved

class PipelineService {
public:
  using Clock = std::function<std::string()>;

  /// Replays the store. Throws InvalidArgument on duplicate sample ids,
  /// IoError, CorruptRecord.
  PipelineService(std::vector<SampleRecord> samples, PipelineModels models,
                  std::filesystem::path store, Clock clock = utc_timestamp);

  /// Warnings raised while replaying the store.
  std::vector<std::string> warnings() const;

  /// Runs one sample with the labels of its resolved alerts, records newly
  /// raised alerts and the result. Throws NotFound.
  PipelineResult process(const std::string& sample_id);

  /// Processes, in sample-id order, every sample without a stored result
  /// and every AwaitingReview sample whose alerts are all resolved.
  /// Returns the number of samples processed.
  std::size_t process_pending();

  /// Stores the resolution and reprocesses the sample. Throws NotFound,
  /// AlreadyResolved.
  std::pair<AlertRecord, PipelineResult> resolve_alert(const std::string& alert_id,
                                                       bool resolved_value,
                                                       const std::string& resolver);

  std::vector<AlertRecord> alerts(AlertFilter filter = AlertFilter::All) const;
  AlertRecord alert(const std::string& alert_id) const;              // NotFound
  PipelineResult result(const std::string& sample_id) const;         // NotFound
  std::string image_ppm(const std::string& sample_id) const;         // NotFound
  std::vector<std::string> sample_ids() const;

  /// Status and alert counts, plus pose and conversion accuracy against the
  /// ground truth of completed samples where it exists.
  nlohmann::json metrics_summary() const;

  StoreState snapshot() const;

private:
  PipelineResult process_locked(const SampleRecord& sample);
  const SampleRecord& sample_locked(const std::string& sample_id) const;

  std::map<std::string, SampleRecord> samples_;
  PipelineModels models_;
  Clock clock_;
  mutable std::shared_mutex mutex_;
  EventLog log_;
};

}  // namespace shrimpmorph
