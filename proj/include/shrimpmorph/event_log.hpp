#pragma once

// Append-only store of pipeline results and alert mutations.
//
// One record per line: `<json>\t<crc32 of json, 8 lowercase hex>\n`, where
// the JSON object carries `seq` (1-based), `type` (result | alert |
// resolution) and the payload. An unterminated final line is a torn write and
// is dropped with a warning; any other damaged line is CorruptRecord.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "shrimpmorph/pipeline.hpp"

namespace shrimpmorph {

struct StoreState {
  std::map<std::string, PipelineResult> results;  // latest result per sample
  std::map<std::string, AlertRecord> alerts;
  std::uint64_t records = 0;

  friend bool operator==(const StoreState&, const StoreState&) = default;
};

struct LogReplay {
  StoreState state;
  std::vector<std::string> warnings;
  std::uint64_t valid_bytes = 0;  // length of the intact prefix
};

/// Throws CorruptRecord.
LogReplay replay_log_text(const std::string& bytes);
/// A missing file is an empty store. Throws IoError, CorruptRecord.
LogReplay replay_log(const std::filesystem::path& path);

/// Serialises one record line for the given state transition.
std::string encode_record(std::uint64_t seq, const nlohmann::json& event);

/// Single-writer handle. Opening replays the log and cuts a torn tail so
/// new records start on a clean line.
class EventLog {
public:
  explicit EventLog(std::filesystem::path path);

  const StoreState& state() const { return state_; }
  const std::vector<std::string>& warnings() const { return warnings_; }
  const std::filesystem::path& path() const { return path_; }

  void append_result(const PipelineResult& result);
  /// Records a newly raised alert. Throws InvalidArgument if it is resolved.
  void append_alert(const AlertRecord& alert);
  /// Throws NotFound, AlreadyResolved.
  AlertRecord append_resolution(const std::string& alert_id, const Resolution& resolution);

private:
  void write(const nlohmann::json& event);

  std::filesystem::path path_;
  StoreState state_;
  std::vector<std::string> warnings_;
  std::ofstream out_;
};

}  // namespace shrimpmorph
