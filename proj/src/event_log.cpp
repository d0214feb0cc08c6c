#include "shrimpmorph/event_log.hpp"

#include <zlib.h>

#include <cstdio>

#include "shrimpmorph/errors.hpp"

namespace shrimpmorph {

using nlohmann::json;

namespace {

std::string crc_hex(const std::string& s) {
  const auto crc = crc32(0L, reinterpret_cast<const Bytef*>(s.data()), static_cast<uInt>(s.size()));
  char buf[16];
  std::snprintf(buf, sizeof buf, "%08lx", static_cast<unsigned long>(crc));
  return buf;
}

// Applies one event; throws CorruptRecord on inconsistent history.
void apply_event(StoreState& state, const json& event) {
  const auto type = event.at("type").get<std::string>();
  if (type == "result") {
    PipelineResult r = result_from_json(event.at("result"));
    state.results[r.sample_id] = std::move(r);
  } else if (type == "alert") {
    AlertRecord a = alert_from_json(event.at("alert"));
    state.alerts[a.alert_id] = std::move(a);
  } else if (type == "resolution") {
    const auto id = event.at("alert_id").get<std::string>();
    auto it = state.alerts.find(id);
    if (it == state.alerts.end() || !it->second.open()) {
      throw CorruptRecord("resolution of unknown or resolved alert " + id);
    }
    const auto& r = event.at("resolution");
    it->second.resolution = Resolution{r.at("resolved_value").get<bool>(),
                                       r.at("resolver").get<std::string>(),
                                       r.at("timestamp").get<std::string>()};
  } else {
    throw CorruptRecord("unknown record type '" + type + "'");
  }
  ++state.records;
}

}  // namespace

std::string encode_record(std::uint64_t seq, const json& event) {
  json line = event;
  line["seq"] = seq;
  const std::string body = line.dump();
  return body + "\t" + crc_hex(body) + "\n";
}

LogReplay replay_log_text(const std::string& bytes) {
  LogReplay out;
  std::size_t pos = 0;
  std::uint64_t line_no = 0;
  while (pos < bytes.size()) {
    const std::size_t nl = bytes.find('\n', pos);
    ++line_no;
    if (nl == std::string::npos) {
      out.warnings.push_back("ignoring torn record at line " + std::to_string(line_no) + " (" +
                             std::to_string(bytes.size() - pos) + " bytes without terminator)");
      break;
    }
    const std::string line = bytes.substr(pos, nl - pos);
    const std::string where = "record at line " + std::to_string(line_no);
    const std::size_t tab = line.rfind('\t');
    if (tab == std::string::npos || line.size() - tab - 1 != 8) {
      throw CorruptRecord(where + " has no checksum");
    }
    const std::string body = line.substr(0, tab);
    if (crc_hex(body) != line.substr(tab + 1)) throw CorruptRecord(where + " fails its checksum");
    try {
      const json event = json::parse(body);
      if (event.at("seq").get<std::uint64_t>() != out.state.records + 1) {
        throw CorruptRecord(where + " is out of sequence");
      }
      apply_event(out.state, event);
    } catch (const json::exception& e) {
      throw CorruptRecord(where + ": " + e.what());
    } catch (const CorruptRecord&) {
      throw;
    } catch (const Error& e) {
      throw CorruptRecord(where + ": " + e.what());
    }
    pos = nl + 1;
  }
  out.valid_bytes = pos;
  return out;
}

LogReplay replay_log(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) return {};
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open store " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return replay_log_text(bytes);
}

EventLog::EventLog(std::filesystem::path path) : path_(std::move(path)) {
  LogReplay replay = replay_log(path_);
  state_ = std::move(replay.state);
  warnings_ = std::move(replay.warnings);
  if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path());
  if (std::filesystem::exists(path_) && std::filesystem::file_size(path_) != replay.valid_bytes) {
    std::filesystem::resize_file(path_, replay.valid_bytes);
  }
  out_.open(path_, std::ios::binary | std::ios::app);
  if (!out_) throw IoError("cannot open store " + path_.string() + " for writing");
}

void EventLog::write(const json& event) {
  StoreState next = state_;
  json stamped = event;
  stamped["seq"] = next.records + 1;
  apply_event(next, stamped);
  out_ << encode_record(next.records, event);
  out_.flush();
  if (!out_) throw IoError("write to " + path_.string() + " failed");
  state_ = std::move(next);
}

void EventLog::append_result(const PipelineResult& result) {
  write({{"type", "result"}, {"result", to_json(result)}});
}

void EventLog::append_alert(const AlertRecord& alert) {
  if (!alert.open()) throw InvalidArgument("new alerts must be unresolved");
  write({{"type", "alert"}, {"alert", to_json(alert)}});
}

AlertRecord EventLog::append_resolution(const std::string& alert_id, const Resolution& resolution) {
  auto it = state_.alerts.find(alert_id);
  if (it == state_.alerts.end()) throw NotFound("no alert " + alert_id);
  if (!it->second.open()) throw AlreadyResolved("alert " + alert_id + " is already resolved");
  write({{"type", "resolution"},
         {"alert_id", alert_id},
         {"resolution",
          {{"resolved_value", resolution.resolved_value},
           {"resolver", resolution.resolver},
           {"timestamp", resolution.timestamp}}}});
  return state_.alerts.at(alert_id);
}

}  // namespace shrimpmorph
