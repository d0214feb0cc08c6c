#pragma once

// JSON-over-HTTP front of a PipelineService.
//
//   GET  /api/alerts?status=open|resolved|all   list of alerts
//   GET  /api/alerts/{id}                        one alert
//   POST /api/alerts/{id}/resolve                {"resolved_value": bool, "resolver": str}
//                                                200 {"alert", "result"}, 404, 409 when resolved
//   GET  /api/samples/{id}/image                 binary PPM of the RGB planes
//   GET  /api/samples/{id}/result                latest pipeline result
//   GET  /api/metrics/summary                    PipelineService::metrics_summary
//
// Errors carry {"error": message}.

#include <memory>
#include <string>

#include "shrimpmorph/service.hpp"

namespace shrimpmorph {

class HttpApi {
public:
  explicit HttpApi(PipelineService& service);
  ~HttpApi();
  HttpApi(const HttpApi&) = delete;
  HttpApi& operator=(const HttpApi&) = delete;

  /// Port 0 picks a free port. Returns the bound port; throws BindError.
  int bind(const std::string& host, int port);
  /// Blocks until stop().
  void listen();
  void stop();
  bool running() const;

private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace shrimpmorph
