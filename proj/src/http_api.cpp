#include "shrimpmorph/http_api.hpp"

#include <httplib.h>

#include "shrimpmorph/errors.hpp"

namespace shrimpmorph {

using nlohmann::json;

struct HttpApi::Impl {
  PipelineService& service;
  httplib::Server server;
  explicit Impl(PipelineService& s) : service(s) {}
};

namespace {

void send_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, const std::string& message) {
  send_json(res, status, {{"error", message}});
}

// Maps library errors to HTTP statuses.
template <class F>
void guarded(httplib::Response& res, F&& f) {
  try {
    f();
  } catch (const NotFound& e) {
    send_error(res, 404, e.what());
  } catch (const AlreadyResolved& e) {
    send_error(res, 409, e.what());
  } catch (const InvalidArgument& e) {
    send_error(res, 400, e.what());
  } catch (const json::exception& e) {
    send_error(res, 400, std::string("bad request body: ") + e.what());
  } catch (const std::exception& e) {
    send_error(res, 500, e.what());
  }
}

json to_json_list(const std::vector<AlertRecord>& alerts) {
  json out = json::array();
  for (const auto& a : alerts) out.push_back(to_json(a));
  return out;
}

}  // namespace

HttpApi::HttpApi(PipelineService& service) : impl_(std::make_unique<Impl>(service)) {
  auto& srv = impl_->server;
  PipelineService& svc = impl_->service;

  // SO_REUSEADDR only: with SO_REUSEPORT a second server could share a busy port.
  srv.set_socket_options([](socket_t sock) {
    int yes = 1;
    setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, reinterpret_cast<const void*>(&yes), sizeof(yes));
  });
  srv.set_default_headers({{"Access-Control-Allow-Origin", "*"}});
  srv.Options(R"(/api/.*)", [](const httplib::Request&, httplib::Response& res) {
    res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
    res.set_header("Access-Control-Allow-Headers", "Content-Type");
    res.status = 204;
  });

  srv.Get("/api/alerts", [&svc](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const auto filter = parse_alert_filter(req.has_param("status") ? req.get_param_value("status") : "all");
      send_json(res, 200, to_json_list(svc.alerts(filter)));
    });
  });

  srv.Get(R"(/api/alerts/([^/]+))", [&svc](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] { send_json(res, 200, to_json(svc.alert(req.matches[1]))); });
  });

  srv.Post(R"(/api/alerts/([^/]+)/resolve)", [&svc](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const json body = json::parse(req.body);
      if (!body.is_object() || !body.contains("resolved_value") || !body["resolved_value"].is_boolean()) {
        throw InvalidArgument("body needs a boolean resolved_value");
      }
      const std::string resolver = body.value("resolver", std::string());
      if (resolver.empty()) throw InvalidArgument("body needs a nonempty resolver");
      auto [alert, result] = svc.resolve_alert(req.matches[1], body["resolved_value"].get<bool>(), resolver);
      send_json(res, 200, {{"alert", to_json(alert)}, {"result", to_json(result)}});
    });
  });

  srv.Get(R"(/api/samples/([^/]+)/image)", [&svc](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      res.status = 200;
      res.set_content(svc.image_ppm(req.matches[1]), "image/x-portable-pixmap");
    });
  });

  srv.Get(R"(/api/samples/([^/]+)/result)", [&svc](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] { send_json(res, 200, to_json(svc.result(req.matches[1]))); });
  });

  srv.Get("/api/metrics/summary", [&svc](const httplib::Request&, httplib::Response& res) {
    guarded(res, [&] { send_json(res, 200, svc.metrics_summary()); });
  });
}

HttpApi::~HttpApi() { stop(); }

int HttpApi::bind(const std::string& host, int port) {
  int bound = -1;
  if (port == 0) {
    bound = impl_->server.bind_to_any_port(host);
  } else if (impl_->server.bind_to_port(host, port)) {
    bound = port;
  }
  if (bound < 0) throw BindError("cannot bind " + host + ":" + std::to_string(port));
  return bound;
}

void HttpApi::listen() { impl_->server.listen_after_bind(); }

void HttpApi::stop() {
  if (impl_) impl_->server.stop();
}

bool HttpApi::running() const { return impl_->server.is_running(); }

}  // namespace shrimpmorph
