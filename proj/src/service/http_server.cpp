#include <httplib.h>

#include "cmib/service/service.hpp"

namespace cmib::service {

struct HttpServer::Impl {
  Impl(InferenceService& s, ServerOptions o) : service(s), opts(std::move(o)) {}
  InferenceService& service;
  ServerOptions opts;
  httplib::Server server;
};

HttpServer::HttpServer(InferenceService& service, ServerOptions opts)
    : impl_(std::make_unique<Impl>(service, std::move(opts))) {
  auto& server = impl_->server;
  auto& svc = impl_->service;
  if (!impl_->opts.cors_origin.empty()) {
    server.set_default_headers({{"Access-Control-Allow-Origin", impl_->opts.cors_origin},
                                {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"},
                                {"Access-Control-Allow-Headers", "Content-Type"}});
  }
  auto reply = [](httplib::Response& res, const Response& r) {
    res.status = r.status;
    res.set_content(r.body, "application/json");
  };
  server.Post("/v1/infill", [&svc, reply](const httplib::Request& req, httplib::Response& res) {
    reply(res, svc.handle_infill(req.body));
  });
  server.Get("/v1/metadata", [&svc, reply](const httplib::Request&, httplib::Response& res) {
    reply(res, svc.handle_metadata());
  });
  server.Get("/v1/poses", [&svc, reply](const httplib::Request&, httplib::Response& res) {
    reply(res, svc.handle_poses());
  });
  server.Get("/healthz", [&svc, reply](const httplib::Request&, httplib::Response& res) {
    reply(res, svc.handle_health());
  });
  server.Options(R"(/.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });
}

HttpServer::~HttpServer() = default;

int HttpServer::bind() {
  const auto& o = impl_->opts;
  int port = o.port;
  if (port == 0) {
    port = impl_->server.bind_to_any_port(o.host);
    if (port < 0) port = 0;
  } else if (!impl_->server.bind_to_port(o.host, port)) {
    port = 0;
  }
  if (port == 0) throw IoError("cannot bind " + o.host + ":" + std::to_string(o.port));
  return port;
}

void HttpServer::listen() { impl_->server.listen_after_bind(); }

void HttpServer::stop() { impl_->server.stop(); }

void run_server(InferenceService& service, const ServerOptions& opts) {
  HttpServer server(service, opts);
  server.bind();
  server.listen();
}

}  // namespace cmib::service
