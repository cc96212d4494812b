#include "server.hpp"

#include <httplib.h>

#include <iostream>

namespace rtrace::cli {

namespace {

void reply(httplib::Response& res, const ApiResponse& r) {
  res.status = r.status;
  res.set_content(r.body.dump(), "application/json");
}

QueryParams query_of(const httplib::Request& req) {
  QueryParams q;
  for (const auto& [k, v] : req.params) q.emplace(k, v);
  return q;
}

}  // namespace

void mount_api(httplib::Server& server, ApiService& service) {
  server.Get(R"(/api/.*)", [&service](const httplib::Request& req, httplib::Response& res) {
    reply(res, service.handle("GET", req.path, query_of(req), {}));
  });
  server.Post(R"(/api/.*)", [&service](const httplib::Request& req, httplib::Response& res) {
    reply(res, service.handle("POST", req.path, query_of(req), req.body));
  });
}

bool serve(ApiService& service, const ServeOptions& options) {
  httplib::Server server;
  mount_api(server, service);
  if (options.ui_dir && !server.set_mount_point("/", options.ui_dir->string())) {
    std::cerr << "ui directory not found: " << options.ui_dir->string() << "\n";
    return false;
  }
  if (!server.bind_to_port(options.host, options.port)) return false;
  std::cerr << "listening on http://" << options.host << ":" << options.port << "\n";
  return server.listen_after_bind();
}

}  // namespace rtrace::cli
