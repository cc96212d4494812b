#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "rtrace/api.hpp"

namespace httplib {
class Server;
}

namespace rtrace::cli {

/// Routes /api/* to the service; everything else is left to the server.
void mount_api(httplib::Server& server, ApiService& service);

struct ServeOptions {
  std::string host = "127.0.0.1";
  int port = 8642;
  std::optional<std::filesystem::path> ui_dir;
};

/// Blocks until the server stops. Returns false if the port could not be bound.
bool serve(ApiService& service, const ServeOptions& options);

}  // namespace rtrace::cli
