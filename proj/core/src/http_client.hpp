#pragma once

#include <chrono>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "rtrace/retry.hpp"

namespace rtrace::detail {

struct HttpReply {
  int status = 0;
  std::string body;
};

// Outcome of one POST attempt; nullopt reply means a transport failure.
struct HttpAttempt {
  std::optional<HttpReply> reply;
  std::string transport_error;
};

struct HttpTarget {
  std::string scheme_host_port;  // "http://localhost:8000"
  std::string path_prefix;       // "/v1" or ""
};

HttpTarget parse_base_url(const std::string& base_url);

HttpAttempt post_json_once(const HttpTarget& target, const std::string& path, const std::string& body,
                           const std::vector<std::pair<std::string, std::string>>& headers,
                           std::chrono::seconds timeout);

struct RetryOutcome {
  std::optional<HttpReply> reply;  // final non-retryable reply, or a 2xx
  std::string last_error;          // set when retries were exhausted
  int attempts = 0;
};

/// Retries transport failures and 5xx replies; 2xx and 4xx return immediately.
/// The request body is passed by const reference and never modified.
RetryOutcome post_json_with_retries(const HttpTarget& target, const std::string& path, const std::string& body,
                                    const std::vector<std::pair<std::string, std::string>>& headers,
                                    std::chrono::seconds timeout, const RetryPolicy& policy, const Sleeper& sleep);

}  // namespace rtrace::detail
