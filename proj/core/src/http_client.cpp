#include "http_client.hpp"

#include <httplib.h>

#include "rtrace/error.hpp"

namespace rtrace::detail {

HttpTarget parse_base_url(const std::string& base_url) {
  const auto scheme_end = base_url.find("://");
  if (scheme_end == std::string::npos) throw Error(Errc::MalformedDocument, "base_url needs a scheme: " + base_url);
  const auto path_begin = base_url.find('/', scheme_end + 3);
  HttpTarget t;
  if (path_begin == std::string::npos) {
    t.scheme_host_port = base_url;
  } else {
    t.scheme_host_port = base_url.substr(0, path_begin);
    t.path_prefix = base_url.substr(path_begin);
    while (!t.path_prefix.empty() && t.path_prefix.back() == '/') t.path_prefix.pop_back();
  }
  return t;
}

HttpAttempt post_json_once(const HttpTarget& target, const std::string& path, const std::string& body,
                           const std::vector<std::pair<std::string, std::string>>& headers,
                           std::chrono::seconds timeout) {
  HttpAttempt attempt;
  try {
    httplib::Client client(target.scheme_host_port);
    client.set_connection_timeout(timeout);
    client.set_read_timeout(timeout);
    client.set_write_timeout(timeout);
    httplib::Headers h;
    for (const auto& [k, v] : headers) h.emplace(k, v);
    auto res = client.Post(target.path_prefix + path, h, body, "application/json");
    if (!res) {
      attempt.transport_error = httplib::to_string(res.error());
      return attempt;
    }
    attempt.reply = HttpReply{res->status, res->body};
  } catch (const std::exception& e) {
    attempt.transport_error = e.what();
  }
  return attempt;
}

RetryOutcome post_json_with_retries(const HttpTarget& target, const std::string& path, const std::string& body,
                                    const std::vector<std::pair<std::string, std::string>>& headers,
                                    std::chrono::seconds timeout, const RetryPolicy& policy, const Sleeper& sleep) {
  RetryOutcome out;
  for (int attempt = 0; attempt <= policy.max_retries; ++attempt) {
    if (attempt > 0) sleep(policy.delay_before_retry(attempt));
    ++out.attempts;
    auto a = post_json_once(target, path, body, headers, timeout);
    if (a.reply && a.reply->status < 500) {
      out.reply = std::move(a.reply);
      return out;
    }
    out.last_error = a.reply ? "HTTP " + std::to_string(a.reply->status) + ": " + a.reply->body : a.transport_error;
  }
  return out;
}

}  // namespace rtrace::detail
