#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>

#include "rtrace/analytics.hpp"
#include "rtrace/domain.hpp"
#include "rtrace/store_triage.hpp"

namespace rtrace {

struct ApiResponse {
  int status = 200;
  json body;
};

using QueryParams = std::map<std::string, std::string>;

/// JSON endpoints over one run directory, independent of any HTTP server:
///   GET  /api/manifest
///   GET  /api/stats
///   GET  /api/codes/{code}/distribution
///   GET  /api/queue?status=open&limit=N
///   GET  /api/cases/{id}
///   POST /api/cases/{id}/adjudication   {reviewer, resolved_decision, codebook_note}
/// Errors carry {"error": kind, "message": text}. Safe to call concurrently.
class ApiService {
 public:
  explicit ApiService(std::filesystem::path run_dir, std::optional<double> tau = std::nullopt);

  ApiResponse handle(std::string_view method, std::string_view path, const QueryParams& query,
                     std::string_view body);

  const Codebook& codebook() const noexcept { return codebook_; }
  double tau() const noexcept { return tau_; }

 private:
  ApiResponse manifest();
  ApiResponse stats();
  ApiResponse distribution(std::string_view code);
  ApiResponse queue(const QueryParams& query);
  ApiResponse case_detail(const std::string& case_id);
  ApiResponse adjudicate(const std::string& case_id, std::string_view body);

  RunStore store_;
  Codebook codebook_;
  double tau_;
};

}  // namespace rtrace
