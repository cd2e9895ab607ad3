// Copyright 2026 The SemProbe Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "semprobe/backends.hpp"
#include "semprobe/catalog.hpp"
#include "semprobe/error.hpp"
#include "semprobe/orchestration.hpp"

namespace httplib {
class Server;
}

namespace semprobe {

inline constexpr std::string_view kVersion = "0.1.0";

enum class ApiCode { kInvalidArgument, kNotFound, kBackendUnavailable, kValidation, kConflict, kInternal };

std::string_view to_string(ApiCode code);
int http_status(ApiCode code);  // 400, 404, 502, 422, 409, 500
ApiCode api_code_for(ErrorCode code);
ojson api_error_body(ApiCode code, std::string_view message, const ojson& detail = nullptr);

struct ServerConfig {
  std::string host = "127.0.0.1";
  int port = 8080;  // 0 picks a free port
  std::filesystem::path root = "semprobe-data";
  std::optional<std::filesystem::path> catalog_path;
  std::optional<std::filesystem::path> workflow_dir;
  std::size_t workers = 2;
  RetryPolicy retry;
};

/// The HTTP face of the coordinator. Handlers are stateless; everything
/// persistent lives under the artifacts root.
class ApiServer {
 public:
  ApiServer(ServerConfig config, BackendRegistry& backends);
  ~ApiServer();
  ApiServer(const ApiServer&) = delete;
  ApiServer& operator=(const ApiServer&) = delete;

  /// Binds the socket; returns the bound port. Throws Error(kIo) on failure.
  int bind();
  /// Serves until stop(); bind() must have succeeded.
  void serve();
  /// bind() + serve() on a background thread.
  int start();
  /// Graceful: running tasks finish their current stage first.
  void stop();

  Coordinator& coordinator() noexcept { return *coordinator_; }
  const std::optional<FactorCatalog>& catalog() const noexcept { return catalog_; }

 private:
  void install_routes();

  ServerConfig config_;
  BackendRegistry& backends_;
  WorkflowRegistry workflows_;
  std::optional<FactorCatalog> catalog_;
  std::unique_ptr<Coordinator> coordinator_;
  std::unique_ptr<httplib::Server> http_;
  std::thread thread_;
  bool bound_ = false;
};

/// Parses an API job specification against uploaded images/masks under
/// `root/uploads`. Errors: kInvalidArgument, kNotFound, kValidation.
ProbeJob job_from_request(const ojson& body, const std::filesystem::path& root,
                          const std::optional<FactorCatalog>& catalog);

/// Brush-stroke payload: [{"points": [[x, y], ...], "radius": r, "mode": "add"|"erase"}].
std::vector<BrushStroke> strokes_from_json(const ojson& strokes);

/// `semprobe run|verify|export|serve ...`; returns the process exit code
/// (0 completed / clean, 1 failed / findings, 2 usage error).
int run_cli(std::span<const std::string> args, std::ostream& out, std::ostream& err);

}  // namespace semprobe
