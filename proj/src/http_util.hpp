// Copyright 2026 The SemProbe Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <httplib.h>

#include <chrono>
#include <memory>
#include <string>

#include "semprobe/error.hpp"

namespace semprobe::detail {

struct Endpoint {
  std::string origin;     // scheme://host:port
  std::string base_path;  // "" or "/prefix" without trailing slash
};

inline Endpoint parse_endpoint(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) {
    fail(ErrorCode::kInvalidArgument, "backend URL needs a scheme: " + url);
  }
  const auto path_start = url.find('/', scheme_end + 3);
  Endpoint ep;
  ep.origin = url.substr(0, path_start);
  if (path_start != std::string::npos) {
    ep.base_path = url.substr(path_start);
    while (!ep.base_path.empty() && ep.base_path.back() == '/') ep.base_path.pop_back();
  }
  return ep;
}

inline std::unique_ptr<httplib::Client> make_client(const Endpoint& ep,
                                                    std::chrono::milliseconds timeout) {
  auto client = std::make_unique<httplib::Client>(ep.origin);
  const auto secs = std::chrono::duration_cast<std::chrono::seconds>(timeout);
  const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(timeout - secs);
  client->set_connection_timeout(secs.count(), usecs.count());
  client->set_read_timeout(secs.count(), usecs.count());
  client->set_write_timeout(secs.count(), usecs.count());
  return client;
}

/// Maps transport failures and non-200 statuses onto the error contract.
inline httplib::Response expect_ok(httplib::Result res, const std::string& what) {
  if (!res) {
    const auto err = res.error();
    if (err == httplib::Error::Read || err == httplib::Error::Write) {
      // Read timeouts surface as read errors in cpp-httplib.
      fail(ErrorCode::kTimeout, what + ": " + httplib::to_string(err));
    }
    fail(ErrorCode::kBackendUnavailable, what + ": " + httplib::to_string(err));
  }
  if (res->status != 200) {
    fail(ErrorCode::kBackendUnavailable,
         what + ": HTTP " + std::to_string(res->status) + " " + res->body.substr(0, 200));
  }
  return std::move(*res);
}

}  // namespace semprobe::detail
