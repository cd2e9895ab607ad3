// Copyright 2026 The SemProbe Authors
// SPDX-License-Identifier: Apache-2.0

#include <json.hpp>

#include "http_util.hpp"
#include "semprobe/catalog.hpp"

namespace semprobe {

HttpLlmClient::HttpLlmClient(std::string base_url, std::chrono::milliseconds timeout)
    : base_url_(std::move(base_url)), timeout_(timeout) {}

std::string HttpLlmClient::draft_catalog(std::string_view odd_text) {
  const auto ep = detail::parse_endpoint(base_url_);
  auto client = detail::make_client(ep, timeout_);
  const nlohmann::json body = {{"odd_text", odd_text}};
  return detail::expect_ok(
             client->Post(ep.base_path + "/draft_catalog", body.dump(), "application/json"),
             "llm draft")
      .body;
}

}  // namespace semprobe
