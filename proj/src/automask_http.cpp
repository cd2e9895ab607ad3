// Copyright 2026 The SemProbe Authors
// SPDX-License-Identifier: Apache-2.0

#include <json.hpp>

#include "http_util.hpp"
#include "semprobe/masking.hpp"

namespace semprobe {

HttpAutoMaskClient::HttpAutoMaskClient(std::string base_url, std::chrono::milliseconds timeout)
    : base_url_(std::move(base_url)), timeout_(timeout) {}

Bytes HttpAutoMaskClient::segment(const ImageRef&, std::span<const std::uint8_t> image_png,
                                  std::string_view prompt) {
  const auto ep = detail::parse_endpoint(base_url_);
  auto client = detail::make_client(ep, timeout_);
  const nlohmann::json body = {{"image", base64_encode(image_png)}, {"prompt", prompt}};
  const auto& res = detail::expect_ok(
      client->Post(ep.base_path + "/segment", body.dump(), "application/json"), "auto-mask");
  try {
    const auto reply = nlohmann::json::parse(res.body);
    return base64_decode(reply.at("mask").get<std::string>());
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kProtocol, std::string("auto-mask reply malformed: ") + e.what());
  } catch (const Error& e) {
    fail(ErrorCode::kProtocol, std::string("auto-mask reply malformed: ") + e.what());
  }
}

}  // namespace semprobe
