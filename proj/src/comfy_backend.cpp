// Copyright 2026 The SemProbe Authors
// SPDX-License-Identifier: Apache-2.0

#include <json.hpp>

#include <chrono>
#include <thread>

#include "http_util.hpp"
#include "semprobe/generation.hpp"

namespace semprobe {

using nlohmann::json;

namespace {

json parse_reply(const std::string& body, const std::string& what) {
  try {
    return json::parse(body);
  } catch (const json::parse_error&) {
    fail(ErrorCode::kProtocol, what + ": reply is not JSON");
  }
}

// POST /upload/image; returns the server-side handle ("subfolder/name").
std::string upload(httplib::Client& client, const std::string& base, const std::string& name,
                   std::span<const std::uint8_t> png) {
  httplib::MultipartFormDataItems items = {
      {"image", std::string(png.begin(), png.end()), name, "image/png"},
      {"overwrite", "true", "", ""},
  };
  const auto& res = detail::expect_ok(client.Post(base + "/upload/image", items), "comfy upload");
  const auto reply = parse_reply(res.body, "comfy upload");
  if (!reply.contains("name") || !reply["name"].is_string()) {
    fail(ErrorCode::kProtocol, "comfy upload: reply lacks 'name'");
  }
  const auto sub = reply.value("subfolder", std::string());
  const auto file = reply["name"].get<std::string>();
  return sub.empty() ? file : sub + "/" + file;
}

struct OutputImage {
  std::string filename, subfolder, type;
};

std::optional<OutputImage> first_output_image(const json& outputs) {
  std::optional<OutputImage> fallback;
  for (const auto& [node, out] : outputs.items()) {
    if (!out.contains("images")) continue;
    for (const auto& img : out["images"]) {
      OutputImage o{img.value("filename", ""), img.value("subfolder", ""), img.value("type", "output")};
      if (o.filename.empty()) continue;
      if (o.type == "output") return o;
      if (!fallback) fallback = o;
    }
  }
  return fallback;
}

}  // namespace

ComfyBackend::ComfyBackend(std::string base_url, ComfyOptions options)
    : GenerationBackend(options.max_in_flight),
      base_url_(std::move(base_url)),
      options_(std::move(options)) {}

Bytes ComfyBackend::generate(const SampleRequest& request) {
  const auto ep = detail::parse_endpoint(base_url_);
  auto client = detail::make_client(ep, options_.request_timeout);
  const auto image_hash = sha256_hex(request.image_png);
  const auto mask_png = mask_to_png(request.mask);
  const auto image_handle =
      upload(*client, ep.base_path, "semprobe_" + image_hash.substr(0, 16) + ".png", request.image_png);
  const auto mask_handle = upload(
      *client, ep.base_path, "semprobe_mask_" + sha256_hex(mask_png).substr(0, 16) + ".png", mask_png);

  const auto graph_text = instantiate_workflow(request.workflow, request.prompt, request.params,
                                               image_handle, mask_handle, request.sample_index);
  json graph;
  try {
    graph = json::parse(graph_text);
  } catch (const json::parse_error& e) {
    fail(ErrorCode::kTemplate, "workflow '" + request.workflow.id() + "' is not valid JSON after substitution");
  }
  const json body = {{"prompt", graph}, {"client_id", options_.client_id}};
  auto submitted = client->Post(ep.base_path + "/prompt", body.dump(), "application/json");
  if (submitted && submitted->status == 400) {
    fail(ErrorCode::kGenerationFailed, "comfy rejected workflow: " + submitted->body.substr(0, 500));
  }
  const auto reply = parse_reply(detail::expect_ok(std::move(submitted), "comfy prompt").body, "comfy prompt");
  if (reply.contains("node_errors") && reply["node_errors"].is_object() &&
      !reply["node_errors"].empty()) {
    fail(ErrorCode::kGenerationFailed, "comfy node errors: " + reply["node_errors"].dump());
  }
  if (!reply.contains("prompt_id")) fail(ErrorCode::kProtocol, "comfy prompt: reply lacks prompt_id");
  const auto prompt_id = reply["prompt_id"].is_string() ? reply["prompt_id"].get<std::string>()
                                                        : reply["prompt_id"].dump();

  const auto deadline = std::chrono::steady_clock::now() + options_.job_timeout;
  while (true) {
    const auto history = parse_reply(
        detail::expect_ok(client->Get(ep.base_path + "/history/" + prompt_id), "comfy history").body,
        "comfy history");
    if (history.contains(prompt_id)) {
      const auto& entry = history[prompt_id];
      if (entry.contains("status") && entry["status"].value("status_str", "") == "error") {
        fail(ErrorCode::kGenerationFailed, "comfy execution failed: " + entry["status"].dump());
      }
      if (entry.contains("outputs") && !entry["outputs"].empty()) {
        const auto img = first_output_image(entry["outputs"]);
        if (!img) fail(ErrorCode::kGenerationFailed, "comfy finished without an output image");
        httplib::Params query = {{"filename", img->filename}, {"subfolder", img->subfolder}, {"type", img->type}};
        const auto& res = detail::expect_ok(
            client->Get(ep.base_path + "/view", query, httplib::Headers{}), "comfy view");
        return Bytes(res.body.begin(), res.body.end());
      }
    }
    if (std::chrono::steady_clock::now() >= deadline) {
      fail(ErrorCode::kTimeout, "comfy prompt " + prompt_id + " did not finish in time");
    }
    std::this_thread::sleep_for(options_.poll_interval);
  }
}

}  // namespace semprobe
