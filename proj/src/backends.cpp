// Copyright 2026 The SemProbe Authors
// SPDX-License-Identifier: Apache-2.0

#include "semprobe/backends.hpp"

#include <cstdlib>

#include "semprobe/error.hpp"

namespace semprobe {
namespace {

std::optional<std::string> env(const char* name) {
  const char* v = std::getenv(name);
  if (!v || !*v) return std::nullopt;
  return std::string(v);
}

constexpr const char* kDefaultComfy = "http://127.0.0.1:8188";
constexpr const char* kDefaultDetector = "http://127.0.0.1:8090";
constexpr const char* kDefaultLlm = "http://127.0.0.1:8091";
constexpr const char* kDefaultAutomask = "http://127.0.0.1:8092";

}  // namespace

BackendConfig config_from_env() {
  BackendConfig c;
  c.comfy_url = env("SEMPROBE_COMFY_URL");
  c.detector_url = env("SEMPROBE_DETECTOR_URL");
  c.llm_url = env("SEMPROBE_LLM_URL");
  c.automask_url = env("SEMPROBE_AUTOMASK_URL");
  return c;
}

BackendRegistry::BackendRegistry(BackendConfig config) : config_(std::move(config)) {}

std::shared_ptr<GenerationBackend> BackendRegistry::generation(std::string_view spec) {
  std::lock_guard lock(mutex_);
  if (const auto it = generation_.find(spec); it != generation_.end()) return it->second;
  std::shared_ptr<GenerationBackend> backend;
  if (spec.starts_with("mock:")) {
    const auto kind = parse_perturb_kind(spec.substr(5));
    if (!kind) fail(ErrorCode::kInvalidArgument, "unknown mock perturbation '" + std::string(spec) + "'");
    backend = std::make_shared<MockGenerationBackend>(*kind);
  } else if (spec == "comfy") {
    backend = std::make_shared<ComfyBackend>(config_.comfy_url.value_or(kDefaultComfy), config_.comfy);
  } else if (spec.starts_with("comfy:")) {
    backend = std::make_shared<ComfyBackend>(std::string(spec.substr(6)), config_.comfy);
  } else {
    fail(ErrorCode::kInvalidArgument, "unknown generation backend '" + std::string(spec) + "'");
  }
  generation_.emplace(std::string(spec), backend);
  return backend;
}

std::shared_ptr<DetectorBackend> BackendRegistry::detector(std::string_view spec) {
  std::lock_guard lock(mutex_);
  if (const auto it = detectors_.find(spec); it != detectors_.end()) return it->second;
  std::shared_ptr<DetectorBackend> backend;
  if (spec == "mock") {
    backend = std::make_shared<MockDetector>();
  } else if (spec.starts_with("mock:")) {
    backend = MockDetector::from_fixture_file(std::string(spec.substr(5)));
  } else if (spec == "http") {
    backend = std::make_shared<HttpDetector>(config_.detector_url.value_or(kDefaultDetector),
                                             config_.detector_in_flight);
  } else if (spec.starts_with("http://") || spec.starts_with("https://")) {
    backend = std::make_shared<HttpDetector>(std::string(spec), config_.detector_in_flight);
  } else {
    fail(ErrorCode::kInvalidArgument, "unknown detector backend '" + std::string(spec) + "'");
  }
  detectors_.emplace(std::string(spec), backend);
  return backend;
}

void BackendRegistry::register_generation(std::string spec, std::shared_ptr<GenerationBackend> backend) {
  std::lock_guard lock(mutex_);
  generation_.insert_or_assign(std::move(spec), std::move(backend));
}

void BackendRegistry::register_detector(std::string spec, std::shared_ptr<DetectorBackend> backend) {
  std::lock_guard lock(mutex_);
  detectors_.insert_or_assign(std::move(spec), std::move(backend));
}

std::unique_ptr<LlmClient> BackendRegistry::llm() const {
  const auto url = config_.llm_url.value_or(kDefaultLlm);
  if (url == "mock") return std::make_unique<MockLlmClient>();
  return std::make_unique<HttpLlmClient>(url);
}

std::unique_ptr<AutoMaskClient> BackendRegistry::automask() const {
  return std::make_unique<HttpAutoMaskClient>(config_.automask_url.value_or(kDefaultAutomask));
}

}  // namespace semprobe
