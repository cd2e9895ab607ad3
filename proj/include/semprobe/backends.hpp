// Copyright 2026 The SemProbe Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>

#include "semprobe/catalog.hpp"
#include "semprobe/detection.hpp"
#include "semprobe/generation.hpp"
#include "semprobe/masking.hpp"

namespace semprobe {

struct BackendConfig {
  std::optional<std::string> comfy_url;
  std::optional<std::string> detector_url;
  std::optional<std::string> llm_url;
  std::optional<std::string> automask_url;
  ComfyOptions comfy;
  std::size_t detector_in_flight = 4;
};

/// Reads SEMPROBE_COMFY_URL, SEMPROBE_DETECTOR_URL, SEMPROBE_LLM_URL and
/// SEMPROBE_AUTOMASK_URL.
BackendConfig config_from_env();

/// Resolves backend identifiers to shared instances, so that in-flight limits
/// apply across every job using the same backend.
///
/// Generation: "mock:fill" | "mock:noise" | "mock:blur" | "comfy" | "comfy:URL".
/// Detector:   "mock" | "mock:FIXTURES.json" | "http" | "URL".
/// A URL inside the identifier wins over the environment, which wins over the
/// localhost default.
class BackendRegistry {
 public:
  explicit BackendRegistry(BackendConfig config = config_from_env());

  std::shared_ptr<GenerationBackend> generation(std::string_view spec);
  std::shared_ptr<DetectorBackend> detector(std::string_view spec);

  /// Pins an instance under an identifier (tests and embedding).
  void register_generation(std::string spec, std::shared_ptr<GenerationBackend> backend);
  void register_detector(std::string spec, std::shared_ptr<DetectorBackend> backend);

  std::unique_ptr<LlmClient> llm() const;
  std::unique_ptr<AutoMaskClient> automask() const;

  const BackendConfig& config() const noexcept { return config_; }

 private:
  BackendConfig config_;
  std::mutex mutex_;
  std::map<std::string, std::shared_ptr<GenerationBackend>, std::less<>> generation_;
  std::map<std::string, std::shared_ptr<DetectorBackend>, std::less<>> detectors_;
};

}  // namespace semprobe
