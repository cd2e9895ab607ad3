// Copyright 2026 The SemProbe Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "semprobe/catalog.hpp"
#include "semprobe/digest.hpp"
#include "semprobe/image.hpp"
#include "semprobe/masking.hpp"
#include "semprobe/retry.hpp"

namespace semprobe {

struct OutputSize {
  int width = 0;
  int height = 0;
  bool operator==(const OutputSize&) const = default;
};

/// Generation knobs exposed to the operator. Bounds are checked on
/// construction and on every setter, so an instance is always valid.
class GenerationParams {
 public:
  GenerationParams() = default;
  GenerationParams(std::uint64_t seed, int steps, double cfg_scale, double denoise_strength,
                   int sample_count, std::optional<OutputSize> output_size = std::nullopt);

  std::uint64_t seed() const noexcept { return seed_; }
  int steps() const noexcept { return steps_; }
  double cfg_scale() const noexcept { return cfg_scale_; }
  double denoise_strength() const noexcept { return denoise_strength_; }
  int sample_count() const noexcept { return sample_count_; }
  /// Unset means "same size as the source image".
  const std::optional<OutputSize>& output_size() const noexcept { return output_size_; }

  GenerationParams with_seed(std::uint64_t seed) const {
    auto copy = *this;
    copy.seed_ = seed;
    return copy;
  }

  bool operator==(const GenerationParams&) const = default;

 private:
  std::uint64_t seed_ = 0;
  int steps_ = 20;
  double cfg_scale_ = 3.5;
  double denoise_strength_ = 1.0;
  int sample_count_ = 1;
  std::optional<OutputSize> output_size_;
};

/// Workflow graph as opaque text with ${TOKEN} placeholders.
class WorkflowTemplate {
 public:
  // Throws kTemplate if the id is not a slug or a required token is missing.
  WorkflowTemplate(std::string id, std::string graph_text);

  const std::string& id() const noexcept { return id_; }
  const std::string& graph_text() const noexcept { return graph_text_; }

 private:
  std::string id_;
  std::string graph_text_;
};

/// Substitutes every placeholder; ${SEED} receives seed + sample_index.
/// String tokens are JSON-escaped. Throws kTemplate on residual "${".
std::string instantiate_workflow(const WorkflowTemplate& workflow, const PromptSpec& prompt,
                                 const GenerationParams& params, std::string_view image_handle,
                                 std::string_view mask_handle, int sample_index);

/// Built-in placeholder graphs plus any `<id>.json` files loaded from disk.
class WorkflowRegistry {
 public:
  WorkflowRegistry();  // registers the built-ins
  void add(WorkflowTemplate workflow);
  void load_directory(const std::filesystem::path& dir);
  const WorkflowTemplate& get(std::string_view id) const;  // kNotFound
  std::vector<std::string> ids() const;

 private:
  std::map<std::string, WorkflowTemplate, std::less<>> workflows_;
};

struct GeneratedOutput {
  Bytes image_png;
  std::string parent_image;  // ImageRef id
  GenerationParams params;
  int sample_index = 0;
  std::string workflow_id;
  std::string backend_id;
};

struct SampleRequest {
  std::span<const std::uint8_t> image_png;
  const RasterMask& mask;
  const PromptSpec& prompt;
  const GenerationParams& params;
  const WorkflowTemplate& workflow;
  int sample_index = 0;
};

class GenerationBackend {
 public:
  explicit GenerationBackend(std::size_t max_in_flight) : gate_(max_in_flight) {}
  virtual ~GenerationBackend() = default;

  virtual std::string id() const = 0;
  /// Produces one PNG for one sample.
  virtual Bytes generate(const SampleRequest& request) = 0;

  InFlightGate& gate() noexcept { return gate_; }

 private:
  InFlightGate gate_;
};

// ---------------------------------------------------------------------------
// Offline stand-in

/// SplitMix64 (Steele, Lea, Flood); used verbatim so mock output is
/// reproducible in any language.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}
  std::uint64_t next() noexcept {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

 private:
  std::uint64_t state_;
};

enum class PerturbKind { kFill, kNoise, kBlur };

std::string_view to_string(PerturbKind kind);
std::optional<PerturbKind> parse_perturb_kind(std::string_view name);

/// Deterministic masked perturbation.
///   FILL  masked pixels take the rounded mean colour of the 1-pixel unmasked
///         ring around the mask (128 grey if there is no ring).
///   NOISE each masked channel gets next() mod (2A+1) - A, A = round(denoise*64),
///         from SplitMix64(seed + sample_index); row-major, R,G,B order.
///   BLUR  k = max(1, round(denoise*10)) passes of a clamped 3x3 box blur,
///         written to masked pixels only.
RgbImage mock_perturb(const RgbImage& image, const RasterMask& mask, PerturbKind kind,
                      const GenerationParams& params, int sample_index);

class MockGenerationBackend final : public GenerationBackend {
 public:
  explicit MockGenerationBackend(PerturbKind kind) : GenerationBackend(0), kind_(kind) {}
  std::string id() const override { return "mock:" + std::string(to_string(kind_)); }
  Bytes generate(const SampleRequest& request) override;

 private:
  PerturbKind kind_;
};

// ---------------------------------------------------------------------------
// Graph-server client

struct ComfyOptions {
  std::chrono::milliseconds request_timeout{30000};
  std::chrono::milliseconds poll_interval{500};
  std::chrono::milliseconds job_timeout{600000};
  std::size_t max_in_flight = 1;
  std::string client_id = "semprobe";
};

/// Upload -> /prompt -> poll /history -> /view against a ComfyUI-compatible server.
class ComfyBackend final : public GenerationBackend {
 public:
  explicit ComfyBackend(std::string base_url, ComfyOptions options = {});
  std::string id() const override { return "comfy:" + base_url_; }
  Bytes generate(const SampleRequest& request) override;

 private:
  std::string base_url_;
  ComfyOptions options_;
};

/// Runs every sample of one inpainting request through `backend`.
/// Errors: kInvalidArgument (mask/image mismatch), kEmptyMask,
/// kBackendUnavailable after retries, kGenerationFailed, kTimeout, kTemplate.
std::vector<GeneratedOutput> submit_inpaint(GenerationBackend& backend,
                                            std::span<const std::uint8_t> image_png,
                                            const RasterMask& mask, const PromptSpec& prompt,
                                            const GenerationParams& params,
                                            const WorkflowTemplate& workflow,
                                            const RetryPolicy& retry = {});

}  // namespace semprobe
