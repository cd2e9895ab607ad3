// Copyright 2026 The SemProbe Authors
// SPDX-License-Identifier: Apache-2.0

#include "semprobe/generation.hpp"

#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>

#include "semprobe/error.hpp"

namespace semprobe {

GenerationParams::GenerationParams(std::uint64_t seed, int steps, double cfg_scale,
                                   double denoise_strength, int sample_count,
                                   std::optional<OutputSize> output_size)
    : seed_(seed),
      steps_(steps),
      cfg_scale_(cfg_scale),
      denoise_strength_(denoise_strength),
      sample_count_(sample_count),
      output_size_(output_size) {
  if (steps < 1) fail(ErrorCode::kInvalidArgument, "steps must be >= 1");
  if (!(cfg_scale >= 0) || !std::isfinite(cfg_scale)) {
    fail(ErrorCode::kInvalidArgument, "cfg_scale must be a finite value >= 0");
  }
  if (!(denoise_strength >= 0 && denoise_strength <= 1)) {
    fail(ErrorCode::kInvalidArgument, "denoise_strength must lie in [0, 1]");
  }
  if (sample_count < 1) fail(ErrorCode::kInvalidArgument, "sample_count must be >= 1");
  if (output_size && (output_size->width < 1 || output_size->height < 1)) {
    fail(ErrorCode::kInvalidArgument, "output_size must be positive");
  }
}

namespace {

constexpr std::string_view kRequiredTokens[] = {"${SEED}", "${PROMPT}", "${IMAGE}", "${MASK}"};

bool is_slug(std::string_view s) {
  return !s.empty() && std::all_of(s.begin(), s.end(), [](char c) {
    return (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '_' || c == '-';
  });
}

std::string json_escape(std::string_view s) {
  const auto quoted = nlohmann::json(std::string(s))
                          .dump(-1, ' ', false, nlohmann::json::error_handler_t::replace);
  return quoted.substr(1, quoted.size() - 2);
}

std::string plain_decimal(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

}  // namespace

WorkflowTemplate::WorkflowTemplate(std::string id, std::string graph_text)
    : id_(std::move(id)), graph_text_(std::move(graph_text)) {
  if (!is_slug(id_)) fail(ErrorCode::kTemplate, "workflow id must be a slug: '" + id_ + "'");
  for (auto token : kRequiredTokens) {
    if (graph_text_.find(token) == std::string::npos) {
      fail(ErrorCode::kTemplate,
           "workflow '" + id_ + "' is missing required token " + std::string(token));
    }
  }
}

std::string instantiate_workflow(const WorkflowTemplate& workflow, const PromptSpec& prompt,
                                 const GenerationParams& params, std::string_view image_handle,
                                 std::string_view mask_handle, int sample_index) {
  if (sample_index < 0 || sample_index >= params.sample_count()) {
    fail(ErrorCode::kInvalidArgument, "sample_index out of range");
  }
  const std::map<std::string_view, std::string> values = {
      {"SEED", std::to_string(params.seed() + static_cast<std::uint64_t>(sample_index))},
      {"PROMPT", json_escape(prompt.text)},
      {"NEGATIVE", json_escape(prompt.negative_text.value_or(""))},
      {"STEPS", std::to_string(params.steps())},
      {"CFG", plain_decimal(params.cfg_scale())},
      {"DENOISE", plain_decimal(params.denoise_strength())},
      {"IMAGE", json_escape(image_handle)},
      {"MASK", json_escape(mask_handle)},
  };
  const std::string_view text = workflow.graph_text();
  std::string out;
  out.reserve(text.size() + 256);
  std::size_t pos = 0;
  while (pos < text.size()) {
    const auto start = text.find("${", pos);
    if (start == std::string_view::npos) {
      out.append(text.substr(pos));
      break;
    }
    out.append(text.substr(pos, start - pos));
    const auto close = text.find('}', start + 2);
    if (close == std::string_view::npos) {
      fail(ErrorCode::kTemplate, "unterminated placeholder in workflow '" + workflow.id() + "'");
    }
    const auto name = text.substr(start + 2, close - start - 2);
    const auto it = values.find(name);
    if (it == values.end()) {
      fail(ErrorCode::kTemplate, "unresolved workflow token ${" + std::string(name) +
                                     "} in '" + workflow.id() + "'");
    }
    out.append(it->second);
    pos = close + 1;
  }
  return out;
}

// ---------------------------------------------------------------------------

namespace {

// Placeholder graphs in ComfyUI API format; replace with the server's own export.
constexpr std::string_view kDefaultGraph = R"({
  "1": {"class_type": "LoadImage", "inputs": {"image": "${IMAGE}"}},
  "2": {"class_type": "LoadImageMask", "inputs": {"image": "${MASK}", "channel": "red"}},
  "3": {"class_type": "UNETLoader", "inputs": {"unet_name": "flux-2-klein.safetensors", "weight_dtype": "default"}},
  "4": {"class_type": "CLIPLoader", "inputs": {"clip_name": "qwen3-4b.safetensors", "type": "flux2"}},
  "5": {"class_type": "VAELoader", "inputs": {"vae_name": "flux2-vae.safetensors"}},
  "6": {"class_type": "CLIPTextEncode", "inputs": {"text": "${PROMPT}", "clip": ["4", 0]}},
  "7": {"class_type": "CLIPTextEncode", "inputs": {"text": "${NEGATIVE}", "clip": ["4", 0]}},
  "8": {"class_type": "InpaintModelConditioning", "inputs": {"positive": ["6", 0], "negative": ["7", 0], "vae": ["5", 0], "pixels": ["1", 0], "mask": ["2", 0], "noise_mask": true}},
  "9": {"class_type": "KSampler", "inputs": {"model": ["3", 0], "positive": ["8", 0], "negative": ["8", 1], "latent_image": ["8", 2], "seed": ${SEED}, "steps": ${STEPS}, "cfg": ${CFG}, "sampler_name": "euler", "scheduler": "simple", "denoise": ${DENOISE}}},
  "10": {"class_type": "VAEDecode", "inputs": {"samples": ["9", 0], "vae": ["5", 0]}},
  "11": {"class_type": "SaveImage", "inputs": {"images": ["10", 0], "filename_prefix": "semprobe"}}
}
)";

constexpr std::string_view kGrowMaskGraph = R"({
  "1": {"class_type": "LoadImage", "inputs": {"image": "${IMAGE}"}},
  "2": {"class_type": "LoadImageMask", "inputs": {"image": "${MASK}", "channel": "red"}},
  "12": {"class_type": "GrowMask", "inputs": {"mask": ["2", 0], "expand": 16, "tapered_corners": true}},
  "3": {"class_type": "UNETLoader", "inputs": {"unet_name": "flux-2-klein.safetensors", "weight_dtype": "default"}},
  "4": {"class_type": "CLIPLoader", "inputs": {"clip_name": "qwen3-4b.safetensors", "type": "flux2"}},
  "5": {"class_type": "VAELoader", "inputs": {"vae_name": "flux2-vae.safetensors"}},
  "6": {"class_type": "CLIPTextEncode", "inputs": {"text": "${PROMPT}", "clip": ["4", 0]}},
  "7": {"class_type": "CLIPTextEncode", "inputs": {"text": "${NEGATIVE}", "clip": ["4", 0]}},
  "8": {"class_type": "InpaintModelConditioning", "inputs": {"positive": ["6", 0], "negative": ["7", 0], "vae": ["5", 0], "pixels": ["1", 0], "mask": ["12", 0], "noise_mask": true}},
  "9": {"class_type": "KSampler", "inputs": {"model": ["3", 0], "positive": ["8", 0], "negative": ["8", 1], "latent_image": ["8", 2], "seed": ${SEED}, "steps": ${STEPS}, "cfg": ${CFG}, "sampler_name": "euler", "scheduler": "simple", "denoise": ${DENOISE}}},
  "10": {"class_type": "VAEDecode", "inputs": {"samples": ["9", 0], "vae": ["5", 0]}},
  "11": {"class_type": "SaveImage", "inputs": {"images": ["10", 0], "filename_prefix": "semprobe"}}
}
)";

}  // namespace

WorkflowRegistry::WorkflowRegistry() {
  add(WorkflowTemplate("default", std::string(kDefaultGraph)));
  add(WorkflowTemplate("grow_mask", std::string(kGrowMaskGraph)));
}

void WorkflowRegistry::add(WorkflowTemplate workflow) {
  auto id = workflow.id();
  workflows_.insert_or_assign(std::move(id), std::move(workflow));
}

void WorkflowRegistry::load_directory(const std::filesystem::path& dir) {
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".json") {
      files.push_back(entry.path());
    }
  }
  std::sort(files.begin(), files.end());
  for (const auto& f : files) add(WorkflowTemplate(f.stem().string(), read_text_file(f)));
}

const WorkflowTemplate& WorkflowRegistry::get(std::string_view id) const {
  const auto it = workflows_.find(id);
  if (it == workflows_.end()) fail(ErrorCode::kNotFound, "unknown workflow '" + std::string(id) + "'");
  return it->second;
}

std::vector<std::string> WorkflowRegistry::ids() const {
  std::vector<std::string> out;
  for (const auto& [id, _] : workflows_) out.push_back(id);
  return out;
}

// ---------------------------------------------------------------------------

std::string_view to_string(PerturbKind kind) {
  switch (kind) {
    case PerturbKind::kFill: return "fill";
    case PerturbKind::kNoise: return "noise";
    case PerturbKind::kBlur: return "blur";
  }
  return "";
}

std::optional<PerturbKind> parse_perturb_kind(std::string_view name) {
  for (auto k : {PerturbKind::kFill, PerturbKind::kNoise, PerturbKind::kBlur}) {
    if (to_string(k) == name) return k;
  }
  return std::nullopt;
}

namespace {

void perturb_fill(RgbImage& out, const RasterMask& mask) {
  const auto grown = dilate(mask, 1);
  std::uint64_t sum[3] = {0, 0, 0};
  std::uint64_t n = 0;
  for (int y = 0; y < mask.height(); ++y) {
    for (int x = 0; x < mask.width(); ++x) {
      if (!grown.get(x, y) || mask.get(x, y)) continue;
      const auto* p = out.at(x, y);
      for (int c = 0; c < 3; ++c) sum[c] += p[c];
      ++n;
    }
  }
  std::uint8_t color[3] = {128, 128, 128};
  if (n > 0) {
    for (int c = 0; c < 3; ++c) color[c] = static_cast<std::uint8_t>((sum[c] + n / 2) / n);
  }
  for (int y = 0; y < mask.height(); ++y) {
    for (int x = 0; x < mask.width(); ++x) {
      if (!mask.get(x, y)) continue;
      auto* p = out.at(x, y);
      for (int c = 0; c < 3; ++c) p[c] = color[c];
    }
  }
}

void perturb_noise(RgbImage& out, const RasterMask& mask, const GenerationParams& params,
                   int sample_index) {
  const auto amplitude = static_cast<std::int64_t>(std::lround(params.denoise_strength() * 64));
  if (amplitude == 0) return;
  const auto span = static_cast<std::uint64_t>(2 * amplitude + 1);
  SplitMix64 rng(params.seed() + static_cast<std::uint64_t>(sample_index));
  for (int y = 0; y < mask.height(); ++y) {
    for (int x = 0; x < mask.width(); ++x) {
      if (!mask.get(x, y)) continue;
      auto* p = out.at(x, y);
      for (int c = 0; c < 3; ++c) {
        const auto offset = static_cast<std::int64_t>(rng.next() % span) - amplitude;
        p[c] = static_cast<std::uint8_t>(std::clamp<std::int64_t>(p[c] + offset, 0, 255));
      }
    }
  }
}

void perturb_blur(RgbImage& out, const RasterMask& mask, const GenerationParams& params) {
  const int passes = std::max(1, static_cast<int>(std::lround(params.denoise_strength() * 10)));
  const int w = out.width, h = out.height;
  for (int pass = 0; pass < passes; ++pass) {
    const RgbImage src = out;
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        if (!mask.get(x, y)) continue;
        unsigned sum[3] = {0, 0, 0};
        for (int dy = -1; dy <= 1; ++dy) {
          for (int dx = -1; dx <= 1; ++dx) {
            const auto* q = src.at(std::clamp(x + dx, 0, w - 1), std::clamp(y + dy, 0, h - 1));
            for (int c = 0; c < 3; ++c) sum[c] += q[c];
          }
        }
        auto* p = out.at(x, y);
        for (int c = 0; c < 3; ++c) p[c] = static_cast<std::uint8_t>(sum[c] / 9);
      }
    }
  }
}

}  // namespace

RgbImage mock_perturb(const RgbImage& image, const RasterMask& mask, PerturbKind kind,
                      const GenerationParams& params, int sample_index) {
  if (mask.width() != image.width || mask.height() != image.height) {
    fail(ErrorCode::kInvalidArgument, "mask dimensions do not match image");
  }
  RgbImage out = image;
  switch (kind) {
    case PerturbKind::kFill: perturb_fill(out, mask); break;
    case PerturbKind::kNoise: perturb_noise(out, mask, params, sample_index); break;
    case PerturbKind::kBlur: perturb_blur(out, mask, params); break;
  }
  return out;
}

Bytes MockGenerationBackend::generate(const SampleRequest& request) {
  // Instantiating keeps template errors identical to the real backend path.
  instantiate_workflow(request.workflow, request.prompt, request.params, "image.png", "mask.png",
                       request.sample_index);
  const auto image = decode_png_rgb(request.image_png);
  if (const auto& size = request.params.output_size();
      size && (size->width != image.width || size->height != image.height)) {
    fail(ErrorCode::kInvalidArgument, "mock backend cannot resize; output_size must match the image");
  }
  return encode_png(
      mock_perturb(image, request.mask, kind_, request.params, request.sample_index));
}

// ---------------------------------------------------------------------------

std::vector<GeneratedOutput> submit_inpaint(GenerationBackend& backend,
                                            std::span<const std::uint8_t> image_png,
                                            const RasterMask& mask, const PromptSpec& prompt,
                                            const GenerationParams& params,
                                            const WorkflowTemplate& workflow,
                                            const RetryPolicy& retry) {
  const auto size = png_size(image_png);
  if (size.width != mask.width() || size.height != mask.height()) {
    fail(ErrorCode::kInvalidArgument, "mask dimensions do not match image");
  }
  if (mask.empty()) fail(ErrorCode::kEmptyMask, "mask has no pixels to inpaint");
  const auto parent = sha256_hex(image_png);
  const OutputSize expected = params.output_size().value_or(OutputSize{size.width, size.height});

  std::vector<GeneratedOutput> outputs;
  outputs.reserve(static_cast<std::size_t>(params.sample_count()));
  for (int k = 0; k < params.sample_count(); ++k) {
    const SampleRequest request{image_png, mask, prompt, params, workflow, k};
    auto png = with_retry(retry, [&] {
      auto pass = backend.gate().acquire();
      return backend.generate(request);
    });
    PngSize got;
    try {
      got = png_size(png);
    } catch (const Error& e) {
      fail(ErrorCode::kProtocol, std::string("backend returned an undecodable image: ") + e.what());
    }
    if (got.width != expected.width || got.height != expected.height) {
      fail(ErrorCode::kProtocol, "backend output is " + std::to_string(got.width) + "x" +
                                     std::to_string(got.height) + ", expected " +
                                     std::to_string(expected.width) + "x" +
                                     std::to_string(expected.height));
    }
    outputs.push_back(GeneratedOutput{std::move(png), parent, params, k, workflow.id(), backend.id()});
  }
  return outputs;
}

}  // namespace semprobe
