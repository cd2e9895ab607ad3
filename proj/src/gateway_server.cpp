// Copyright 2026 The SemProbe Authors
// SPDX-License-Identifier: Apache-2.0

#include <httplib.h>

#include <regex>

#include "semprobe/gateway.hpp"

namespace semprobe {

namespace fs = std::filesystem;

std::string_view to_string(ApiCode code) {
  switch (code) {
    case ApiCode::kInvalidArgument: return "INVALID_ARGUMENT";
    case ApiCode::kNotFound: return "NOT_FOUND";
    case ApiCode::kBackendUnavailable: return "BACKEND_UNAVAILABLE";
    case ApiCode::kValidation: return "VALIDATION";
    case ApiCode::kConflict: return "CONFLICT";
    case ApiCode::kInternal: return "INTERNAL";
  }
  return "INTERNAL";
}

int http_status(ApiCode code) {
  switch (code) {
    case ApiCode::kInvalidArgument: return 400;
    case ApiCode::kNotFound: return 404;
    case ApiCode::kBackendUnavailable: return 502;
    case ApiCode::kValidation: return 422;
    case ApiCode::kConflict: return 409;
    case ApiCode::kInternal: return 500;
  }
  return 500;
}

ApiCode api_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument:
    case ErrorCode::kFormat:
    case ErrorCode::kEmptyMask:
    case ErrorCode::kTemplate:
    case ErrorCode::kUnresolvedPlaceholder:
      return ApiCode::kInvalidArgument;
    case ErrorCode::kNotFound:
      return ApiCode::kNotFound;
    case ErrorCode::kBackendUnavailable:
    case ErrorCode::kProtocol:
    case ErrorCode::kGenerationFailed:
    case ErrorCode::kTimeout:
      return ApiCode::kBackendUnavailable;
    case ErrorCode::kValidation:
      return ApiCode::kValidation;
    case ErrorCode::kConflict:
    case ErrorCode::kWriteOnce:
    case ErrorCode::kRejected:
      return ApiCode::kConflict;
    case ErrorCode::kInternal:
    case ErrorCode::kIo:
    case ErrorCode::kIntegrity:
      return ApiCode::kInternal;
  }
  return ApiCode::kInternal;
}

ojson api_error_body(ApiCode code, std::string_view message, const ojson& detail) {
  ojson j;
  j["error"] = {{"code", to_string(code)}, {"message", message}, {"detail", detail}};
  return j;
}

namespace {

const std::regex kJobIdPattern("[A-Za-z0-9_-]{1,128}");
const std::regex kHashPattern("[0-9a-f]{64}");

void send_json(httplib::Response& res, const ojson& body, int status = 200) {
  res.status = status;
  res.set_content(body.dump(2) + "\n", "application/json");
}

void send_error(httplib::Response& res, ApiCode code, std::string_view message,
                const ojson& detail = nullptr) {
  send_json(res, api_error_body(code, message, detail), http_status(code));
}

ojson parse_body(const httplib::Request& req) {
  try {
    return ojson::parse(req.body);
  } catch (const nlohmann::json::parse_error& e) {
    fail(ErrorCode::kInvalidArgument, std::string("request body is not JSON: ") + e.what());
  }
}

fs::path uploads(const fs::path& root, std::string_view kind) { return root / "uploads" / std::string(kind); }

std::string store_mask(const fs::path& root, const RasterMask& mask, Bytes* png_out) {
  auto png = mask_to_png(mask);
  const auto id = sha256_hex(png);
  fs::create_directories(uploads(root, "masks"));
  const auto path = uploads(root, "masks") / (id + ".png");
  if (!fs::exists(path)) write_file_atomic(path, png);
  if (png_out) *png_out = std::move(png);
  return id;
}

Bytes load_upload(const fs::path& root, std::string_view kind, const std::string& id) {
  if (!std::regex_match(id, kHashPattern)) {
    fail(ErrorCode::kInvalidArgument, "malformed " + std::string(kind) + " id '" + id + "'");
  }
  const auto path = uploads(root, kind) / (id + ".png");
  if (!fs::exists(path)) fail(ErrorCode::kNotFound, "unknown " + std::string(kind) + " id '" + id + "'");
  return read_file(path);
}

ImageRef load_image_ref(const fs::path& root, const std::string& id, Bytes* png_out) {
  auto png = load_upload(root, "images", id);
  std::string name = id + ".png";
  const auto meta = uploads(root, "images") / (id + ".json");
  if (fs::exists(meta)) name = ojson::parse(read_text_file(meta)).value("source_name", name);
  auto ref = make_image_ref(png, name);
  if (png_out) *png_out = std::move(png);
  return ref;
}

fs::path checked_job_folder(Coordinator& coordinator, const fs::path& root, const std::string& id) {
  if (!std::regex_match(id, kJobIdPattern)) fail(ErrorCode::kInvalidArgument, "malformed job id");
  if (coordinator.has_job(id)) return coordinator.folder(id);
  const auto folder = job_folder(root, id);
  if (!fs::exists(folder / "job.json")) fail(ErrorCode::kNotFound, "unknown job '" + id + "'");
  return folder;
}

}  // namespace

std::vector<BrushStroke> strokes_from_json(const ojson& strokes) {
  if (!strokes.is_array()) fail(ErrorCode::kInvalidArgument, "strokes must be an array");
  std::vector<BrushStroke> out;
  try {
    for (const auto& s : strokes) {
      BrushStroke stroke;
      for (const auto& p : s.at("points")) {
        if (p.is_array()) {
          stroke.points.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
        } else {
          stroke.points.push_back({p.at("x").get<double>(), p.at("y").get<double>()});
        }
      }
      if (stroke.points.empty()) fail(ErrorCode::kInvalidArgument, "stroke has no points");
      stroke.radius = s.at("radius").get<double>();
      if (!(stroke.radius >= 0)) fail(ErrorCode::kInvalidArgument, "stroke radius must be >= 0");
      const auto mode = s.value("mode", std::string("add"));
      if (mode == "add" || mode == "ADD") {
        stroke.mode = StrokeMode::kAdd;
      } else if (mode == "erase" || mode == "ERASE") {
        stroke.mode = StrokeMode::kErase;
      } else {
        fail(ErrorCode::kInvalidArgument, "unknown stroke mode '" + mode + "'");
      }
      out.push_back(std::move(stroke));
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kInvalidArgument, std::string("malformed stroke: ") + e.what());
  }
  return out;
}

ProbeJob job_from_request(const ojson& body, const fs::path& root,
                          const std::optional<FactorCatalog>& catalog) {
  try {
    ProbeJob job;
    if (!body.is_object()) fail(ErrorCode::kInvalidArgument, "job specification must be an object");
    job.job_id = body.value("job_id", std::string());
    if (!job.job_id.empty() && !std::regex_match(job.job_id, kJobIdPattern)) {
      fail(ErrorCode::kInvalidArgument, "malformed job_id");
    }
    const auto& images = body.at("images");
    if (!images.is_array() || images.empty()) fail(ErrorCode::kInvalidArgument, "images must be a non-empty array");
    for (std::size_t i = 0; i < images.size(); ++i) {
      const auto& spec = images[i];
      const auto where = "images[" + std::to_string(i) + "]";
      JobImage img;
      img.ref = load_image_ref(root, spec.at("image_id").get<std::string>(), &img.png);
      if (spec.contains("mask_rle")) {
        img.mask = decode_rle(spec["mask_rle"].get<std::string>(), img.ref.width, img.ref.height);
      } else if (spec.contains("mask_id")) {
        img.mask = mask_from_png(load_upload(root, "masks", spec["mask_id"].get<std::string>()));
      } else if (spec.contains("strokes")) {
        const auto strokes = strokes_from_json(spec["strokes"]);
        img.mask = rasterize_strokes(strokes, img.ref.width, img.ref.height);
      } else {
        fail(ErrorCode::kInvalidArgument, where + ": missing mask (mask_rle, mask_id or strokes)");
      }
      img.ground_truth = parse_yolo_labels(spec.value("ground_truth", std::string()), img.ref.id,
                                           img.ref.width, img.ref.height);
      job.images.push_back(std::move(img));
    }

    if (body.contains("factor_id")) {
      if (!catalog) fail(ErrorCode::kInvalidArgument, "no catalog loaded; use a custom prompt");
      PromptContext context;
      if (body.contains("context")) {
        for (const auto& [k, v] : body["context"].items()) context[k] = v.get<std::string>();
      }
      job.prompt = render_prompt(*catalog, body.at("factor_id").get<std::string>(),
                                 body.at("level_id").get<std::string>(), context);
    } else if (body.contains("prompt")) {
      job.prompt = custom_prompt(body["prompt"].get<std::string>());
    } else {
      fail(ErrorCode::kInvalidArgument, "either factor_id/level_id or prompt is required");
    }
    if (body.contains("negative_prompt") && !body["negative_prompt"].is_null()) {
      job.prompt.negative_text = body["negative_prompt"].get<std::string>();
    }

    const auto params = body.value("params", ojson::object());
    std::optional<OutputSize> size;
    if (params.contains("output_size") && !params["output_size"].is_null()) {
      size = OutputSize{params["output_size"].at("width").get<int>(),
                        params["output_size"].at("height").get<int>()};
    }
    job.params = GenerationParams(0, params.value("steps", 20), params.value("cfg_scale", 3.5),
                                  params.value("denoise_strength", 1.0),
                                  params.value("sample_count", 1), size);
    job.seeds = body.at("seeds").get<std::vector<std::uint64_t>>();
    job.workflow_ids = body.value("workflow_ids", std::vector<std::string>{"default"});
    job.generation_backend = body.value("generation_backend", std::string("mock:noise"));
    job.detector_backend = body.value("detector_backend", std::string("mock"));
    job.thresholds.conf = body.value("conf_threshold", 0.5);
    job.thresholds.iou = body.value("iou_threshold", 0.5);
    job.mask_dilation = body.value("mask_dilation", 0);
    return job;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kInvalidArgument, std::string("malformed job specification: ") + e.what());
  }
}

// ---------------------------------------------------------------------------

ApiServer::ApiServer(ServerConfig config, BackendRegistry& backends)
    : config_(std::move(config)), backends_(backends), http_(std::make_unique<httplib::Server>()) {
  if (config_.catalog_path) catalog_ = parse_catalog(read_text_file(*config_.catalog_path));
  if (config_.workflow_dir) workflows_.load_directory(*config_.workflow_dir);
  coordinator_ = std::make_unique<Coordinator>(
      CoordinatorOptions{config_.root, config_.workers, config_.retry}, backends_, workflows_);
  install_routes();
}

ApiServer::~ApiServer() { stop(); }

int ApiServer::bind() {
  int port = config_.port;
  if (port == 0) {
    port = http_->bind_to_any_port(config_.host);
    if (port < 0) fail(ErrorCode::kIo, "cannot bind " + config_.host);
  } else if (!http_->bind_to_port(config_.host, port)) {
    fail(ErrorCode::kIo, "cannot bind " + config_.host + ":" + std::to_string(port));
  }
  bound_ = true;
  return port;
}

void ApiServer::serve() { http_->listen_after_bind(); }

int ApiServer::start() {
  const int port = bind();
  thread_ = std::thread([this] { serve(); });
  http_->wait_until_ready();
  return port;
}

void ApiServer::stop() {
  if (coordinator_) coordinator_->shutdown();
  if (http_) http_->stop();
  if (thread_.joinable()) thread_.join();
}

void ApiServer::install_routes() {
  auto& srv = *http_;
  const auto root = config_.root;

  srv.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
    try {
      std::rethrow_exception(ep);
    } catch (const Error& e) {
      send_error(res, api_code_for(e.code()), e.what(), {{"cause", to_string(e.code())}});
    } catch (const std::exception& e) {
      send_error(res, ApiCode::kInternal, e.what());
    } catch (...) {
      send_error(res, ApiCode::kInternal, "unknown error");
    }
  });

  srv.Get("/health", [](const httplib::Request&, httplib::Response& res) {
    send_json(res, {{"status", "ok"}, {"version", kVersion}});
  });

  srv.Get("/catalog", [this](const httplib::Request&, httplib::Response& res) {
    if (!catalog_) fail(ErrorCode::kNotFound, "no catalog loaded");
    res.set_content(serialize_catalog(*catalog_), "application/json");
  });

  srv.Post("/catalog/draft", [this](const httplib::Request& req, httplib::Response& res) {
    const auto body = parse_body(req);
    if (!body.contains("odd_text") || !body["odd_text"].is_string()) {
      fail(ErrorCode::kInvalidArgument, "odd_text is required");
    }
    auto client = backends_.llm();
    const auto draft = draft_catalog_via_llm(*client, body["odd_text"].get<std::string>());
    send_json(res, {{"requires_review", draft.requires_review},
                    {"generator", draft.generator},
                    {"catalog", ojson::parse(serialize_catalog(draft.catalog))}});
  });

  srv.Post("/images", [root](const httplib::Request& req, httplib::Response& res) {
    std::string data, name = "upload.png";
    if (req.has_file("image")) {
      const auto f = req.get_file_value("image");
      data = f.content;
      if (!f.filename.empty()) name = f.filename;
    } else {
      data = req.body;
    }
    if (data.empty()) fail(ErrorCode::kInvalidArgument, "no image uploaded");
    const Bytes png(data.begin(), data.end());
    ImageRef ref;
    try {
      ref = make_image_ref(png, name);
    } catch (const Error& e) {
      fail(ErrorCode::kInvalidArgument, std::string("upload is not a PNG: ") + e.what());
    }
    fs::create_directories(uploads(root, "images"));
    const auto path = uploads(root, "images") / (ref.id + ".png");
    if (!fs::exists(path)) write_file_atomic(path, png);
    write_file_atomic(uploads(root, "images") / (ref.id + ".json"),
                      ojson{{"source_name", ref.source_name}}.dump());
    send_json(res, {{"id", ref.id}, {"width", ref.width}, {"height", ref.height}, {"source_name", ref.source_name}});
  });

  srv.Post(R"(/images/([0-9a-f]{64})/automask)", [this, root](const httplib::Request& req, httplib::Response& res) {
    const auto body = parse_body(req);
    Bytes png;
    const auto ref = load_image_ref(root, req.matches[1], &png);
    auto client = backends_.automask();
    const auto mask = request_auto_mask(*client, ref, png, body.value("prompt", std::string()));
    Bytes mask_png;
    const auto id = store_mask(root, mask, &mask_png);
    res.set_header("X-Mask-Id", id);
    res.set_content(std::string(mask_png.begin(), mask_png.end()), "image/png");
  });

  srv.Post("/masks/rasterize", [root](const httplib::Request& req, httplib::Response& res) {
    const auto body = parse_body(req);
    if (!body.contains("width") || !body.contains("height") || !body.contains("strokes")) {
      fail(ErrorCode::kInvalidArgument, "width, height and strokes are required");
    }
    const auto strokes = strokes_from_json(body["strokes"]);
    const auto mask = rasterize_strokes(strokes, body["width"].get<int>(), body["height"].get<int>());
    Bytes png;
    const auto id = store_mask(root, mask, &png);
    res.set_header("X-Mask-Id", id);
    res.set_content(std::string(png.begin(), png.end()), "image/png");
  });

  srv.Post("/masks", [root](const httplib::Request& req, httplib::Response& res) {
    const std::string data = req.has_file("mask") ? req.get_file_value("mask").content : req.body;
    RasterMask mask;
    try {
      mask = mask_from_png(Bytes(data.begin(), data.end()));
    } catch (const Error& e) {
      fail(ErrorCode::kInvalidArgument, std::string("upload is not a mask PNG: ") + e.what());
    }
    const auto id = store_mask(root, mask, nullptr);
    send_json(res, {{"mask_id", id}, {"popcount", mask.popcount()}});
  });

  srv.Post("/jobs", [this, root](const httplib::Request& req, httplib::Response& res) {
    auto job = job_from_request(parse_body(req), root, catalog_);
    const auto id = coordinator_->enqueue(std::move(job));
    send_json(res, {{"job_id", id}});
  });

  srv.Get(R"(/jobs/([^/]+))", [this, root](const httplib::Request& req, httplib::Response& res) {
    const auto folder = checked_job_folder(*coordinator_, root, req.matches[1]);
    res.set_content(read_text_file(folder / "job.json"), "application/json");
  });

  srv.Get(R"(/jobs/([^/]+)/events)", [this](const httplib::Request& req, httplib::Response& res) {
    const std::string id = req.matches[1];
    if (!std::regex_match(id, kJobIdPattern)) fail(ErrorCode::kInvalidArgument, "malformed job id");
    auto sub = std::make_shared<Subscription>(coordinator_->subscribe(id));
    res.set_chunked_content_provider("application/x-ndjson", [sub](std::size_t, httplib::DataSink& sink) {
      if (!sink.is_writable()) return false;
      if (auto ev = sub->next_for(std::chrono::milliseconds(250))) {
        const auto line = to_json(*ev).dump() + "\n";
        if (!sink.write(line.data(), line.size())) return false;
      }
      if (sub->done()) sink.done();
      return true;
    });
  });

  srv.Post(R"(/jobs/([^/]+)/cancel)", [this](const httplib::Request& req, httplib::Response& res) {
    const std::string id = req.matches[1];
    coordinator_->cancel(id);
    send_json(res, {{"job_id", id}, {"state", to_string(coordinator_->state(id))}});
  });

  srv.Get(R"(/jobs/([^/]+)/results\.csv)", [this, root](const httplib::Request& req, httplib::Response& res) {
    const auto folder = checked_job_folder(*coordinator_, root, req.matches[1]);
    res.set_content(export_csv(folder), "text/csv");
  });

  // The task segment is the folder name; a full "<job>/<folder>" task id also works.
  srv.Get(R"(/jobs/([^/]+)/tasks/(.+)/((?:output_\d+\.png)|(?:detections_\d+\.json)|(?:comparison\.json)))",
          [this, root](const httplib::Request& req, httplib::Response& res) {
            const std::string job_id = req.matches[1];
            const auto folder = checked_job_folder(*coordinator_, root, job_id);
            std::string task = req.matches[2];
            if (task.starts_with(job_id + "/")) task = task.substr(job_id.size() + 1);
            if (task.empty() || task.starts_with(".") || task.find('/') != std::string::npos) {
              fail(ErrorCode::kInvalidArgument, "malformed task id");
            }
            const std::string file = req.matches[3];
            const auto path = folder / "tasks" / task / file;
            if (!fs::exists(path)) fail(ErrorCode::kNotFound, "no such artifact: " + task + "/" + file);
            const auto bytes = read_file(path);
            res.set_content(std::string(bytes.begin(), bytes.end()),
                            file.ends_with(".png") ? "image/png" : "application/json");
          });
}

}  // namespace semprobe
