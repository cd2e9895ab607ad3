// Copyright 2026 The SemProbe Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>
#include <httplib.h>

#include <thread>

#include "cli_fixture.hpp"
#include "job_fixtures.hpp"
#include "semprobe/artifacts.hpp"

namespace semprobe {
namespace {

using testing::TempDir;

class Gateway : public ::testing::Test {
 protected:
  void SetUp() override {
    catalog_path_ = dir_ / "catalog.json";
    write_file_atomic(catalog_path_, std::string(builtin_saw_catalog()));
    automask_.server().Post("/segment", [](const httplib::Request& req, httplib::Response& res) {
      const auto body = nlohmann::json::parse(req.body);
      const auto img = decode_png_rgb(base64_decode(body["image"].get<std::string>()));
      const auto m = testing::box_mask(img.width, img.height, 0, 0, img.width / 2, img.height / 2);
      res.set_content(nlohmann::json{{"mask", base64_encode(Bytes(mask_to_png(m)))}}.dump(), "application/json");
    });
    BackendConfig bc;
    bc.llm_url = "mock";
    bc.automask_url = automask_.url();
    backends_ = std::make_unique<BackendRegistry>(bc);
    backends_->register_detector("slow", std::make_shared<testing::SquareDetector>(std::chrono::milliseconds(200)));
    ServerConfig sc;
    sc.port = 0;
    sc.root = dir_ / "root";
    sc.catalog_path = catalog_path_;
    server_ = std::make_unique<ApiServer>(sc, *backends_);
    port_ = server_->start();
    client_ = std::make_unique<httplib::Client>("127.0.0.1", port_);
    client_->set_read_timeout(30, 0);
  }
  void TearDown() override { server_->stop(); }

  std::string upload(const Bytes& png, const std::string& name) {
    httplib::MultipartFormDataItems items{{"image", std::string(png.begin(), png.end()), name, "image/png"}};
    auto res = client_->Post("/images", items);
    EXPECT_EQ(res->status, 200) << res->body;
    return ojson::parse(res->body)["id"].get<std::string>();
  }

  httplib::Result post_json(const std::string& path, const ojson& body) {
    return client_->Post(path, body.dump(), "application/json");
  }

  static void expect_error(const httplib::Result& res, int status, const std::string& code) {
    ASSERT_TRUE(res);
    EXPECT_EQ(res->status, status) << res->body;
    EXPECT_EQ(ojson::parse(res->body)["error"]["code"], code) << res->body;
  }

  std::string wait_done(const std::string& id) {
    server_->coordinator().wait(id);
    return std::string(to_string(server_->coordinator().state(id)));
  }

  TempDir dir_;
  std::filesystem::path catalog_path_;
  testing::FakeServer automask_;
  std::unique_ptr<BackendRegistry> backends_;
  std::unique_ptr<ApiServer> server_;
  std::unique_ptr<httplib::Client> client_;
  int port_ = 0;
};

TEST_F(Gateway, HealthAndCatalog) {
  auto h = client_->Get("/health");
  ASSERT_TRUE(h);
  EXPECT_EQ(h->status, 200);
  EXPECT_EQ(ojson::parse(h->body)["status"], "ok");

  auto c = client_->Get("/catalog");
  ASSERT_EQ(c->status, 200);
  EXPECT_EQ(c->body, serialize_catalog(parse_catalog(builtin_saw_catalog())));
}

TEST_F(Gateway, CatalogDraftRequiresReview) {
  auto r = post_json("/catalog/draft", {{"odd_text", "table saw, indoor workshop"}});
  ASSERT_EQ(r->status, 200) << r->body;
  const auto j = ojson::parse(r->body);
  EXPECT_EQ(j["requires_review"], true);
  EXPECT_EQ(j["generator"], "llm:mock");
  EXPECT_NO_THROW(parse_catalog(j["catalog"].dump()));
  expect_error(post_json("/catalog/draft", ojson::object()), 400, "INVALID_ARGUMENT");
}

TEST_F(Gateway, ImageUploadIsContentAddressed) {
  const auto png = testing::make_png(40, 30, 1);
  const auto id = upload(png, "a.png");
  EXPECT_EQ(id, sha256_hex(png));
  EXPECT_EQ(upload(png, "b.png"), id);
  auto bad = client_->Post("/images", "not a png", "application/octet-stream");
  expect_error(bad, 400, "INVALID_ARGUMENT");
}

TEST_F(Gateway, RasterizeAndMaskUpload) {
  const ojson strokes = ojson::array({{{"points", {{5, 5}, {15, 5}}}, {"radius", 2}, {"mode", "add"}}});
  auto r = post_json("/masks/rasterize", {{"width", 20}, {"height", 12}, {"strokes", strokes}});
  ASSERT_EQ(r->status, 200) << r->body;
  EXPECT_EQ(r->get_header_value("Content-Type"), "image/png");
  const auto mask = mask_from_png(Bytes(r->body.begin(), r->body.end()));
  const auto expected = rasterize_strokes(strokes_from_json(strokes), 20, 12);
  EXPECT_EQ(mask, expected);

  auto m = client_->Post("/masks", r->body, "image/png");
  ASSERT_EQ(m->status, 200);
  const auto j = ojson::parse(m->body);
  EXPECT_EQ(j["mask_id"], r->get_header_value("X-Mask-Id"));
  EXPECT_EQ(j["popcount"], expected.popcount());

  const ojson neg = ojson::array({{{"points", {{1, 1}}}, {"radius", -1}}});
  expect_error(post_json("/masks/rasterize", {{"width", 4}, {"height", 4}, {"strokes", neg}}), 400, "INVALID_ARGUMENT");
  expect_error(post_json("/masks/rasterize", {{"width", 4}}), 400, "INVALID_ARGUMENT");
}

TEST_F(Gateway, AutoMaskUsesService) {
  const auto id = upload(testing::make_png(16, 16), "a.png");
  auto r = post_json("/images/" + id + "/automask", {{"prompt", "hand"}});
  ASSERT_EQ(r->status, 200) << r->body;
  const auto mask = mask_from_png(Bytes(r->body.begin(), r->body.end()));
  EXPECT_EQ(mask, testing::box_mask(16, 16, 0, 0, 8, 8));
  expect_error(post_json("/images/" + std::string(64, 'a') + "/automask", {{"prompt", "x"}}), 404, "NOT_FOUND");
}

TEST_F(Gateway, JobLifecycle) {
  const auto a = upload(testing::make_png(32, 32, 0), "a.png");
  const auto b = upload(testing::make_png(32, 32, 1), "b.png");
  const auto c = upload(testing::make_png(32, 32, 2), "c.png");
  const auto m = client_->Post("/masks", std::string([] {
    const auto p = mask_to_png(testing::box_mask(32, 32, 8, 8, 16, 16));
    return std::string(p.begin(), p.end());
  }()), "image/png");
  const auto mask_id = ojson::parse(m->body)["mask_id"].get<std::string>();
  const std::string gt = "0 0.375 0.375 0.25 0.25\n";
  const ojson body = {
      {"job_id", "api-job"},
      {"images",
       {{{"image_id", a}, {"mask_rle", encode_rle(testing::box_mask(32, 32, 8, 8, 16, 16))}, {"ground_truth", gt}},
        {{"image_id", b}, {"mask_id", mask_id}, {"ground_truth", gt}},
        {{"image_id", c},
         {"strokes", {{{"points", {{12, 12}}}, {"radius", 4}}}},
         {"ground_truth", gt}}}},
      {"factor_id", "hand_covering"},
      {"level_id", "glove"},
      {"context", {{"glove_type", "nitrile"}}},
      {"seeds", {1, 2}},
      {"params", {{"sample_count", 2}, {"denoise_strength", 0.5}}},
      {"detector_backend", "slow"}};
  auto r = post_json("/jobs", body);
  ASSERT_EQ(r->status, 200) << r->body;
  EXPECT_EQ(ojson::parse(r->body)["job_id"], "api-job");
  expect_error(post_json("/jobs", body), 409, "CONFLICT");

  std::string events;
  auto ev = client_->Get("/jobs/api-job/events", [&](const char* data, std::size_t n) {
    events.append(data, n);
    return true;
  });
  ASSERT_TRUE(ev);
  EXPECT_EQ(wait_done("api-job"), "COMPLETED");
  std::vector<ojson> lines;
  std::istringstream in(events);
  for (std::string line; std::getline(in, line);) lines.push_back(ojson::parse(line));
  ASSERT_FALSE(lines.empty());
  EXPECT_EQ(lines.front()["kind"], "JOB_QUEUED");
  EXPECT_EQ(lines.back()["kind"], "JOB_COMPLETED");
  EXPECT_EQ(lines.back()["completed_count"], 6);

  auto man = client_->Get("/jobs/api-job");
  ASSERT_EQ(man->status, 200);
  const auto manifest = parse_manifest(man->body);
  ASSERT_EQ(manifest.tasks.size(), 6u);

  auto csv = client_->Get("/jobs/api-job/results.csv");
  ASSERT_EQ(csv->status, 200);
  EXPECT_EQ(std::count(csv->body.begin(), csv->body.end(), '\n'), 1 + 12);

  const auto& task = manifest.tasks[0];
  const auto folder = task.task_id.substr(task.task_id.find('/') + 1);
  for (const auto& seg : {folder, task.task_id}) {
    auto png = client_->Get("/jobs/api-job/tasks/" + seg + "/output_0.png");
    ASSERT_EQ(png->status, 200) << seg;
    EXPECT_EQ(sha256_hex(Bytes(png->body.begin(), png->body.end())), task.samples[0].output_sha256);
    auto cmp = client_->Get("/jobs/api-job/tasks/" + seg + "/comparison.json");
    ASSERT_EQ(cmp->status, 200);
    const auto doc = ojson::parse(cmp->body);
    EXPECT_EQ(doc["task_id"], task.task_id);
    ASSERT_EQ(doc["samples"].size(), 2u);
  }
  expect_error(client_->Get("/jobs/api-job/tasks/" + folder + "/output_9.png"), 404, "NOT_FOUND");
  expect_error(client_->Get("/jobs/api-job/tasks/../output_0.png"), 400, "INVALID_ARGUMENT");
  expect_error(client_->Get("/jobs/nope"), 404, "NOT_FOUND");
  expect_error(client_->Get("/jobs/nope/results.csv"), 404, "NOT_FOUND");
}

TEST_F(Gateway, JobValidationErrors) {
  const auto a = upload(testing::make_png(16, 16), "a.png");
  ojson body = {{"images", {{{"image_id", a}}}}, {"prompt", "x"}, {"seeds", {1}}};
  auto r = post_json("/jobs", body);
  expect_error(r, 400, "INVALID_ARGUMENT");
  EXPECT_NE(r->body.find("images[0]: missing mask"), std::string::npos);

  body["images"][0]["mask_rle"] = encode_rle(RasterMask(16, 16));
  r = post_json("/jobs", body);
  expect_error(r, 400, "INVALID_ARGUMENT");
  EXPECT_EQ(ojson::parse(r->body)["error"]["detail"]["cause"], "empty-mask");

  body["images"][0]["mask_rle"] = encode_rle(testing::box_mask(16, 16, 0, 0, 4, 4));
  body.erase("prompt");
  body["factor_id"] = "nope";
  body["level_id"] = "x";
  expect_error(post_json("/jobs", body), 404, "NOT_FOUND");

  body.erase("factor_id");
  body["prompt"] = "x";
  body["params"] = {{"denoise_strength", 3}};
  expect_error(post_json("/jobs", body), 400, "INVALID_ARGUMENT");

  body.erase("params");
  body["workflow_ids"] = {"missing"};
  expect_error(post_json("/jobs", body), 404, "NOT_FOUND");

  expect_error(client_->Post("/jobs", "{", "application/json"), 400, "INVALID_ARGUMENT");
  body["images"][0]["image_id"] = std::string(64, 'b');
  body.erase("workflow_ids");
  expect_error(post_json("/jobs", body), 404, "NOT_FOUND");
}

TEST_F(Gateway, CancelStopsQueuedTasks) {
  const auto a = upload(testing::make_png(16, 16), "a.png");
  const ojson body = {{"job_id", "to-cancel"},
                      {"images", {{{"image_id", a}, {"mask_rle", encode_rle(testing::box_mask(16, 16, 0, 0, 8, 8))}}}},
                      {"prompt", "x"},
                      {"seeds", {1, 2, 3, 4, 5, 6, 7, 8}},
                      {"detector_backend", "slow"}};
  ASSERT_EQ(post_json("/jobs", body)->status, 200);
  auto r = post_json("/jobs/to-cancel/cancel", ojson::object());
  ASSERT_EQ(r->status, 200) << r->body;
  EXPECT_EQ(wait_done("to-cancel"), "CANCELLED");
  const auto m = parse_manifest(client_->Get("/jobs/to-cancel")->body);
  EXPECT_TRUE(std::any_of(m.tasks.begin(), m.tasks.end(),
                          [](const TaskRecord& t) { return t.state == RunState::kCancelled; }));
  expect_error(post_json("/jobs/missing-job/cancel", ojson::object()), 404, "NOT_FOUND");
}

TEST_F(Gateway, ApiAndCliProduceIdenticalResults) {
  testing::CliInputs in(2, 48);
  std::vector<ojson> images;
  for (int i = 0; i < 2; ++i) {
    const auto stem = "frame" + std::to_string(i);
    images.push_back({{"image_id", upload(read_file(in.images / (stem + ".png")), stem + ".png")},
                      {"mask_id", ojson::parse(client_->Post("/masks", read_text_file(in.mask), "image/png")->body)["mask_id"]},
                      {"ground_truth", read_text_file(in.gt / (stem + ".txt"))}});
  }
  const ojson body = {{"job_id", "parity"},
                      {"images", images},
                      {"factor_id", "illumination"},
                      {"level_id", "low_light"},
                      {"seeds", {5, 6}},
                      {"workflow_ids", {"default", "grow_mask"}},
                      {"params", {{"sample_count", 2}, {"denoise_strength", 0.7}}}};
  ASSERT_EQ(post_json("/jobs", body)->status, 200);
  ASSERT_EQ(wait_done("parity"), "COMPLETED");
  const auto api_csv = client_->Get("/jobs/parity/results.csv")->body;

  TempDir out;
  const auto r = testing::cli(testing::concat(
      in.run_args(out.path()), {"--factor", "illumination", "--level", "low_light", "--seeds", "5,6", "--workflows",
                                "default,grow_mask", "--samples", "2", "--denoise", "0.7", "--job-id", "parity"}));
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(read_text_file(out / "jobs/parity/results.csv"), api_csv);
}

TEST(GatewayMapping, ErrorCodesMapToStatuses) {
  EXPECT_EQ(http_status(api_code_for(ErrorCode::kInvalidArgument)), 400);
  EXPECT_EQ(http_status(api_code_for(ErrorCode::kNotFound)), 404);
  EXPECT_EQ(http_status(api_code_for(ErrorCode::kBackendUnavailable)), 502);
  EXPECT_EQ(http_status(api_code_for(ErrorCode::kConflict)), 409);
  const auto body = api_error_body(ApiCode::kValidation, "bad", {{"path", "$.x"}});
  EXPECT_EQ(body.dump(), R"({"error":{"code":"VALIDATION","message":"bad","detail":{"path":"$.x"}}})");
}

}  // namespace
}  // namespace semprobe
