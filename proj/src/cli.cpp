// Copyright 2026 The SemProbe Authors
// SPDX-License-Identifier: Apache-2.0

#include <CLI11.hpp>
#include <csignal>
#include <iostream>
#include <sstream>

#include "semprobe/gateway.hpp"

namespace semprobe {

namespace {

struct RunOptions {
  std::string catalog;
  std::string images;
  std::string gt;
  std::string mask;
  std::string auto_mask;
  std::string factor;
  std::string level;
  std::vector<std::string> context;
  std::string prompt;
  std::string negative;
  std::vector<std::uint64_t> seeds{1};
  std::vector<std::string> workflows{"default"};
  std::string workflow_dir;
  int steps = 20;
  double cfg = 3.5;
  double denoise = 1.0;
  int samples = 1;
  std::string gen_backend = "mock:noise";
  std::string detector = "mock";
  double conf = 0.5;
  double iou = 0.5;
  std::size_t workers = 2;
  std::string out;
  std::string job_id;
  int mask_dilate = 0;
};

std::vector<fs::path> list_pngs(const fs::path& dir) {
  if (!fs::is_directory(dir)) fail(ErrorCode::kInvalidArgument, "not a directory: " + dir.string());
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".png") out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  if (out.empty()) fail(ErrorCode::kInvalidArgument, "no .png files in " + dir.string());
  return out;
}

ProbeJob build_job(const RunOptions& o, BackendRegistry& backends) {
  ProbeJob job;
  job.job_id = o.job_id;
  const auto catalog = parse_catalog(read_text_file(o.catalog));

  for (const auto& path : list_pngs(o.images)) {
    JobImage img;
    img.png = read_file(path);
    img.ref = make_image_ref(img.png, path.filename().string());
    const auto stem = path.stem().string();

    if (!o.auto_mask.empty()) {
      auto client = backends.automask();
      img.mask = request_auto_mask(*client, img.ref, img.png, o.auto_mask);
    } else if (fs::is_directory(o.mask)) {
      const auto mask_path = fs::path(o.mask) / (stem + ".png");
      if (!fs::exists(mask_path)) fail(ErrorCode::kInvalidArgument, "no mask for " + stem);
      img.mask = mask_from_png(read_file(mask_path));
    } else {
      img.mask = mask_from_png(read_file(o.mask));
    }

    std::string labels;
    if (!o.gt.empty()) {
      const auto gt_path = fs::path(o.gt) / (stem + ".txt");
      if (fs::exists(gt_path)) labels = read_text_file(gt_path);
    }
    img.ground_truth = parse_yolo_labels(labels, img.ref.id, img.ref.width, img.ref.height);
    job.images.push_back(std::move(img));
  }

  if (!o.factor.empty()) {
    PromptContext context;
    for (const auto& kv : o.context) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) fail(ErrorCode::kInvalidArgument, "--context expects key=value");
      context[kv.substr(0, eq)] = kv.substr(eq + 1);
    }
    job.prompt = render_prompt(catalog, o.factor, o.level, context);
  } else {
    job.prompt = custom_prompt(o.prompt);
  }
  if (!o.negative.empty()) job.prompt.negative_text = o.negative;

  job.params = GenerationParams(0, o.steps, o.cfg, o.denoise, o.samples);
  job.seeds = o.seeds;
  job.workflow_ids = o.workflows;
  job.generation_backend = o.gen_backend;
  job.detector_backend = o.detector;
  job.thresholds = {o.conf, o.iou};
  job.mask_dilation = o.mask_dilate;
  return job;
}

std::string describe(const ProgressEvent& e) {
  std::ostringstream s;
  s << "[" << e.completed_count << "/" << e.total_count << "] " << to_string(e.kind);
  if (e.task_id) s << " " << *e.task_id;
  if (e.stage) s << " stage=" << *e.stage;
  if (e.message) s << " " << *e.message;
  return s.str();
}

int do_run(const RunOptions& o, std::ostream& out, std::ostream& err) {
  BackendRegistry backends;
  WorkflowRegistry workflows;
  ProbeJob job;
  try {
    if (!o.workflow_dir.empty()) workflows.load_directory(o.workflow_dir);
    if (o.mask.empty() == o.auto_mask.empty()) {
      fail(ErrorCode::kInvalidArgument, "exactly one of --mask or --auto-mask is required");
    }
    if (o.factor.empty() == o.prompt.empty()) {
      fail(ErrorCode::kInvalidArgument, "exactly one of --factor or --prompt is required");
    }
    if (!o.factor.empty() && o.level.empty()) fail(ErrorCode::kInvalidArgument, "--factor needs --level");
    job = build_job(o, backends);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }

  Coordinator coordinator({o.out, o.workers, RetryPolicy{}}, backends, workflows);
  std::string id;
  try {
    id = coordinator.enqueue(std::move(job));
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }

  auto sub = coordinator.subscribe(id);
  while (auto ev = sub.next()) out << describe(*ev) << "\n";
  const auto state = coordinator.wait(id);
  coordinator.shutdown();

  const auto folder = job_folder(o.out, id);
  const auto csv_path = folder / "results.csv";
  write_file_atomic(csv_path, export_csv(folder));
  out << "job " << id << " " << to_string(state) << "\n" << csv_path.string() << "\n";
  return state == RunState::kCompleted ? 0 : 1;
}

int do_verify(const std::string& job, std::ostream& out) {
  const auto report = verify_job(job);
  for (const auto& f : report.findings) {
    out << to_string(f.kind) << " " << f.path;
    if (!f.detail.empty()) out << ": " << f.detail;
    out << "\n";
  }
  out << (report.clean() ? "clean" : std::to_string(report.findings.size()) + " finding(s)") << "\n";
  return report.clean() ? 0 : 1;
}

int do_export(const std::string& job, const std::string& format, std::ostream& out) {
  const fs::path folder(job);
  const auto path = folder / (format == "json" ? "results.json" : "results.csv");
  write_file_atomic(path, format == "json" ? export_json(folder) : export_csv(folder));
  out << path.string() << "\n";
  return 0;
}

int do_serve(ServerConfig config) {
  sigset_t set;
  sigemptyset(&set);
  sigaddset(&set, SIGINT);
  sigaddset(&set, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &set, nullptr);

  BackendRegistry backends;
  ApiServer server(std::move(config), backends);
  const int port = server.start();
  std::cout << "listening on port " << port << std::endl;
  int sig = 0;
  sigwait(&set, &sig);
  server.stop();
  return 0;
}

}  // namespace

int run_cli(std::span<const std::string> args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Semantic robustness probing for object detectors"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kVersion));

  RunOptions run;
  auto* run_cmd = app.add_subcommand("run", "Run a probing job to completion");
  run_cmd->add_option("--catalog", run.catalog, "Factor catalog JSON")->required()->check(CLI::ExistingFile);
  run_cmd->add_option("--images", run.images, "Directory of PNG images")->required();
  run_cmd->add_option("--gt", run.gt, "Directory of YOLO label files (<stem>.txt)")->required();
  run_cmd->add_option("--mask", run.mask, "Mask PNG, or directory of <stem>.png masks");
  run_cmd->add_option("--auto-mask", run.auto_mask, "Text prompt for the auto-masking service");
  run_cmd->add_option("--factor", run.factor, "Catalog factor id");
  run_cmd->add_option("--level", run.level, "Catalog level id");
  run_cmd->add_option("--context", run.context, "Template value as key=value");
  run_cmd->add_option("--prompt", run.prompt, "Custom prompt instead of a catalog factor");
  run_cmd->add_option("--negative", run.negative, "Negative prompt");
  run_cmd->add_option("--seeds", run.seeds, "Seeds")->delimiter(',');
  run_cmd->add_option("--workflows", run.workflows, "Workflow ids")->delimiter(',');
  run_cmd->add_option("--workflow-dir", run.workflow_dir, "Directory of <id>.json workflow templates");
  run_cmd->add_option("--steps", run.steps);
  run_cmd->add_option("--cfg", run.cfg);
  run_cmd->add_option("--denoise", run.denoise);
  run_cmd->add_option("--samples", run.samples);
  run_cmd->add_option("--gen-backend", run.gen_backend);
  run_cmd->add_option("--detector", run.detector);
  run_cmd->add_option("--conf", run.conf);
  run_cmd->add_option("--iou", run.iou);
  run_cmd->add_option("--workers", run.workers)->check(CLI::PositiveNumber);
  run_cmd->add_option("--out", run.out, "Artifacts root")->required();
  run_cmd->add_option("--job-id", run.job_id);
  run_cmd->add_option("--mask-dilate", run.mask_dilate);

  std::string job_dir, format = "csv";
  auto* verify_cmd = app.add_subcommand("verify", "Check a job folder against its manifest");
  verify_cmd->add_option("--job", job_dir)->required();
  auto* export_cmd = app.add_subcommand("export", "Write results.csv or results.json");
  export_cmd->add_option("--job", job_dir)->required();
  export_cmd->add_option("--format", format)->check(CLI::IsMember({"csv", "json"}));

  ServerConfig serve;
  std::string serve_catalog, serve_workflows;
  auto* serve_cmd = app.add_subcommand("serve", "Run the HTTP API");
  serve_cmd->add_option("--root", serve.root);
  serve_cmd->add_option("--catalog", serve_catalog)->check(CLI::ExistingFile);
  serve_cmd->add_option("--host", serve.host);
  serve_cmd->add_option("--port", serve.port);
  serve_cmd->add_option("--workers", serve.workers);
  serve_cmd->add_option("--workflow-dir", serve_workflows);

  std::vector<std::string> argv{"semprobe"};
  argv.insert(argv.end(), args.begin(), args.end());
  std::vector<const char*> cargv;
  for (const auto& a : argv) cargv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(cargv.size()), cargv.data());
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? 0 : 2;
  }

  try {
    if (*run_cmd) return do_run(run, out, err);
    if (*verify_cmd) return do_verify(job_dir, out);
    if (*export_cmd) return do_export(job_dir, format, out);
    if (!serve_catalog.empty()) serve.catalog_path = serve_catalog;
    if (!serve_workflows.empty()) serve.workflow_dir = serve_workflows;
    return do_serve(std::move(serve));
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return e.code() == ErrorCode::kIntegrity ? 1 : 2;
  }
}

}  // namespace semprobe
