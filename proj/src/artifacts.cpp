// Copyright 2026 The SemProbe Authors
// SPDX-License-Identifier: Apache-2.0

#include "semprobe/artifacts.hpp"

#include <cstdio>
#include <set>

#include "semprobe/error.hpp"

namespace semprobe {

std::string_view to_string(RunState s) {
  switch (s) {
    case RunState::kQueued: return "QUEUED";
    case RunState::kRunning: return "RUNNING";
    case RunState::kCompleted: return "COMPLETED";
    case RunState::kFailed: return "FAILED";
    case RunState::kCancelled: return "CANCELLED";
  }
  return "";
}

RunState parse_run_state(std::string_view s) {
  for (auto st : {RunState::kQueued, RunState::kRunning, RunState::kCompleted, RunState::kFailed,
                  RunState::kCancelled}) {
    if (to_string(st) == s) return st;
  }
  fail(ErrorCode::kFormat, "unknown state '" + std::string(s) + "'");
}

std::string_view to_string(FindingKind k) {
  switch (k) {
    case FindingKind::kMissing: return "missing";
    case FindingKind::kModified: return "modified";
    case FindingKind::kCorruptManifest: return "corrupt-manifest";
  }
  return "";
}

TaskRecord* JobManifest::find_task(std::string_view task_id) {
  for (auto& t : tasks) {
    if (t.task_id == task_id) return &t;
  }
  return nullptr;
}

const TaskRecord* JobManifest::find_task(std::string_view task_id) const {
  return const_cast<JobManifest*>(this)->find_task(task_id);
}

std::string task_folder_name(std::string_view task_id) {
  const auto slash = task_id.find('/');
  return std::string(slash == std::string_view::npos ? task_id : task_id.substr(slash + 1));
}

fs::path job_folder(const fs::path& root, std::string_view job_id) {
  return root / "jobs" / std::string(job_id);
}

// ---------------------------------------------------------------------------
// Manifest JSON

namespace {

ojson prompt_json(const PromptSpec& p) {
  ojson j;
  j["text"] = p.text;
  j["negative_text"] = p.negative_text ? ojson(*p.negative_text) : ojson(nullptr);
  if (p.source) {
    j["provenance"] = {{"factor_id", p.source->factor_id}, {"level_id", p.source->level_id}};
  } else {
    j["provenance"] = "CUSTOM";
  }
  return j;
}

PromptSpec prompt_from(const ojson& j) {
  PromptSpec p;
  p.text = j.at("text").get<std::string>();
  if (!j.at("negative_text").is_null()) p.negative_text = j["negative_text"].get<std::string>();
  const auto& prov = j.at("provenance");
  if (prov.is_string()) {
    if (prov.get<std::string>() != "CUSTOM") fail(ErrorCode::kFormat, "unknown provenance marker");
  } else {
    p.source = CatalogEntryRef{prov.at("factor_id").get<std::string>(),
                               prov.at("level_id").get<std::string>()};
  }
  return p;
}

ojson params_json(const GenerationParams& g) {
  ojson j;
  j["seed"] = g.seed();
  j["steps"] = g.steps();
  j["cfg_scale"] = g.cfg_scale();
  j["denoise_strength"] = g.denoise_strength();
  j["sample_count"] = g.sample_count();
  if (g.output_size()) {
    j["output_size"] = {{"width", g.output_size()->width}, {"height", g.output_size()->height}};
  } else {
    j["output_size"] = nullptr;
  }
  return j;
}

GenerationParams params_from(const ojson& j) {
  std::optional<OutputSize> size;
  if (!j.at("output_size").is_null()) {
    size = OutputSize{j["output_size"].at("width").get<int>(), j["output_size"].at("height").get<int>()};
  }
  return GenerationParams(j.at("seed").get<std::uint64_t>(), j.at("steps").get<int>(),
                          j.at("cfg_scale").get<double>(), j.at("denoise_strength").get<double>(),
                          j.at("sample_count").get<int>(), size);
}

ojson sample_json(const SampleRecord& s) {
  ojson j;
  j["sample_index"] = s.sample_index;
  j["output_path"] = s.output_path;
  j["output_sha256"] = s.output_sha256;
  j["detections_path"] = s.detections_path;
  j["detections_sha256"] = s.detections_sha256;
  j["detector_id"] = s.detector_id;
  j["metrics"] = {{"tp", s.tp},
                  {"fp", s.fp},
                  {"fn", s.fn},
                  {"precision", s.precision},
                  {"recall", s.recall},
                  {"f1", s.f1},
                  {"delta_precision", s.delta_precision},
                  {"delta_recall", s.delta_recall},
                  {"mean_conf_delta", s.mean_conf_delta},
                  {"disappeared", s.disappeared},
                  {"appeared", s.appeared}};
  return j;
}

SampleRecord sample_from(const ojson& j) {
  SampleRecord s;
  s.sample_index = j.at("sample_index").get<int>();
  s.output_path = j.at("output_path").get<std::string>();
  s.output_sha256 = j.at("output_sha256").get<std::string>();
  s.detections_path = j.at("detections_path").get<std::string>();
  s.detections_sha256 = j.at("detections_sha256").get<std::string>();
  s.detector_id = j.at("detector_id").get<std::string>();
  const auto& m = j.at("metrics");
  s.tp = m.at("tp").get<std::size_t>();
  s.fp = m.at("fp").get<std::size_t>();
  s.fn = m.at("fn").get<std::size_t>();
  s.precision = m.at("precision").get<double>();
  s.recall = m.at("recall").get<double>();
  s.f1 = m.at("f1").get<double>();
  s.delta_precision = m.at("delta_precision").get<double>();
  s.delta_recall = m.at("delta_recall").get<double>();
  s.mean_conf_delta = m.at("mean_conf_delta").get<double>();
  s.disappeared = m.at("disappeared").get<std::size_t>();
  s.appeared = m.at("appeared").get<std::size_t>();
  return s;
}

ojson task_json(const TaskRecord& t) {
  ojson j;
  j["task_id"] = t.task_id;
  j["image_index"] = t.image_index;
  j["seed"] = t.seed;
  j["workflow_id"] = t.workflow_id;
  j["state"] = to_string(t.state);
  j["error"] = t.error ? ojson{{"stage", t.error->stage}, {"message", t.error->message}} : ojson(nullptr);
  j["samples"] = ojson::array();
  for (const auto& s : t.samples) j["samples"].push_back(sample_json(s));
  j["comparison_path"] = t.comparison_path;
  j["comparison_sha256"] = t.comparison_sha256;
  return j;
}

TaskRecord task_from(const ojson& j) {
  TaskRecord t;
  t.task_id = j.at("task_id").get<std::string>();
  t.image_index = j.at("image_index").get<std::size_t>();
  t.seed = j.at("seed").get<std::uint64_t>();
  t.workflow_id = j.at("workflow_id").get<std::string>();
  t.state = parse_run_state(j.at("state").get<std::string>());
  if (!j.at("error").is_null()) {
    t.error = TaskError{j["error"].at("stage").get<std::string>(), j["error"].at("message").get<std::string>()};
  }
  for (const auto& s : j.at("samples")) t.samples.push_back(sample_from(s));
  t.comparison_path = j.at("comparison_path").get<std::string>();
  t.comparison_sha256 = j.at("comparison_sha256").get<std::string>();
  return t;
}

}  // namespace

ojson to_json(const JobManifest& m) {
  ojson j;
  j["schema_version"] = m.schema_version;
  j["job_id"] = m.job_id;
  j["created_at"] = m.created_at;
  j["state"] = to_string(m.state);
  j["prompt"] = prompt_json(m.prompt);
  j["params"] = params_json(m.params);
  j["seeds"] = m.seeds;
  j["workflow_ids"] = m.workflow_ids;
  j["workflows"] = ojson::array();
  for (const auto& w : m.workflows) {
    j["workflows"].push_back({{"id", w.id}, {"path", w.path}, {"sha256", w.sha256}});
  }
  j["backends"] = {{"generation", m.generation_backend}, {"detector", m.detector_backend}};
  j["conf_threshold"] = m.conf_threshold;
  j["iou_threshold"] = m.iou_threshold;
  j["mask_dilation"] = m.mask_dilation;
  j["metric_conventions"] = {
      {"precision_when_no_predictions", 1.0},
      {"recall_when_no_ground_truth", 1.0},
      {"f1_when_precision_and_recall_zero", 0.0},
      {"confidence_filter", "keep confidence >= conf_threshold"},
      {"matching", "greedy, class-aware, confidence descending, IoU >= iou_threshold"},
      {"batch_aggregation", "micro"}};
  j["inputs"] = ojson::array();
  for (const auto& in : m.inputs) {
    j["inputs"].push_back({{"image_id", in.image_id},
                           {"source_name", in.source_name},
                           {"width", in.width},
                           {"height", in.height},
                           {"image_path", in.image_path},
                           {"mask_rle", in.mask_rle},
                           {"mask_path", in.mask_path},
                           {"mask_sha256", in.mask_sha256},
                           {"ground_truth_path", in.ground_truth_path},
                           {"ground_truth_sha256", in.ground_truth_sha256}});
  }
  j["tasks"] = ojson::array();
  for (const auto& t : m.tasks) j["tasks"].push_back(task_json(t));
  return j;
}

JobManifest manifest_from_json(const ojson& j) {
  JobManifest m;
  m.schema_version = j.at("schema_version").get<int>();
  if (m.schema_version != kManifestSchemaVersion) {
    fail(ErrorCode::kIntegrity, "unsupported manifest schema_version " + std::to_string(m.schema_version));
  }
  m.job_id = j.at("job_id").get<std::string>();
  m.created_at = j.at("created_at").get<std::string>();
  m.state = parse_run_state(j.at("state").get<std::string>());
  m.prompt = prompt_from(j.at("prompt"));
  m.params = params_from(j.at("params"));
  m.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
  m.workflow_ids = j.at("workflow_ids").get<std::vector<std::string>>();
  for (const auto& w : j.at("workflows")) {
    m.workflows.push_back({w.at("id").get<std::string>(), w.at("path").get<std::string>(),
                           w.at("sha256").get<std::string>()});
  }
  m.generation_backend = j.at("backends").at("generation").get<std::string>();
  m.detector_backend = j.at("backends").at("detector").get<std::string>();
  m.conf_threshold = j.at("conf_threshold").get<double>();
  m.iou_threshold = j.at("iou_threshold").get<double>();
  m.mask_dilation = j.at("mask_dilation").get<int>();
  for (const auto& in : j.at("inputs")) {
    InputRecord r;
    r.image_id = in.at("image_id").get<std::string>();
    r.source_name = in.at("source_name").get<std::string>();
    r.width = in.at("width").get<int>();
    r.height = in.at("height").get<int>();
    r.image_path = in.at("image_path").get<std::string>();
    r.mask_rle = in.at("mask_rle").get<std::string>();
    r.mask_path = in.at("mask_path").get<std::string>();
    r.mask_sha256 = in.at("mask_sha256").get<std::string>();
    r.ground_truth_path = in.at("ground_truth_path").get<std::string>();
    r.ground_truth_sha256 = in.at("ground_truth_sha256").get<std::string>();
    m.inputs.push_back(std::move(r));
  }
  for (const auto& t : j.at("tasks")) m.tasks.push_back(task_from(t));
  return m;
}

std::string serialize_manifest(const JobManifest& m) { return to_json(m).dump(2) + "\n"; }

JobManifest parse_manifest(std::string_view text) {
  try {
    return manifest_from_json(ojson::parse(text));
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kIntegrity, std::string("manifest unreadable: ") + e.what());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kIntegrity) throw;
    fail(ErrorCode::kIntegrity, std::string("manifest invalid: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// Writing

namespace {

// Hash-named copy under inputs/; identical content may be shared.
std::string store_input(const fs::path& folder, std::span<const std::uint8_t> bytes,
                        std::string_view ext, std::string* sha_out = nullptr) {
  const auto sha = sha256_hex(bytes);
  const auto rel = "inputs/" + sha + std::string(ext);
  if (!fs::exists(folder / rel)) write_file_atomic(folder / rel, bytes);
  if (sha_out) *sha_out = sha;
  return rel;
}

}  // namespace

fs::path init_job_folder(const fs::path& root, JobManifest& manifest,
                         std::span<const JobInput> inputs,
                         std::span<const WorkflowTemplate* const> workflows) {
  const auto folder = job_folder(root, manifest.job_id);
  std::error_code ec;
  fs::create_directories(folder.parent_path(), ec);
  if (ec) fail(ErrorCode::kIo, "cannot create " + folder.parent_path().string() + ": " + ec.message());
  // create_directory reports false for an existing folder: never overwrite.
  if (!fs::create_directory(folder, ec)) {
    if (ec) fail(ErrorCode::kIo, "cannot create " + folder.string() + ": " + ec.message());
    fail(ErrorCode::kConflict, "job folder already exists: " + manifest.job_id);
  }
  fs::create_directory(folder / "inputs");
  fs::create_directory(folder / "tasks");

  manifest.inputs.clear();
  for (const auto& in : inputs) {
    InputRecord r;
    r.image_id = in.ref.id;
    r.source_name = in.ref.source_name;
    r.width = in.ref.width;
    r.height = in.ref.height;
    r.image_path = store_input(folder, in.png, ".png");
    r.mask_rle = encode_rle(in.mask);
    r.mask_path = store_input(folder, mask_to_png(in.mask), ".png", &r.mask_sha256);
    const auto gt = to_json(in.ground_truth).dump(2) + "\n";
    r.ground_truth_path = store_input(folder, as_bytes(gt), ".json", &r.ground_truth_sha256);
    manifest.inputs.push_back(std::move(r));
  }
  manifest.workflows.clear();
  for (const auto* wf : workflows) {
    WorkflowRecord w;
    w.id = wf->id();
    w.path = store_input(folder, as_bytes(wf->graph_text()), ".json", &w.sha256);
    manifest.workflows.push_back(std::move(w));
  }
  write_file_atomic(folder / "job.json", serialize_manifest(manifest));
  return folder;
}

ManifestStore::ManifestStore(fs::path folder, JobManifest manifest)
    : folder_(std::move(folder)), manifest_(std::move(manifest)) {}

std::unique_ptr<ManifestStore> ManifestStore::open(const fs::path& folder) {
  return std::make_unique<ManifestStore>(folder, parse_manifest(read_text_file(folder / "job.json")));
}

JobManifest ManifestStore::snapshot() const {
  std::lock_guard lock(mutex_);
  return manifest_;
}

void ManifestStore::persist_locked() {
  write_file_atomic(folder_ / "job.json", serialize_manifest(manifest_));
}

TaskRecord write_task_files(const fs::path& folder, const TaskArtifacts& a) {
  if (a.outputs.size() != a.detections.size() || a.outputs.size() != a.comparisons.size()) {
    fail(ErrorCode::kInvalidArgument, "task artifacts have inconsistent sample counts");
  }
  const auto name = task_folder_name(a.task_id);
  const auto final_dir = folder / "tasks" / name;
  const auto tmp_dir = folder / "tasks" / (".tmp-" + name);
  if (fs::exists(final_dir)) fail(ErrorCode::kWriteOnce, "task folder already written: " + name);
  fs::remove_all(tmp_dir);
  fs::create_directories(tmp_dir);

  TaskRecord record;
  record.task_id = a.task_id;
  ojson comparison;
  comparison["task_id"] = a.task_id;
  comparison["image_id"] = a.image_id;
  comparison["baseline_detections"] = to_json(a.baseline);
  comparison["samples"] = ojson::array();
  for (std::size_t k = 0; k < a.outputs.size(); ++k) {
    const auto& out = a.outputs[k];
    const auto idx = std::to_string(out.sample_index);
    const auto png_name = "output_" + idx + ".png";
    const auto det_name = "detections_" + idx + ".json";
    const auto det_text = to_json(a.detections[k]).dump(2) + "\n";
    write_file_atomic(tmp_dir / png_name, out.image_png);
    write_file_atomic(tmp_dir / det_name, det_text);

    const auto& cmp = a.comparisons[k];
    SampleRecord s;
    s.sample_index = out.sample_index;
    s.output_path = "tasks/" + name + "/" + png_name;
    s.output_sha256 = sha256_hex(out.image_png);
    s.detections_path = "tasks/" + name + "/" + det_name;
    s.detections_sha256 = sha256_hex(det_text);
    s.detector_id = a.detections[k].detector_id;
    s.tp = cmp.probe.tp;
    s.fp = cmp.probe.fp;
    s.fn = cmp.probe.fn;
    s.precision = cmp.probe.precision;
    s.recall = cmp.probe.recall;
    s.f1 = cmp.probe.f1;
    s.delta_precision = cmp.delta_precision;
    s.delta_recall = cmp.delta_recall;
    s.mean_conf_delta = cmp.mean_confidence_delta;
    s.disappeared = cmp.disappeared;
    s.appeared = cmp.appeared;
    record.samples.push_back(std::move(s));

    ojson entry;
    entry["sample_index"] = out.sample_index;
    entry["seed"] = out.params.seed() + static_cast<std::uint64_t>(out.sample_index);
    entry["output"] = png_name;
    entry["probe_detections"] = to_json(a.detections[k]);
    entry["report"] = to_json(cmp);
    comparison["samples"].push_back(std::move(entry));
  }
  const auto cmp_text = comparison.dump(2) + "\n";
  write_file_atomic(tmp_dir / "comparison.json", cmp_text);
  record.comparison_path = "tasks/" + name + "/comparison.json";
  record.comparison_sha256 = sha256_hex(cmp_text);

  std::error_code ec;
  fs::rename(tmp_dir, final_dir, ec);
  if (ec) {
    if (fs::exists(final_dir)) fail(ErrorCode::kWriteOnce, "task folder already written: " + name);
    fail(ErrorCode::kIo, "cannot publish task folder " + name + ": " + ec.message());
  }
  record.state = RunState::kCompleted;
  return record;
}

JobManifest write_task_artifacts(ManifestStore& store, const TaskArtifacts& artifacts) {
  const auto written = write_task_files(store.folder(), artifacts);
  return store.update([&](JobManifest& m) {
    auto* t = m.find_task(artifacts.task_id);
    if (!t) fail(ErrorCode::kNotFound, "task not in manifest: " + artifacts.task_id);
    t->state = RunState::kCompleted;
    t->error.reset();
    t->samples = written.samples;
    t->comparison_path = written.comparison_path;
    t->comparison_sha256 = written.comparison_sha256;
  });
}

// ---------------------------------------------------------------------------
// Export

std::string format_real(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  std::string s(buf);
  if (s == "-0.000000") s = "0.000000";
  return s;
}

std::string csv_escape(std::string_view field) {
  if (field.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(field);
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

namespace {

JobManifest load_manifest(const fs::path& folder) {
  std::string text;
  try {
    text = read_text_file(folder / "job.json");
  } catch (const Error& e) {
    fail(ErrorCode::kIntegrity, e.what());
  }
  return parse_manifest(text);
}

using Row = std::vector<std::pair<std::string_view, std::string>>;

std::vector<Row> result_rows(const JobManifest& m) {
  std::vector<Row> rows;
  const auto factor = m.prompt.source ? m.prompt.source->factor_id : std::string();
  const auto level = m.prompt.source ? m.prompt.source->level_id : std::string();
  for (const auto& t : m.tasks) {
    if (t.state != RunState::kCompleted) continue;
    if (t.image_index >= m.inputs.size()) {
      fail(ErrorCode::kIntegrity, "task " + t.task_id + " references a missing input");
    }
    for (const auto& s : t.samples) {
      rows.push_back({{"job_id", m.job_id},
                      {"task_id", t.task_id},
                      {"image_id", m.inputs[t.image_index].image_id},
                      {"factor_id", factor},
                      {"level_id", level},
                      {"prompt", m.prompt.text},
                      {"seed", std::to_string(t.seed)},
                      {"workflow_id", t.workflow_id},
                      {"steps", std::to_string(m.params.steps())},
                      {"cfg", format_real(m.params.cfg_scale())},
                      {"denoise", format_real(m.params.denoise_strength())},
                      {"sample_index", std::to_string(s.sample_index)},
                      {"detector_id", s.detector_id},
                      {"conf_threshold", format_real(m.conf_threshold)},
                      {"iou_threshold", format_real(m.iou_threshold)},
                      {"tp", std::to_string(s.tp)},
                      {"fp", std::to_string(s.fp)},
                      {"fn", std::to_string(s.fn)},
                      {"precision", format_real(s.precision)},
                      {"recall", format_real(s.recall)},
                      {"f1", format_real(s.f1)},
                      {"delta_precision", format_real(s.delta_precision)},
                      {"delta_recall", format_real(s.delta_recall)},
                      {"mean_conf_delta", format_real(s.mean_conf_delta)},
                      {"disappeared", std::to_string(s.disappeared)},
                      {"appeared", std::to_string(s.appeared)},
                      {"output_path", s.output_path}});
    }
  }
  return rows;
}

}  // namespace

std::string export_csv(const fs::path& folder) {
  const auto m = load_manifest(folder);
  std::string out;
  for (std::size_t i = 0; i < std::size(kCsvColumns); ++i) {
    if (i) out += ',';
    out += kCsvColumns[i];
  }
  out += '\n';
  for (const auto& row : result_rows(m)) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) out += ',';
      out += csv_escape(row[i].second);
    }
    out += '\n';
  }
  return out;
}

std::string export_json(const fs::path& folder) {
  const auto m = load_manifest(folder);
  ojson rows = ojson::array();
  for (const auto& row : result_rows(m)) {
    ojson r;
    for (const auto& [k, v] : row) r[std::string(k)] = v;
    rows.push_back(std::move(r));
  }
  return rows.dump(2) + "\n";
}

// ---------------------------------------------------------------------------
// Audit

IntegrityReport verify_job(const fs::path& folder) {
  IntegrityReport report;
  JobManifest m;
  try {
    m = load_manifest(folder);
  } catch (const Error& e) {
    report.findings.push_back({FindingKind::kCorruptManifest, "job.json", e.what()});
    return report;
  }
  std::set<std::string> checked;
  auto check = [&](const std::string& rel, const std::string& sha) {
    if (rel.empty() || !checked.insert(rel).second) return;
    const auto path = folder / rel;
    if (!fs::exists(path)) {
      report.findings.push_back({FindingKind::kMissing, rel, "file not found"});
      return;
    }
    const auto actual = sha256_hex(read_file(path));
    if (actual != sha) {
      report.findings.push_back({FindingKind::kModified, rel, "sha256 " + actual + " != " + sha});
    }
  };
  for (const auto& in : m.inputs) {
    check(in.image_path, in.image_id);
    check(in.mask_path, in.mask_sha256);
    check(in.ground_truth_path, in.ground_truth_sha256);
  }
  for (const auto& w : m.workflows) check(w.path, w.sha256);
  for (const auto& t : m.tasks) {
    if (t.state != RunState::kCompleted) continue;
    for (const auto& s : t.samples) {
      check(s.output_path, s.output_sha256);
      check(s.detections_path, s.detections_sha256);
    }
    check(t.comparison_path, t.comparison_sha256);
  }
  return report;
}

std::size_t recover_job(const fs::path& folder) {
  std::error_code ec;
  for (const auto& entry : fs::directory_iterator(folder / "tasks", ec)) {
    if (entry.path().filename().string().starts_with(".tmp-")) fs::remove_all(entry.path());
  }
  auto store = ManifestStore::open(folder);
  std::size_t marked = 0;
  const auto snapshot = store->snapshot();
  const bool needs_update =
      !is_terminal(snapshot.state) ||
      std::any_of(snapshot.tasks.begin(), snapshot.tasks.end(),
                  [](const TaskRecord& t) { return !is_terminal(t.state); });
  if (!needs_update) return 0;
  store->update([&](JobManifest& m) {
    bool any_completed = false;
    for (auto& t : m.tasks) {
      if (!is_terminal(t.state)) {
        t.state = RunState::kFailed;
        t.error = TaskError{"interrupted", "process stopped before the task finished"};
        t.samples.clear();
        t.comparison_path.clear();
        t.comparison_sha256.clear();
        ++marked;
      }
      any_completed = any_completed || t.state == RunState::kCompleted;
    }
    if (!is_terminal(m.state)) m.state = any_completed ? RunState::kCompleted : RunState::kFailed;
  });
  return marked;
}

std::size_t recover_all(const fs::path& root) {
  std::size_t marked = 0;
  std::error_code ec;
  for (const auto& entry : fs::directory_iterator(root / "jobs", ec)) {
    if (!entry.is_directory() || !fs::exists(entry.path() / "job.json")) continue;
    try {
      marked += recover_job(entry.path());
    } catch (const Error&) {
      // A corrupt manifest is reported by verify_job; recovery leaves it alone.
    }
  }
  return marked;
}

}  // namespace semprobe
