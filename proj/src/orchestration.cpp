// Copyright 2026 The SemProbe Authors
// SPDX-License-Identifier: Apache-2.0

#include "semprobe/orchestration.hpp"

#include <algorithm>
#include <ctime>
#include <random>
#include <set>

#include "semprobe/error.hpp"

namespace semprobe {

namespace {

std::int64_t now_ms() {
  return std::chrono::duration_cast<std::chrono::milliseconds>(
             std::chrono::system_clock::now().time_since_epoch())
      .count();
}

std::string iso_utc_now() {
  const auto ms = now_ms();
  const std::time_t secs = ms / 1000;
  std::tm tm{};
  gmtime_r(&secs, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%S", &tm);
  char out[48];
  std::snprintf(out, sizeof out, "%s.%03dZ", buf, static_cast<int>(ms % 1000));
  return out;
}

}  // namespace

ProbeJob normalize_job(ProbeJob job) {
  if (job.images.empty()) fail(ErrorCode::kInvalidArgument, "job has no images");
  if (job.seeds.empty()) fail(ErrorCode::kInvalidArgument, "job has no seeds");
  if (job.workflow_ids.empty()) fail(ErrorCode::kInvalidArgument, "job has no workflows");
  if (job.prompt.text.empty()) fail(ErrorCode::kInvalidArgument, "job prompt is empty");
  if (job.mask_dilation < 0) fail(ErrorCode::kInvalidArgument, "mask_dilation must be >= 0");
  for (double t : {job.thresholds.conf, job.thresholds.iou}) {
    if (!(t >= 0 && t <= 1)) fail(ErrorCode::kInvalidArgument, "thresholds must lie in [0, 1]");
  }

  std::vector<std::uint64_t> seeds;
  for (auto s : job.seeds) {
    if (std::find(seeds.begin(), seeds.end(), s) == seeds.end()) seeds.push_back(s);
  }
  job.seeds = std::move(seeds);

  std::vector<std::string> workflows;
  for (auto& w : job.workflow_ids) {
    if (std::find(workflows.begin(), workflows.end(), w) == workflows.end()) workflows.push_back(w);
  }
  job.workflow_ids = std::move(workflows);

  std::vector<JobImage> images;
  std::set<std::string> seen, prefixes;
  for (auto& img : job.images) {
    const auto fresh = make_image_ref(img.png, img.ref.source_name);
    if (!seen.insert(fresh.id).second) continue;
    if (!prefixes.insert(fresh.id.substr(0, 8)).second) {
      fail(ErrorCode::kInvalidArgument, "two images share the task-id prefix " + fresh.id.substr(0, 8));
    }
    img.ref = fresh;
    if (img.mask.width() != fresh.width || img.mask.height() != fresh.height) {
      fail(ErrorCode::kInvalidArgument, "mask for '" + fresh.source_name + "' is " +
                                            std::to_string(img.mask.width()) + "x" +
                                            std::to_string(img.mask.height()) + ", image is " +
                                            std::to_string(fresh.width) + "x" +
                                            std::to_string(fresh.height));
    }
    img.mask = dilate(img.mask, job.mask_dilation);
    if (img.mask.empty()) fail(ErrorCode::kEmptyMask, "mask for '" + fresh.source_name + "' is empty");
    if (img.ground_truth.image_id.empty()) img.ground_truth.image_id = fresh.id;
    if (img.ground_truth.image_id != fresh.id) {
      fail(ErrorCode::kInvalidArgument, "ground truth belongs to a different image");
    }
    images.push_back(std::move(img));
  }
  job.images = std::move(images);
  return job;
}

std::string new_job_id() {
  const std::time_t secs = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&secs, &tm);
  char stamp[32];
  std::strftime(stamp, sizeof stamp, "%Y%m%dT%H%M%SZ", &tm);
  static thread_local std::mt19937_64 rng{std::random_device{}()};
  char hex[8];
  std::snprintf(hex, sizeof hex, "%06llx", static_cast<unsigned long long>(rng() & 0xFFFFFF));
  return std::string(stamp) + "-" + hex;
}

std::string make_task_id(std::string_view job_id, std::string_view image_id, std::uint64_t seed,
                         std::string_view workflow_id) {
  return std::string(job_id) + "/" + std::string(image_id.substr(0, 8)) + "-s" +
         std::to_string(seed) + "-w" + std::string(workflow_id);
}

std::vector<ProbeTask> expand_job(const ProbeJob& job) {
  std::vector<ProbeTask> tasks;
  tasks.reserve(job.images.size() * job.seeds.size() * job.workflow_ids.size());
  for (std::size_t i = 0; i < job.images.size(); ++i) {
    for (auto seed : job.seeds) {
      for (const auto& wf : job.workflow_ids) {
        tasks.push_back(ProbeTask{make_task_id(job.job_id, job.images[i].ref.id, seed, wf), i,
                                  seed, wf, job.params.with_seed(seed)});
      }
    }
  }
  return tasks;
}

// ---------------------------------------------------------------------------

std::string_view to_string(EventKind k) {
  switch (k) {
    case EventKind::kJobQueued: return "JOB_QUEUED";
    case EventKind::kTaskStarted: return "TASK_STARTED";
    case EventKind::kTaskCompleted: return "TASK_COMPLETED";
    case EventKind::kTaskFailed: return "TASK_FAILED";
    case EventKind::kJobCompleted: return "JOB_COMPLETED";
    case EventKind::kJobFailed: return "JOB_FAILED";
    case EventKind::kJobCancelled: return "JOB_CANCELLED";
  }
  return "";
}

ojson to_json(const ProgressEvent& e) {
  ojson j;
  j["kind"] = to_string(e.kind);
  j["job_id"] = e.job_id;
  j["task_id"] = e.task_id ? ojson(*e.task_id) : ojson(nullptr);
  j["completed_count"] = e.completed_count;
  j["total_count"] = e.total_count;
  j["timestamp"] = e.timestamp_ms;
  if (e.stage) j["stage"] = *e.stage;
  if (e.message) j["message"] = *e.message;
  return j;
}

void EventLog::append(ProgressEvent event) {
  {
    std::lock_guard lock(mutex_);
    if (closed_) return;
    closed_ = is_terminal(event.kind);
    events_.push_back(std::move(event));
  }
  cv_.notify_all();
}

std::optional<ProgressEvent> EventLog::wait_at(std::size_t index, std::chrono::milliseconds timeout) {
  std::unique_lock lock(mutex_);
  cv_.wait_for(lock, timeout, [&] { return index < events_.size() || closed_; });
  if (index < events_.size()) return events_[index];
  return std::nullopt;
}

std::vector<ProgressEvent> EventLog::snapshot() const {
  std::lock_guard lock(mutex_);
  return events_;
}

bool EventLog::closed() const {
  std::lock_guard lock(mutex_);
  return closed_;
}

std::optional<ProgressEvent> Subscription::next_for(std::chrono::milliseconds timeout) {
  if (done_) return std::nullopt;
  auto ev = log_->wait_at(cursor_, timeout);
  if (!ev) return std::nullopt;
  ++cursor_;
  if (is_terminal(ev->kind)) done_ = true;
  return ev;
}

std::optional<ProgressEvent> Subscription::next() {
  while (!done_) {
    if (auto ev = next_for(std::chrono::hours(1))) return ev;
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------

struct Coordinator::Job {
  ProbeJob spec;
  std::vector<ProbeTask> tasks;
  std::vector<const WorkflowTemplate*> task_workflows;
  std::unique_ptr<ManifestStore> store;
  std::shared_ptr<EventLog> log = std::make_shared<EventLog>();
  std::shared_ptr<GenerationBackend> generation;
  std::shared_ptr<DetectorBackend> detector;

  RunState state = RunState::kQueued;
  std::vector<RunState> task_states;
  std::size_t finished = 0;
  std::size_t completed = 0;
  std::size_t running = 0;
  bool cancelled = false;
  bool settled = false;
  std::map<std::size_t, std::shared_future<Baseline>> baselines;
};

Coordinator::Coordinator(CoordinatorOptions options, BackendRegistry& backends,
                         const WorkflowRegistry& workflows)
    : options_(std::move(options)), backends_(backends), workflows_(workflows) {
  std::filesystem::create_directories(options_.root / "jobs");
  recover_all(options_.root);
  const auto n = std::max<std::size_t>(1, options_.workers);
  for (std::size_t i = 0; i < n; ++i) workers_.emplace_back([this] { worker_loop(); });
}

Coordinator::~Coordinator() { shutdown(); }

std::string Coordinator::enqueue(ProbeJob spec) {
  {
    std::lock_guard lock(mutex_);
    if (stopping_) fail(ErrorCode::kRejected, "coordinator is shutting down");
  }
  auto job = std::make_shared<Job>();
  if (spec.job_id.empty()) spec.job_id = new_job_id();
  job->spec = normalize_job(std::move(spec));
  const auto& s = job->spec;
  job->generation = backends_.generation(s.generation_backend);
  job->detector = backends_.detector(s.detector_backend);
  std::vector<const WorkflowTemplate*> used;
  for (const auto& id : s.workflow_ids) used.push_back(&workflows_.get(id));
  job->tasks = expand_job(s);
  for (const auto& t : job->tasks) job->task_workflows.push_back(&workflows_.get(t.workflow_id));
  job->task_states.assign(job->tasks.size(), RunState::kQueued);

  JobManifest m;
  m.job_id = s.job_id;
  m.created_at = iso_utc_now();
  m.state = RunState::kQueued;
  m.prompt = s.prompt;
  m.params = s.params;
  m.seeds = s.seeds;
  m.workflow_ids = s.workflow_ids;
  m.generation_backend = job->generation->id();
  m.detector_backend = s.detector_backend;
  m.conf_threshold = s.thresholds.conf;
  m.iou_threshold = s.thresholds.iou;
  m.mask_dilation = s.mask_dilation;
  for (const auto& t : job->tasks) {
    TaskRecord r;
    r.task_id = t.task_id;
    r.image_index = t.image_index;
    r.seed = t.seed;
    r.workflow_id = t.workflow_id;
    m.tasks.push_back(std::move(r));
  }
  std::vector<JobInput> inputs;
  for (const auto& img : s.images) inputs.push_back({img.ref, img.png, img.mask, img.ground_truth});
  {
    std::lock_guard lock(mutex_);
    if (jobs_.contains(s.job_id)) fail(ErrorCode::kConflict, "job id already in use: " + s.job_id);
  }
  const auto folder = init_job_folder(options_.root, m, inputs, used);
  job->store = std::make_unique<ManifestStore>(folder, std::move(m));

  std::lock_guard lock(mutex_);
  if (stopping_) fail(ErrorCode::kRejected, "coordinator is shutting down");
  jobs_.emplace(s.job_id, job);
  emit(*job, EventKind::kJobQueued);
  for (std::size_t i = 0; i < job->tasks.size(); ++i) queue_.push_back({job, i});
  work_cv_.notify_all();
  return s.job_id;
}

std::shared_ptr<Coordinator::Job> Coordinator::find(const std::string& job_id) const {
  const auto it = jobs_.find(job_id);
  if (it == jobs_.end()) fail(ErrorCode::kNotFound, "unknown job '" + job_id + "'");
  return it->second;
}

bool Coordinator::has_job(const std::string& job_id) const {
  std::lock_guard lock(mutex_);
  return jobs_.contains(job_id);
}

void Coordinator::cancel(const std::string& job_id) {
  std::lock_guard lock(mutex_);
  const auto job = find(job_id);
  if (is_terminal(job->state) || job->cancelled) return;
  job->cancelled = true;
  for (auto& st : job->task_states) {
    if (st == RunState::kQueued) st = RunState::kCancelled;
  }
  job->store->update([&](JobManifest& m) {
    for (std::size_t i = 0; i < m.tasks.size(); ++i) {
      if (job->task_states[i] == RunState::kCancelled && m.tasks[i].state == RunState::kQueued) {
        m.tasks[i].state = RunState::kCancelled;
      }
    }
  });
  settle_if_done(*job);
}

Subscription Coordinator::subscribe(const std::string& job_id) {
  std::lock_guard lock(mutex_);
  return Subscription(find(job_id)->log);
}

RunState Coordinator::state(const std::string& job_id) const {
  std::lock_guard lock(mutex_);
  return find(job_id)->state;
}

JobManifest Coordinator::manifest(const std::string& job_id) const {
  std::shared_ptr<Job> job;
  {
    std::lock_guard lock(mutex_);
    job = find(job_id);
  }
  return job->store->snapshot();
}

std::filesystem::path Coordinator::folder(const std::string& job_id) const {
  std::lock_guard lock(mutex_);
  return find(job_id)->store->folder();
}

RunState Coordinator::wait(const std::string& job_id) {
  std::unique_lock lock(mutex_);
  const auto job = find(job_id);
  done_cv_.wait(lock, [&] { return job->settled; });
  return job->state;
}

void Coordinator::shutdown() {
  {
    std::lock_guard lock(mutex_);
    if (stopping_ && workers_.empty()) return;
    stopping_ = true;
    queue_.clear();
    for (auto& [id, job] : jobs_) {
      if (is_terminal(job->state) || job->cancelled) continue;
      job->cancelled = true;
      for (auto& st : job->task_states) {
        if (st == RunState::kQueued) st = RunState::kCancelled;
      }
      job->store->update([&](JobManifest& m) {
        for (std::size_t i = 0; i < m.tasks.size(); ++i) {
          if (job->task_states[i] == RunState::kCancelled) m.tasks[i].state = RunState::kCancelled;
        }
      });
      settle_if_done(*job);
    }
  }
  work_cv_.notify_all();
  for (auto& t : workers_) {
    if (t.joinable()) t.join();
  }
  workers_.clear();
}

void Coordinator::emit(Job& job, EventKind kind, std::optional<std::string> task_id,
                       std::optional<TaskError> error) {
  ProgressEvent e;
  e.kind = kind;
  e.job_id = job.spec.job_id;
  e.task_id = std::move(task_id);
  e.completed_count = job.finished;
  e.total_count = job.tasks.size();
  e.timestamp_ms = now_ms();
  if (error) {
    e.stage = error->stage;
    e.message = error->message;
  }
  job.log->append(std::move(e));
}

void Coordinator::settle_if_done(Job& job) {
  if (job.settled) return;
  EventKind kind;
  if (job.cancelled) {
    if (job.running > 0) return;
    job.state = RunState::kCancelled;
    kind = EventKind::kJobCancelled;
  } else if (job.finished == job.tasks.size()) {
    job.state = job.completed > 0 ? RunState::kCompleted : RunState::kFailed;
    kind = job.completed > 0 ? EventKind::kJobCompleted : EventKind::kJobFailed;
  } else {
    return;
  }
  job.settled = true;
  const auto final_state = job.state;
  job.store->update([&](JobManifest& m) { m.state = final_state; });
  emit(job, kind);
  done_cv_.notify_all();
}

void Coordinator::worker_loop() {
  while (true) {
    WorkItem item;
    {
      std::unique_lock lock(mutex_);
      work_cv_.wait(lock, [&] { return stopping_ || !queue_.empty(); });
      if (stopping_) return;
      item = std::move(queue_.front());
      queue_.pop_front();
      auto& job = *item.job;
      if (job.cancelled || job.task_states[item.task_index] != RunState::kQueued) continue;
      job.task_states[item.task_index] = RunState::kRunning;
      ++job.running;
      const bool first = job.state == RunState::kQueued;
      if (first) job.state = RunState::kRunning;
      job.store->update([&](JobManifest& m) {
        m.tasks[item.task_index].state = RunState::kRunning;
        if (first) m.state = RunState::kRunning;
      });
      emit(job, EventKind::kTaskStarted, job.tasks[item.task_index].task_id);
    }
    run_task(item.job, item.task_index);
  }
}

std::shared_future<Coordinator::Baseline> Coordinator::baseline_for(const std::shared_ptr<Job>& job,
                                                                    std::size_t image_index) {
  std::promise<Baseline> promise;
  {
    std::lock_guard lock(mutex_);
    if (const auto it = job->baselines.find(image_index); it != job->baselines.end()) {
      return it->second;
    }
    job->baselines.emplace(image_index, promise.get_future().share());
  }
  const auto& img = job->spec.images[image_index];
  try {
    Baseline b;
    b.detections = run_detector(*job->detector, img.png, img.ref.id, options_.retry);
    b.eval = evaluate(b.detections, img.ground_truth, job->spec.thresholds);
    promise.set_value(std::move(b));
  } catch (...) {
    promise.set_exception(std::current_exception());
  }
  std::lock_guard lock(mutex_);
  return job->baselines.at(image_index);
}

void Coordinator::run_task(const std::shared_ptr<Job>& job, std::size_t task_index) {
  const auto& task = job->tasks[task_index];
  const auto& img = job->spec.images[task.image_index];
  const auto cancelled = [&] {
    std::lock_guard lock(mutex_);
    return job->cancelled;
  };
  std::string stage = "generation";
  try {
    TaskArtifacts artifacts;
    artifacts.task_id = task.task_id;
    artifacts.image_id = img.ref.id;
    artifacts.outputs = submit_inpaint(*job->generation, img.png, img.mask, job->spec.prompt,
                                       task.params, *job->task_workflows[task_index], options_.retry);
    if (cancelled()) return finish_task(job, task_index, RunState::kCancelled, std::nullopt);

    stage = "detection";
    const auto baseline = baseline_for(job, task.image_index).get();
    artifacts.baseline = baseline.detections;
    for (const auto& out : artifacts.outputs) {
      artifacts.detections.push_back(
          run_detector(*job->detector, out.image_png, sha256_hex(out.image_png), options_.retry));
    }
    if (cancelled()) return finish_task(job, task_index, RunState::kCancelled, std::nullopt);

    stage = "evaluation";
    std::vector<EvalResult> evals;
    for (const auto& dets : artifacts.detections) {
      // Inpainting keeps the object in place, so the source annotation applies.
      GroundTruthSet gt{dets.image_id, img.ground_truth.boxes};
      evals.push_back(evaluate(dets, gt, job->spec.thresholds));
    }

    stage = "comparison";
    for (std::size_t k = 0; k < evals.size(); ++k) {
      artifacts.comparisons.push_back(compare(baseline.eval, baseline.detections, evals[k],
                                              artifacts.detections[k], job->spec.thresholds.iou));
    }
    if (cancelled()) return finish_task(job, task_index, RunState::kCancelled, std::nullopt);

    stage = "artifacts";
    write_task_artifacts(*job->store, artifacts);
    finish_task(job, task_index, RunState::kCompleted, std::nullopt);
  } catch (const std::exception& e) {
    finish_task(job, task_index, RunState::kFailed, TaskError{stage, e.what()});
  }
}

void Coordinator::finish_task(const std::shared_ptr<Job>& job, std::size_t task_index,
                              RunState state, std::optional<TaskError> error) {
  std::lock_guard lock(mutex_);
  job->task_states[task_index] = state;
  --job->running;
  if (state != RunState::kCancelled) ++job->finished;
  if (state == RunState::kCompleted) ++job->completed;
  if (state != RunState::kCompleted) {
    job->store->update([&](JobManifest& m) {
      m.tasks[task_index].state = state;
      m.tasks[task_index].error = error;
    });
  }
  const auto& task_id = job->tasks[task_index].task_id;
  if (state == RunState::kCompleted) emit(*job, EventKind::kTaskCompleted, task_id);
  if (state == RunState::kFailed) emit(*job, EventKind::kTaskFailed, task_id, error);
  settle_if_done(*job);
}

// ---------------------------------------------------------------------------

std::vector<Bytes> replay_task_outputs(const std::filesystem::path& folder, std::string_view task_id,
                                       GenerationBackend& backend, const RetryPolicy& retry) {
  const auto m = parse_manifest(read_text_file(folder / "job.json"));
  const auto* task = m.find_task(task_id);
  if (!task) fail(ErrorCode::kNotFound, "task not in manifest: " + std::string(task_id));
  if (task->image_index >= m.inputs.size()) fail(ErrorCode::kIntegrity, "task input missing");
  const auto& input = m.inputs[task->image_index];
  const auto wf = std::find_if(m.workflows.begin(), m.workflows.end(),
                               [&](const WorkflowRecord& w) { return w.id == task->workflow_id; });
  if (wf == m.workflows.end()) fail(ErrorCode::kIntegrity, "workflow not recorded: " + task->workflow_id);

  const auto png = read_file(folder / input.image_path);
  const auto mask = decode_rle(input.mask_rle, input.width, input.height);
  const WorkflowTemplate workflow(wf->id, read_text_file(folder / wf->path));
  const auto outputs = submit_inpaint(backend, png, mask, m.prompt, m.params.with_seed(task->seed),
                                      workflow, retry);
  std::vector<Bytes> out;
  for (const auto& o : outputs) out.push_back(o.image_png);
  return out;
}

}  // namespace semprobe
