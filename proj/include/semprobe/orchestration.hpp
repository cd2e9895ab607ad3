// Copyright 2026 The SemProbe Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <functional>
#include <future>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "semprobe/artifacts.hpp"
#include "semprobe/backends.hpp"
#include "semprobe/catalog.hpp"
#include "semprobe/detection.hpp"
#include "semprobe/generation.hpp"

namespace semprobe {

struct JobImage {
  ImageRef ref;
  Bytes png;
  RasterMask mask;
  GroundTruthSet ground_truth;
};

/// A batch probing request. Use normalize_job() before expanding it.
struct ProbeJob {
  std::string job_id;  // empty: assigned on enqueue
  std::vector<JobImage> images;
  PromptSpec prompt;
  GenerationParams params;
  std::vector<std::uint64_t> seeds;
  std::vector<std::string> workflow_ids;
  std::string generation_backend = "mock:noise";
  std::string detector_backend = "mock";
  Thresholds thresholds;
  int mask_dilation = 0;  // applied before generation, logged in the manifest
};

/// Deduplicates seeds (first occurrence wins) and images (by content hash),
/// applies mask dilation and checks every invariant.
/// Errors: kInvalidArgument, kEmptyMask.
ProbeJob normalize_job(ProbeJob job);

/// "YYYYMMDDTHHMMSSZ-" followed by 6 random hex characters.
std::string new_job_id();

std::string make_task_id(std::string_view job_id, std::string_view image_id,
                         std::uint64_t seed, std::string_view workflow_id);

struct ProbeTask {
  std::string task_id;
  std::size_t image_index = 0;
  std::uint64_t seed = 0;
  std::string workflow_id;
  GenerationParams params;  // seed substituted
};

/// images x seeds x workflows, image-major, then seed, then workflow.
std::vector<ProbeTask> expand_job(const ProbeJob& job);

// ---------------------------------------------------------------------------
// Progress events

enum class EventKind {
  kJobQueued,
  kTaskStarted,
  kTaskCompleted,
  kTaskFailed,
  kJobCompleted,
  kJobFailed,
  kJobCancelled,
};

std::string_view to_string(EventKind k);
inline bool is_terminal(EventKind k) {
  return k == EventKind::kJobCompleted || k == EventKind::kJobFailed ||
         k == EventKind::kJobCancelled;
}

struct ProgressEvent {
  EventKind kind = EventKind::kJobQueued;
  std::string job_id;
  std::optional<std::string> task_id;
  std::size_t completed_count = 0;
  std::size_t total_count = 0;
  std::int64_t timestamp_ms = 0;  // UTC
  std::optional<std::string> stage;    // failures only
  std::optional<std::string> message;  // failures only
};

ojson to_json(const ProgressEvent& e);

/// Append-only per-job log with blocking readers.
class EventLog {
 public:
  void append(ProgressEvent event);
  /// Event at `index`, waiting up to `timeout`; nullopt on timeout or when the
  /// log is closed and exhausted.
  std::optional<ProgressEvent> wait_at(std::size_t index, std::chrono::milliseconds timeout);
  std::vector<ProgressEvent> snapshot() const;
  bool closed() const;

 private:
  mutable std::mutex mutex_;
  std::condition_variable cv_;
  std::vector<ProgressEvent> events_;
  bool closed_ = false;
};

/// Replays a job's history, then follows live events up to the terminal one.
class Subscription {
 public:
  explicit Subscription(std::shared_ptr<EventLog> log) : log_(std::move(log)) {}

  /// Next event, or nullopt once the terminal event has been delivered.
  std::optional<ProgressEvent> next();
  /// As next(), but gives up after `timeout` (nullopt, done() stays false).
  std::optional<ProgressEvent> next_for(std::chrono::milliseconds timeout);
  bool done() const noexcept { return done_; }

 private:
  std::shared_ptr<EventLog> log_;
  std::size_t cursor_ = 0;
  bool done_ = false;
};

// ---------------------------------------------------------------------------
// Coordinator

struct CoordinatorOptions {
  std::filesystem::path root;
  std::size_t workers = 2;
  RetryPolicy retry;
};

/// Owns job and task state. Workers run the per-task pipeline
/// (generation -> detection -> evaluation -> comparison -> artifacts) on
/// immutable task descriptions and hand results back here.
class Coordinator {
 public:
  Coordinator(CoordinatorOptions options, BackendRegistry& backends,
              const WorkflowRegistry& workflows);
  ~Coordinator();
  Coordinator(const Coordinator&) = delete;
  Coordinator& operator=(const Coordinator&) = delete;

  /// Persists the manifest in QUEUED state and emits JOB_QUEUED before
  /// returning. Errors: kRejected after shutdown, kConflict, kInvalidArgument,
  /// kNotFound (unknown workflow/backend).
  std::string enqueue(ProbeJob job);

  /// Errors: kNotFound for unknown ids. Terminal jobs are left unchanged.
  void cancel(const std::string& job_id);

  Subscription subscribe(const std::string& job_id);
  RunState state(const std::string& job_id) const;
  JobManifest manifest(const std::string& job_id) const;
  std::filesystem::path folder(const std::string& job_id) const;
  bool has_job(const std::string& job_id) const;

  /// Blocks until the job reaches a terminal state.
  RunState wait(const std::string& job_id);

  /// Rejects new jobs, cancels pending work, lets running tasks finish their
  /// current stage and joins the workers.
  void shutdown();

  const std::filesystem::path& root() const noexcept { return options_.root; }

 private:
  struct Baseline {
    DetectionSet detections;
    EvalResult eval;
  };
  struct Job;
  struct WorkItem {
    std::shared_ptr<Job> job;
    std::size_t task_index;
  };

  void worker_loop();
  void run_task(const std::shared_ptr<Job>& job, std::size_t task_index);
  std::shared_future<Baseline> baseline_for(const std::shared_ptr<Job>& job, std::size_t image_index);
  void finish_task(const std::shared_ptr<Job>& job, std::size_t task_index, RunState state,
                   std::optional<TaskError> error);
  void emit(Job& job, EventKind kind, std::optional<std::string> task_id = std::nullopt,
            std::optional<TaskError> error = std::nullopt);
  void settle_if_done(Job& job);
  std::shared_ptr<Job> find(const std::string& job_id) const;

  CoordinatorOptions options_;
  BackendRegistry& backends_;
  const WorkflowRegistry& workflows_;

  mutable std::mutex mutex_;
  std::condition_variable work_cv_;
  std::condition_variable done_cv_;
  std::deque<WorkItem> queue_;
  std::map<std::string, std::shared_ptr<Job>> jobs_;
  bool stopping_ = false;
  std::vector<std::thread> workers_;
};

/// Re-runs the generation stage of one recorded task using only the manifest
/// and the job's input folder. Returns the PNG bytes per sample.
std::vector<Bytes> replay_task_outputs(const std::filesystem::path& job_folder,
                                       std::string_view task_id, GenerationBackend& backend,
                                       const RetryPolicy& retry = RetryPolicy::none());

}  // namespace semprobe
