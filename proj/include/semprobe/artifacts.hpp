// Copyright 2026 The SemProbe Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "semprobe/catalog.hpp"
#include "semprobe/detection.hpp"
#include "semprobe/generation.hpp"
#include "semprobe/image.hpp"
#include "semprobe/masking.hpp"

namespace semprobe {

namespace fs = std::filesystem;

inline constexpr int kManifestSchemaVersion = 1;

enum class RunState { kQueued, kRunning, kCompleted, kFailed, kCancelled };

std::string_view to_string(RunState s);
RunState parse_run_state(std::string_view s);  // kFormat on unknown names
inline bool is_terminal(RunState s) {
  return s == RunState::kCompleted || s == RunState::kFailed || s == RunState::kCancelled;
}

/// Paths are relative to the job folder.
struct InputRecord {
  std::string image_id;
  std::string source_name;
  int width = 0;
  int height = 0;
  std::string image_path;
  std::string mask_rle;  // the mask actually sent to generation
  std::string mask_path;
  std::string mask_sha256;
  std::string ground_truth_path;
  std::string ground_truth_sha256;
  bool operator==(const InputRecord&) const = default;
};

struct WorkflowRecord {
  std::string id;
  std::string path;
  std::string sha256;
  bool operator==(const WorkflowRecord&) const = default;
};

struct SampleRecord {
  int sample_index = 0;
  std::string output_path;
  std::string output_sha256;
  std::string detections_path;
  std::string detections_sha256;
  std::string detector_id;
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  double precision = 0;
  double recall = 0;
  double f1 = 0;
  double delta_precision = 0;
  double delta_recall = 0;
  double mean_conf_delta = 0;
  std::size_t disappeared = 0;
  std::size_t appeared = 0;
  bool operator==(const SampleRecord&) const = default;
};

struct TaskError {
  std::string stage;
  std::string message;
  bool operator==(const TaskError&) const = default;
};

struct TaskRecord {
  std::string task_id;
  std::size_t image_index = 0;
  std::uint64_t seed = 0;
  std::string workflow_id;
  RunState state = RunState::kQueued;
  std::optional<TaskError> error;
  std::vector<SampleRecord> samples;
  std::string comparison_path;
  std::string comparison_sha256;
  bool operator==(const TaskRecord&) const = default;
};

struct JobManifest {
  int schema_version = kManifestSchemaVersion;
  std::string job_id;
  std::string created_at;  // UTC, ISO-8601 with milliseconds
  RunState state = RunState::kQueued;
  PromptSpec prompt;
  GenerationParams params;
  std::vector<std::uint64_t> seeds;
  std::vector<std::string> workflow_ids;
  std::vector<WorkflowRecord> workflows;
  std::string generation_backend;
  std::string detector_backend;
  double conf_threshold = 0.5;
  double iou_threshold = 0.5;
  int mask_dilation = 0;
  std::vector<InputRecord> inputs;
  std::vector<TaskRecord> tasks;  // expand order
  bool operator==(const JobManifest&) const = default;

  TaskRecord* find_task(std::string_view task_id);
  const TaskRecord* find_task(std::string_view task_id) const;
};

ojson to_json(const JobManifest& m);
JobManifest manifest_from_json(const ojson& j);
std::string serialize_manifest(const JobManifest& m);
// Throws kIntegrity when the text is not a valid schema-1 manifest.
JobManifest parse_manifest(std::string_view text);

/// Folder-name form of a task id: the part after "<job_id>/".
std::string task_folder_name(std::string_view task_id);

fs::path job_folder(const fs::path& root, std::string_view job_id);

// ---------------------------------------------------------------------------
// Writing

struct JobInput {
  ImageRef ref;
  Bytes png;
  RasterMask mask;
  GroundTruthSet ground_truth;
};

/// Creates jobs/<job_id>/{job.json,inputs/,tasks/}, copies inputs under their
/// content hash and fills manifest.inputs / manifest.workflows.
/// Errors: kConflict if the folder exists, kIo if the root is unwritable.
fs::path init_job_folder(const fs::path& root, JobManifest& manifest,
                         std::span<const JobInput> inputs,
                         std::span<const WorkflowTemplate* const> workflows);

/// Owns the in-memory manifest of one job and rewrites job.json atomically
/// after every mutation.
class ManifestStore {
 public:
  ManifestStore(fs::path folder, JobManifest manifest);
  static std::unique_ptr<ManifestStore> open(const fs::path& folder);

  JobManifest snapshot() const;
  const fs::path& folder() const noexcept { return folder_; }

  template <typename Fn>
  JobManifest update(Fn&& fn) {
    std::lock_guard lock(mutex_);
    fn(manifest_);
    persist_locked();
    return manifest_;
  }

 private:
  void persist_locked();

  fs::path folder_;
  mutable std::mutex mutex_;
  JobManifest manifest_;
};

/// Everything one task produced; index k of each vector is sample k.
struct TaskArtifacts {
  std::string task_id;
  std::string image_id;
  DetectionSet baseline;
  std::vector<GeneratedOutput> outputs;
  std::vector<DetectionSet> detections;
  std::vector<ComparisonReport> comparisons;
};

/// Writes tasks/<name>/{output_k.png,detections_k.json,comparison.json} via a
/// temporary folder renamed into place. Errors: kWriteOnce if it exists.
TaskRecord write_task_files(const fs::path& folder, const TaskArtifacts& artifacts);

/// write_task_files + marks the manifest task COMPLETED with its hashes.
JobManifest write_task_artifacts(ManifestStore& store, const TaskArtifacts& artifacts);

// ---------------------------------------------------------------------------
// Export and audit

inline constexpr std::string_view kCsvColumns[] = {
    "job_id",         "task_id",        "image_id",      "factor_id",     "level_id",
    "prompt",         "seed",           "workflow_id",   "steps",         "cfg",
    "denoise",        "sample_index",   "detector_id",   "conf_threshold", "iou_threshold",
    "tp",             "fp",             "fn",            "precision",     "recall",
    "f1",             "delta_precision", "delta_recall", "mean_conf_delta", "disappeared",
    "appeared",       "output_path"};

/// Fixed-point with 6 decimals; never emits "-0.000000".
std::string format_real(double v);
std::string csv_escape(std::string_view field);

/// One row per (completed task, sample) in task order. Throws kIntegrity.
std::string export_csv(const fs::path& folder);
std::string export_json(const fs::path& folder);

enum class FindingKind { kMissing, kModified, kCorruptManifest };

struct Finding {
  FindingKind kind;
  std::string path;
  std::string detail;
};

struct IntegrityReport {
  std::vector<Finding> findings;
  bool clean() const noexcept { return findings.empty(); }
};

std::string_view to_string(FindingKind k);

IntegrityReport verify_job(const fs::path& folder);

/// Restart recovery: non-terminal tasks become FAILED ("interrupted"), stray
/// temp folders are removed and the job state is settled. Returns the number
/// of tasks marked failed.
std::size_t recover_job(const fs::path& folder);
std::size_t recover_all(const fs::path& root);

}  // namespace semprobe
