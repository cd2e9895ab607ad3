// Copyright 2026 The SemProbe Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <set>

#include "job_fixtures.hpp"
#include "semprobe/orchestration.hpp"

namespace semprobe {
namespace {

using testing::small_job;
using testing::SquareDetector;
using testing::TempDir;

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::kInternal;
}

TEST(Normalize, DeduplicatesAndValidates) {
  auto job = small_job("j", 2, {3, 1, 3, 2}, {"default", "default", "grow_mask"});
  job.images.push_back(job.images[0]);
  const auto n = normalize_job(job);
  EXPECT_EQ(n.seeds, (std::vector<std::uint64_t>{3, 1, 2}));
  EXPECT_EQ(n.workflow_ids, (std::vector<std::string>{"default", "grow_mask"}));
  EXPECT_EQ(n.images.size(), 2u);

  auto empty_mask = small_job("j");
  empty_mask.images[0].mask = RasterMask(32, 32);
  EXPECT_EQ(code_of([&] { normalize_job(empty_mask); }), ErrorCode::kEmptyMask);

  auto wrong_size = small_job("j");
  wrong_size.images[0].mask = RasterMask(8, 8, std::vector<std::uint8_t>(64, 1));
  EXPECT_EQ(code_of([&] { normalize_job(wrong_size); }), ErrorCode::kInvalidArgument);

  auto no_seeds = small_job("j", 1, {});
  EXPECT_EQ(code_of([&] { normalize_job(no_seeds); }), ErrorCode::kInvalidArgument);

  auto dilated = small_job("j");
  dilated.mask_dilation = 2;
  EXPECT_EQ(normalize_job(dilated).images[0].mask, dilate(small_job("j").images[0].mask, 2));
}

TEST(Expand, ImageMajorThenSeedThenWorkflow) {
  const auto job = normalize_job(small_job("job1"));
  const auto tasks = expand_job(job);
  ASSERT_EQ(tasks.size(), 12u);
  std::set<std::string> ids;
  for (const auto& t : tasks) ids.insert(t.task_id);
  EXPECT_EQ(ids.size(), 12u);
  const auto prefix = job.images[0].ref.id.substr(0, 8);
  EXPECT_EQ(tasks[0].task_id, "job1/" + prefix + "-s1-wdefault");
  EXPECT_EQ(tasks[1].task_id, "job1/" + prefix + "-s1-wgrow_mask");
  EXPECT_EQ(tasks[2].seed, 2u);
  EXPECT_EQ(tasks[6].image_index, 1u);
  EXPECT_EQ(tasks[5].params.seed(), 3u);
}

TEST(JobId, Format) {
  const auto id = new_job_id();
  ASSERT_EQ(id.size(), 23u);
  EXPECT_EQ(id[8], 'T');
  EXPECT_EQ(id[15], 'Z');
  EXPECT_EQ(id[16], '-');
  EXPECT_NE(new_job_id(), new_job_id());
}

struct Harness {
  TempDir dir;
  BackendRegistry backends{BackendConfig{}};
  WorkflowRegistry workflows;
  std::shared_ptr<SquareDetector> detector = std::make_shared<SquareDetector>();
  std::atomic<int> sleeps{0};

  Harness() { backends.register_detector("square", detector); }

  std::unique_ptr<Coordinator> make(std::size_t workers) {
    return std::make_unique<Coordinator>(
        CoordinatorOptions{dir.path(), workers, testing::instant_retry(&sleeps)}, backends, workflows);
  }
};

TEST(Coordinator, RunsAllTasksAndCachesBaseline) {
  Harness h;
  auto coord = h.make(4);
  auto job = small_job("run1");
  job.detector_backend = "square";
  const auto id = coord->enqueue(job);
  EXPECT_EQ(coord->wait(id), RunState::kCompleted);
  const auto m = coord->manifest(id);
  EXPECT_EQ(m.state, RunState::kCompleted);
  ASSERT_EQ(m.tasks.size(), 12u);
  for (const auto& t : m.tasks) {
    EXPECT_EQ(t.state, RunState::kCompleted) << t.task_id;
    EXPECT_EQ(t.samples.size(), 2u);
  }
  // 2 baselines + 12 tasks x 2 samples.
  EXPECT_EQ(h.detector->calls, 2 + 24);
  EXPECT_TRUE(verify_job(coord->folder(id)).clean());
}

TEST(Coordinator, EventStreamIsOrderedAndTerminated) {
  Harness h;
  auto coord = h.make(2);
  const auto id = coord->enqueue(small_job("ev1", 1, {1, 2}, {"default"}, 1));
  auto sub = coord->subscribe(id);
  std::vector<ProgressEvent> events;
  while (auto e = sub.next()) events.push_back(*e);
  ASSERT_FALSE(events.empty());
  EXPECT_EQ(events.front().kind, EventKind::kJobQueued);
  EXPECT_EQ(events.back().kind, EventKind::kJobCompleted);
  EXPECT_EQ(events.back().completed_count, 2u);
  std::size_t started = 0, completed = 0, last = 0;
  for (const auto& e : events) {
    started += e.kind == EventKind::kTaskStarted;
    completed += e.kind == EventKind::kTaskCompleted;
    EXPECT_GE(e.completed_count, last);
    last = e.completed_count;
    EXPECT_EQ(e.total_count, 2u);
  }
  EXPECT_EQ(started, 2u);
  EXPECT_EQ(completed, 2u);
  EXPECT_TRUE(sub.done());
  EXPECT_FALSE(sub.next().has_value());

  // A late subscriber replays the full history.
  auto late = coord->subscribe(id);
  std::size_t replayed = 0;
  while (late.next()) ++replayed;
  EXPECT_EQ(replayed, events.size());
}

TEST(Coordinator, FailingBackendIsIsolatedAfterRetries) {
  Harness h;
  auto down = std::make_shared<testing::DownBackend>();
  h.backends.register_generation("down", down);
  auto coord = h.make(2);

  auto bad = small_job("bad1", 1, {1, 2}, {"default"}, 1);
  bad.generation_backend = "down";
  const auto good_id = coord->enqueue(small_job("good1", 1, {1, 2}, {"default"}, 1));
  const auto bad_id = coord->enqueue(bad);
  EXPECT_EQ(coord->wait(bad_id), RunState::kFailed);
  EXPECT_EQ(coord->wait(good_id), RunState::kCompleted);

  EXPECT_EQ(down->calls, 2 * 4);  // initial attempt + 3 retries, per task
  EXPECT_EQ(h.sleeps, 2 * 3);
  const auto m = coord->manifest(bad_id);
  for (const auto& t : m.tasks) {
    EXPECT_EQ(t.state, RunState::kFailed);
    ASSERT_TRUE(t.error.has_value());
    EXPECT_EQ(t.error->stage, "generation");
  }
}

TEST(Coordinator, CancelStopsPendingTasks) {
  Harness h;
  auto slow = std::make_shared<SquareDetector>(std::chrono::milliseconds(40));
  h.backends.register_detector("slow", slow);
  auto coord = h.make(1);
  auto job = small_job("cancel1", 2, {1, 2, 3, 4}, {"default"}, 1);
  job.detector_backend = "slow";
  const auto id = coord->enqueue(job);
  auto sub = coord->subscribe(id);
  while (auto e = sub.next()) {
    if (e->kind == EventKind::kTaskStarted) break;
  }
  coord->cancel(id);
  EXPECT_EQ(coord->wait(id), RunState::kCancelled);
  const auto m = coord->manifest(id);
  std::size_t cancelled = 0;
  for (const auto& t : m.tasks) {
    EXPECT_TRUE(is_terminal(t.state));
    cancelled += t.state == RunState::kCancelled;
  }
  EXPECT_GE(cancelled, 6u);
  EXPECT_EQ(m.state, RunState::kCancelled);
  coord->cancel(id);  // no-op on a terminal job
  EXPECT_EQ(coord->state(id), RunState::kCancelled);
}

TEST(Coordinator, RejectsDuplicatesUnknownsAndAfterShutdown) {
  Harness h;
  auto coord = h.make(1);
  const auto id = coord->enqueue(small_job("dup1", 1, {1}, {"default"}, 1));
  coord->wait(id);
  EXPECT_EQ(code_of([&] { coord->enqueue(small_job("dup1", 1, {1}, {"default"}, 1)); }),
            ErrorCode::kConflict);
  EXPECT_EQ(code_of([&] { coord->enqueue(small_job("wf1", 1, {1}, {"missing"}, 1)); }),
            ErrorCode::kNotFound);
  EXPECT_EQ(code_of([&] { coord->state("nope"); }), ErrorCode::kNotFound);
  coord->shutdown();
  EXPECT_EQ(code_of([&] { coord->enqueue(small_job("late1", 1, {1}, {"default"}, 1)); }),
            ErrorCode::kRejected);
}

TEST(Coordinator, ByteIdenticalAcrossWorkerCounts) {
  std::vector<std::string> csvs;
  std::vector<std::vector<Bytes>> outputs;
  for (std::size_t workers : {1u, 8u}) {
    Harness h;
    auto coord = h.make(workers);
    auto job = small_job("same");
    job.detector_backend = "square";
    const auto id = coord->enqueue(job);
    ASSERT_EQ(coord->wait(id), RunState::kCompleted);
    csvs.push_back(export_csv(coord->folder(id)));
    std::vector<Bytes> files;
    for (const auto& t : coord->manifest(id).tasks) {
      for (const auto& s : t.samples) files.push_back(read_file(coord->folder(id) / s.output_path));
    }
    outputs.push_back(std::move(files));
  }
  EXPECT_EQ(csvs[0], csvs[1]);
  EXPECT_EQ(outputs[0], outputs[1]);
}

TEST(Replay, ReproducesOutputsFromManifestAlone) {
  Harness h;
  auto coord = h.make(2);
  const auto id = coord->enqueue(small_job("replay1", 1, {5}, {"grow_mask"}, 2));
  ASSERT_EQ(coord->wait(id), RunState::kCompleted);
  const auto folder = coord->folder(id);
  coord->shutdown();
  const auto m = parse_manifest(read_text_file(folder / "job.json"));
  MockGenerationBackend backend(PerturbKind::kNoise);
  const auto outs = replay_task_outputs(folder, m.tasks[0].task_id, backend);
  ASSERT_EQ(outs.size(), 2u);
  for (std::size_t k = 0; k < 2; ++k) EXPECT_EQ(outs[k], read_file(folder / m.tasks[0].samples[k].output_path));
}

TEST(Recovery, ConstructorSettlesInterruptedJobs) {
  TempDir dir;
  BackendRegistry backends{BackendConfig{}};
  WorkflowRegistry workflows;
  std::filesystem::path folder;
  std::string first_task;
  {
    Coordinator coord({dir.path(), 1, RetryPolicy::none()}, backends, workflows);
    const auto id = coord.enqueue(small_job("crash1", 1, {1, 2}, {"default"}, 1));
    coord.wait(id);
    folder = coord.folder(id);
    first_task = coord.manifest(id).tasks[0].task_id;
  }
  // Simulate a crash mid-task: the second task still RUNNING, a stray temp folder.
  auto store = ManifestStore::open(folder);
  store->update([](JobManifest& m) {
    m.state = RunState::kRunning;
    m.tasks[1].state = RunState::kRunning;
    m.tasks[1].samples.clear();
  });
  std::filesystem::create_directories(folder / "tasks" / ".tmp-partial");
  Coordinator restarted({dir.path(), 1, RetryPolicy::none()}, backends, workflows);
  const auto m = parse_manifest(read_text_file(folder / "job.json"));
  EXPECT_EQ(m.state, RunState::kCompleted);
  EXPECT_EQ(m.find_task(first_task)->state, RunState::kCompleted);
  EXPECT_EQ(m.tasks[1].state, RunState::kFailed);
  EXPECT_EQ(m.tasks[1].error->stage, "interrupted");
  EXPECT_FALSE(std::filesystem::exists(folder / "tasks" / ".tmp-partial"));
  EXPECT_TRUE(verify_job(folder).clean());
}

}  // namespace
}  // namespace semprobe
