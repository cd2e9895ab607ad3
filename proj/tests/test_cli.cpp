// Copyright 2026 The SemProbe Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include "cli_fixture.hpp"

namespace semprobe {
namespace {

using testing::cli;
using testing::CliInputs;
using testing::concat;
using testing::TempDir;

std::size_t line_count(const std::string& s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')); }

TEST(Cli, RunFactorLevelTwoSeeds) {
  CliInputs in(1);
  TempDir out;
  const auto r = cli(concat(in.run_args(out.path()),
                            {"--factor", "hand_covering", "--level", "cut_resistant", "--seeds", "1,2", "--job-id", "cli1"}));
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("JOB_COMPLETED"), std::string::npos);
  const auto csv = read_text_file(out / "jobs/cli1/results.csv");
  EXPECT_EQ(line_count(csv), 1u + 2u);
  EXPECT_NE(csv.find("hand_covering,cut_resistant"), std::string::npos);
}

TEST(Cli, IdenticalRunsGiveIdenticalCsv) {
  CliInputs in(2);
  TempDir a, b;
  const std::vector<std::string> extra{"--prompt", "sawdust on the hand", "--seeds", "3,4", "--samples", "2",
                                       "--job-id", "same", "--mask-dilate", "1"};
  ASSERT_EQ(cli(concat(in.run_args(a.path()), extra)).code, 0);
  ASSERT_EQ(cli(concat(in.run_args(b.path()), extra)).code, 0);
  EXPECT_EQ(read_text_file(a / "jobs/same/results.csv"), read_text_file(b / "jobs/same/results.csv"));
}

TEST(Cli, PerImageMaskDirectory) {
  CliInputs in(2);
  TempDir out;
  auto args = in.run_args(out.path());
  args[8] = in.masks.string();
  const auto r = cli(concat(args, {"--prompt", "x", "--job-id", "md"}));
  EXPECT_EQ(r.code, 0) << r.err;
}

TEST(Cli, UsageErrorsExitTwo) {
  CliInputs in(1);
  TempDir out;
  auto unknown = cli(concat(in.run_args(out.path()), {"--factor", "no_such_factor", "--level", "x"}));
  EXPECT_EQ(unknown.code, 2);
  EXPECT_NE(unknown.err.find("unknown factor 'no_such_factor'"), std::string::npos) << unknown.err;

  EXPECT_EQ(cli(concat(in.run_args(out.path()), {})).code, 2);  // neither factor nor prompt
  EXPECT_EQ(cli(concat(in.run_args(out.path()), {"--prompt", "x", "--factor", "illumination", "--level", "low_light"})).code, 2);
  EXPECT_EQ(cli({"run", "--images", in.images.string()}).code, 2);
  EXPECT_EQ(cli({"bogus"}).code, 2);
  EXPECT_EQ(cli({}).code, 2);
  EXPECT_EQ(cli(concat(in.run_args(out.path()), {"--prompt", "x", "--workflows", "missing"})).code, 2);
  EXPECT_EQ(cli(concat(in.run_args(out.path()), {"--prompt", "x", "--denoise", "2"})).code, 2);
}

TEST(Cli, FailedJobExitsOne) {
  CliInputs in(1);
  TempDir out;
  // Nothing listens here, so every generation attempt fails after retries.
  const auto r = cli(concat(in.run_args(out.path()),
                            {"--prompt", "x", "--gen-backend", "comfy:" + testing::dead_url(), "--job-id", "dead"}));
  EXPECT_EQ(r.code, 1) << r.out << r.err;
  EXPECT_NE(r.out.find("TASK_FAILED"), std::string::npos);
}

TEST(Cli, VerifyAndExport) {
  CliInputs in(1);
  TempDir out;
  ASSERT_EQ(cli(concat(in.run_args(out.path()), {"--prompt", "x", "--job-id", "ve"})).code, 0);
  const auto job = (out / "jobs/ve").string();
  auto v = cli({"verify", "--job", job});
  EXPECT_EQ(v.code, 0);
  EXPECT_NE(v.out.find("clean"), std::string::npos);

  auto e = cli({"export", "--job", job, "--format", "json"});
  EXPECT_EQ(e.code, 0);
  EXPECT_TRUE(std::filesystem::exists(out / "jobs/ve/results.json"));
  EXPECT_EQ(cli({"export", "--job", job, "--format", "xml"}).code, 2);

  const auto m = parse_manifest(read_text_file(out / "jobs/ve/job.json"));
  std::filesystem::remove(out / "jobs/ve" / m.tasks[0].samples[0].output_path);
  v = cli({"verify", "--job", job});
  EXPECT_EQ(v.code, 1);
  EXPECT_NE(v.out.find("missing"), std::string::npos) << v.out;
}

}  // namespace
}  // namespace semprobe
