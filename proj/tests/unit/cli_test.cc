// Copyright 2026 The dpsynth Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
#include <gtest/gtest.h>
#include <sys/wait.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "dpsynth/data.h"
#include "dpsynth/desk.h"
#include "json.hpp"

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct Result {
  int exit_code = -1;
  std::string out;
};

Result RunCli(const std::string& args, const std::string& env = "") {
  const std::string cmd = env + " " + DPSYNTH_CLI + " " + args + " 2>/dev/null";
  Result r;
  FILE* pipe = ::popen(cmd.c_str(), "r");
  if (pipe == nullptr) return r;
  std::array<char, 4096> buf{};
  while (std::fgets(buf.data(), buf.size(), pipe) != nullptr) r.out += buf.data();
  const int status = ::pclose(pipe);
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

json LastJsonLine(const std::string& out) {
  std::istringstream in(out);
  std::string line;
  std::string last;
  while (std::getline(in, line)) {
    if (!line.empty()) last = line;
  }
  return json::parse(last);
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / ("dpsynth_cli_" +
        std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
    const dpsynth::data::TabularDataset d = dpsynth::desk::Generate(1, 1000, 200);
    std::ofstream(dir_ / "schema.json") << d.schema().ToJson();
    dpsynth::data::SaveCsv(d, dir_ / "data.csv");
  }

  std::string Common() const {
    return "--data " + (dir_ / "data.csv").string() + " --schema " +
           (dir_ / "schema.json").string() + " --model privbayes --epsilon 1,inf --l 1 --k 2 --seed 5";
  }

  std::string Slurp(const fs::path& p) const {
    std::ifstream in(p);
    std::stringstream s;
    s << in.rdbuf();
    return s.str();
  }

  fs::path dir_;
};

TEST_F(CliTest, RunWritesReport) {
  const Result r = RunCli("run " + Common() + " --out " + (dir_ / "out").string());
  ASSERT_EQ(r.exit_code, 0) << r.out;
  const json status = LastJsonLine(r.out);
  EXPECT_EQ(status["status"], "ok");
  EXPECT_EQ(status["command"], "run");
  EXPECT_GT(status["records"].get<int>(), 0);
  EXPECT_TRUE(fs::exists(dir_ / "out" / "records.csv"));
  EXPECT_TRUE(fs::exists(dir_ / "out" / "aggregates.csv"));
}

TEST_F(CliTest, StagedPipelineMatchesRun) {
  const std::string staged = (dir_ / "staged").string();
  ASSERT_EQ(RunCli("prepare " + Common() + " --out " + staged).exit_code, 0);
  EXPECT_TRUE(fs::exists(dir_ / "staged" / "prepared" / "cells.json"));
  ASSERT_EQ(RunCli("generate " + Common() + " --out " + staged).exit_code, 0);
  EXPECT_TRUE(fs::exists(dir_ / "staged" / "synthetic" / "runs.json"));
  ASSERT_EQ(RunCli("evaluate " + Common() + " --out " + staged).exit_code, 0);
  ASSERT_EQ(RunCli("run " + Common() + " --out " + (dir_ / "whole").string()).exit_code, 0);
  EXPECT_EQ(Slurp(dir_ / "staged" / "records.csv"), Slurp(dir_ / "whole" / "records.csv"));
  fs::remove(dir_ / "staged" / "aggregates.csv");
  const Result rep = RunCli("report --out " + staged);
  ASSERT_EQ(rep.exit_code, 0) << rep.out;
  EXPECT_TRUE(fs::exists(dir_ / "staged" / "aggregates.csv"));
}

TEST_F(CliTest, WorkerCountDoesNotChangeRecords) {
  ASSERT_EQ(RunCli("run " + Common() + " --out " + (dir_ / "a").string(),
                   "DPSYNTH_WORKERS=1").exit_code, 0);
  ASSERT_EQ(RunCli("run " + Common() + " --out " + (dir_ / "b").string(),
                   "DPSYNTH_WORKERS=4").exit_code, 0);
  EXPECT_EQ(Slurp(dir_ / "a" / "records.csv"), Slurp(dir_ / "b" / "records.csv"));
}

TEST_F(CliTest, ErrorsProduceSummaryAndExitCode) {
  Result r = RunCli("run " + Common() + " --epsilon -1 --out " + (dir_ / "x").string());
  EXPECT_EQ(r.exit_code, 2);
  json e = LastJsonLine(r.out);
  EXPECT_EQ(e["status"], "error");
  EXPECT_EQ(e["kind"], "invalid_argument");
  EXPECT_EQ(e["command"], "run");
  EXPECT_FALSE(e["message"].get<std::string>().empty());

  r = RunCli("run --data /nonexistent.csv --schema " + (dir_ / "schema.json").string() +
             " --out " + (dir_ / "x").string());
  EXPECT_EQ(r.exit_code, 4);
  EXPECT_EQ(LastJsonLine(r.out)["kind"], "io_error");

  std::ofstream(dir_ / "bad.csv") << "age,sex,race,education,hours,income\n17-30,Female,Martian,HS,<35,<=50K\n";
  r = RunCli("run --data " + (dir_ / "bad.csv").string() + " --schema " +
             (dir_ / "schema.json").string() + " --out " + (dir_ / "x").string());
  EXPECT_EQ(r.exit_code, 3);
  EXPECT_EQ(LastJsonLine(r.out)["kind"], "data_error");

  r = RunCli("run " + Common() + " --out " + (dir_ / "x").string(), "DPSYNTH_WORKERS=zero");
  EXPECT_EQ(r.exit_code, 2);

  r = RunCli("frobnicate");
  EXPECT_NE(r.exit_code, 0);
  EXPECT_EQ(LastJsonLine(r.out)["status"], "error");

  r = RunCli("evaluate " + Common() + " --out " + (dir_ / "empty").string());
  EXPECT_NE(r.exit_code, 0);
  EXPECT_EQ(LastJsonLine(r.out)["status"], "error");
}

}  // namespace
