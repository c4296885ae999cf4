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
//
// dpsynth: prepare, generate, evaluate, run and report.
//
// Stage outputs live under --out:
//   prepared/cells.json, prepared/cell_<i>/{train,test}.csv
//   synthetic/runs.json, synthetic/<model>_e<i>_i<j>_f<f>_s<s>.csv
//   models/<model>_e<i>_i<j>_f<f>.json (+ .log.csv for GANs)
//   records.csv, aggregates.csv, failures.csv, config.json, chart_*.svg
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "dpsynth/data.h"
#include "dpsynth/errors.h"
#include "dpsynth/format.h"
#include "dpsynth/harness.h"
#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace dpsynth;

namespace {

struct Flags {
  std::string config;
  std::string data;
  std::string schema;
  std::string model;
  std::vector<std::string> epsilons;
  std::vector<std::string> imbalances;
  std::string setting;
  std::optional<int> l;
  std::optional<int> k;
  std::optional<std::uint64_t> seed;
  std::string out;
};

harness::ExperimentConfig BuildConfig(const Flags& f) {
  harness::ExperimentConfig c;
  if (!f.config.empty()) c = harness::ExperimentConfig::Load(f.config);
  if (!f.data.empty()) c.data_path = f.data;
  if (!f.schema.empty()) c.schema_path = f.schema;
  if (!f.model.empty()) c.model = harness::ParseModel(f.model);
  if (!f.epsilons.empty()) {
    c.epsilons.clear();
    for (const std::string& e : f.epsilons) c.epsilons.push_back(ParseDouble(e));
  }
  if (!f.imbalances.empty()) {
    c.imbalances.clear();
    for (const std::string& r : f.imbalances) c.imbalances.push_back(ParseDouble(r));
  }
  if (!f.setting.empty()) c.setting = harness::ParseSetting(f.setting);
  if (f.l) c.l = *f.l;
  if (f.k) c.k = *f.k;
  if (f.seed) c.seed = *f.seed;
  if (!f.out.empty()) c.output_dir = f.out;
  c.Validate();
  return c;
}

std::shared_ptr<const data::Schema> LoadSchema(const harness::ExperimentConfig& c) {
  if (c.schema_path.empty()) {
    throw InvalidArgumentError("no schema given (use --schema or the config)");
  }
  return std::make_shared<const data::Schema>(data::Schema::Load(c.schema_path));
}

json ReadJsonFile(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw DataError("malformed " + path.string() + ": " + e.what());
  }
}

void WriteJsonFile(const fs::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << j.dump(2) << '\n';
  if (!out) throw IoError("write failed for " + path.string());
}

void WriteText(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed for " + path.string());
}

void MakeDirs(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
}

std::vector<harness::PreparedCell> PrepareCells(const harness::ExperimentConfig& c) {
  if (c.data_path.empty()) {
    throw InvalidArgumentError("no data given (use --data or the config)");
  }
  const auto schema = LoadSchema(c);
  const data::TabularDataset full = data::LoadCsv(c.data_path, schema);
  std::optional<data::TabularDataset> test;
  if (!c.test_path.empty()) {
    test = data::LoadCsv(c.test_path, schema, data::Provenance::kTest);
  }
  return harness::Prepare(c, full, test);
}

void SavePrepared(const std::vector<harness::PreparedCell>& cells,
                  const fs::path& dir) {
  MakeDirs(dir);
  json list = json::array();
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const fs::path sub = dir / ("cell_" + std::to_string(i));
    MakeDirs(sub);
    data::SaveCsv(cells[i].train, sub / "train.csv");
    data::SaveCsv(cells[i].test, sub / "test.csv");
    json groups = json::array();
    for (const data::SubgroupKey& g : cells[i].groups) {
      groups.push_back({{"attributes", g.attributes}, {"values", g.values}});
    }
    list.push_back({{"imbalance", harness::ImbalanceLabel(cells[i].imbalance)},
                    {"train", "cell_" + std::to_string(i) + "/train.csv"},
                    {"test", "cell_" + std::to_string(i) + "/test.csv"},
                    {"groups", std::move(groups)}});
  }
  WriteJsonFile(dir / "cells.json", {{"cells", std::move(list)}});
}

std::vector<harness::PreparedCell> LoadPrepared(const harness::ExperimentConfig& c,
                                                const fs::path& dir) {
  const auto schema = LoadSchema(c);
  const json j = ReadJsonFile(dir / "cells.json");
  std::vector<harness::PreparedCell> cells;
  try {
    for (const json& jc : j.at("cells")) {
      const std::string imb = jc.at("imbalance").get<std::string>();
      std::vector<data::SubgroupKey> groups;
      for (const json& g : jc.at("groups")) {
        groups.push_back({g.at("attributes").get<std::vector<std::string>>(),
                          g.at("values").get<std::vector<std::string>>()});
      }
      cells.push_back(
          {imb == "none" ? std::numeric_limits<double>::quiet_NaN() : ParseDouble(imb),
           data::LoadCsv(dir / jc.at("train").get<std::string>(), schema,
                         data::Provenance::kTrain),
           data::LoadCsv(dir / jc.at("test").get<std::string>(), schema,
                         data::Provenance::kTest),
           std::move(groups)});
    }
  } catch (const json::exception& e) {
    throw DataError("malformed cells.json: " + std::string(e.what()));
  }
  if (cells.empty()) throw DataError("cells.json lists no cells");
  return cells;
}

std::string RunStem(const harness::ExperimentConfig& c, std::size_t ei,
                    std::size_t ii, int fit) {
  return std::string(harness::ModelName(c.model)) + "_e" + std::to_string(ei) +
         "_i" + std::to_string(ii) + "_f" + std::to_string(fit);
}

std::vector<harness::SyntheticRun> GenerateAndSave(
    const harness::ExperimentConfig& c,
    const std::vector<harness::PreparedCell>& cells, int workers,
    const fs::path& out) {
  const fs::path models = out / "models";
  const fs::path synth = out / "synthetic";
  MakeDirs(models);
  MakeDirs(synth);
  auto runs = harness::Generate(
      c, cells, workers,
      [&](std::size_t ei, std::size_t ii, int fit, const std::string& model,
          const std::string& log) {
        const std::string stem = RunStem(c, ei, ii, fit);
        WriteText(models / (stem + ".json"), model + "\n");
        if (!log.empty()) WriteText(models / (stem + ".log.csv"), log);
      });
  json list = json::array();
  for (const harness::SyntheticRun& r : runs) {
    json jr = {{"epsilon_index", r.epsilon_index},
               {"imbalance_index", r.imbalance_index},
               {"fit", r.fit},
               {"sample", r.sample},
               {"degenerate", r.degenerate},
               {"epsilon_spent", FormatDouble(r.epsilon_spent)},
               {"error", r.error},
               {"error_kind", r.error_kind}};
    if (r.data) {
      const std::string file = RunStem(c, r.epsilon_index, r.imbalance_index, r.fit) +
                               "_s" + std::to_string(r.sample) + ".csv";
      data::SaveCsv(*r.data, synth / file);
      jr["file"] = file;
    }
    list.push_back(std::move(jr));
  }
  WriteJsonFile(synth / "runs.json", {{"model", harness::ModelName(c.model)},
                                      {"runs", std::move(list)}});
  return runs;
}

std::vector<harness::SyntheticRun> LoadRuns(const harness::ExperimentConfig& c,
                                            const fs::path& dir) {
  const auto schema = LoadSchema(c);
  const json j = ReadJsonFile(dir / "runs.json");
  std::vector<harness::SyntheticRun> runs;
  try {
    if (j.at("model").get<std::string>() != harness::ModelName(c.model)) {
      throw InvalidArgumentError("synthetic runs were made by model '" +
                                 j.at("model").get<std::string>() + "'");
    }
    for (const json& jr : j.at("runs")) {
      harness::SyntheticRun r;
      r.epsilon_index = jr.at("epsilon_index").get<std::size_t>();
      r.imbalance_index = jr.at("imbalance_index").get<std::size_t>();
      r.fit = jr.at("fit").get<int>();
      r.sample = jr.at("sample").get<int>();
      r.degenerate = jr.at("degenerate").get<bool>();
      r.epsilon_spent = ParseDouble(jr.at("epsilon_spent").get<std::string>());
      r.error = jr.at("error").get<std::string>();
      r.error_kind = jr.at("error_kind").get<std::string>();
      if (jr.contains("file")) {
        r.data = data::LoadCsv(dir / jr.at("file").get<std::string>(), schema,
                               data::Provenance::kSynthetic);
      }
      runs.push_back(std::move(r));
    }
  } catch (const json::exception& e) {
    throw DataError("malformed runs.json: " + std::string(e.what()));
  }
  return runs;
}

json Summary(const std::string& command, const harness::AuditReport& report,
             const fs::path& out) {
  return {{"status", "ok"},
          {"command", command},
          {"records", report.records.size()},
          {"failures", report.failures.size()},
          {"out", out.string()}};
}

int ExitCodeFor(const std::string& kind) {
  if (kind == "invalid_argument") return 2;
  if (kind == "data_error") return 3;
  if (kind == "io_error") return 4;
  if (kind == "state_error") return 5;
  return 1;
}

int Fail(const std::string& command, const std::string& kind,
         const std::string& message) {
  std::cout << json{{"status", "error"},
                    {"command", command},
                    {"kind", kind},
                    {"message", message}}
                   .dump()
            << std::endl;
  return ExitCodeFor(kind);
}

void AddExperimentFlags(CLI::App* app, Flags& f) {
  app->add_option("--config", f.config, "Experiment config JSON");
  app->add_option("--data", f.data, "Dataset CSV (overrides the config)");
  app->add_option("--schema", f.schema, "Schema JSON (overrides the config)");
  app->add_option("--model", f.model, "privbayes, dpwgan or pategan");
  app->add_option("--epsilon", f.epsilons, "Epsilon values; 'inf' for no DP")
      ->delimiter(',');
  app->add_option("--imbalance", f.imbalances, "Minority subgroup ratios")
      ->delimiter(',');
  app->add_option("--setting", f.setting,
                  "class, single-subgroup or multi-subgroup");
  app->add_option("--l", f.l, "Generator fits per cell");
  app->add_option("--k", f.k, "Synthetic samples per fit");
  app->add_option("--seed", f.seed, "Master seed");
  app->add_option("--out", f.out, "Output directory");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Differentially private synthetic data generation and audit"};
  app.require_subcommand(1);
  Flags flags;
  CLI::App* prepare = app.add_subcommand("prepare", "Split and (im)balance data");
  CLI::App* generate =
      app.add_subcommand("generate", "Fit generators and sample synthetic data");
  CLI::App* evaluate =
      app.add_subcommand("evaluate", "Train and score classifiers, write reports");
  CLI::App* run = app.add_subcommand("run", "prepare, generate and evaluate");
  CLI::App* report =
      app.add_subcommand("report", "Re-aggregate records.csv and redraw charts");
  for (CLI::App* sub : {prepare, generate, evaluate, run, report}) {
    AddExperimentFlags(sub, flags);
  }

  std::string command = "dpsynth";
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return Fail(command, "invalid_argument", e.what());
  }

  command = app.get_subcommands().front()->get_name();
  try {
    const harness::ExperimentConfig config = BuildConfig(flags);
    const fs::path out = config.output_dir;
    const int workers = harness::WorkerCount();
    if (prepare->parsed()) {
      const auto cells = PrepareCells(config);
      SavePrepared(cells, out / "prepared");
      std::cout << json{{"status", "ok"},
                        {"command", command},
                        {"cells", cells.size()},
                        {"out", out.string()}}
                       .dump()
                << std::endl;
    } else if (generate->parsed()) {
      const auto cells = fs::exists(out / "prepared" / "cells.json")
                             ? LoadPrepared(config, out / "prepared")
                             : PrepareCells(config);
      const auto runs = GenerateAndSave(config, cells, workers, out);
      std::size_t failed = 0;
      for (const auto& r : runs) failed += r.error.empty() ? 0 : 1;
      std::cout << json{{"status", "ok"},
                        {"command", command},
                        {"runs", runs.size()},
                        {"failed_runs", failed},
                        {"out", out.string()}}
                       .dump()
                << std::endl;
    } else if (evaluate->parsed()) {
      const auto cells = LoadPrepared(config, out / "prepared");
      const auto runs = LoadRuns(config, out / "synthetic");
      const harness::AuditReport result =
          harness::Evaluate(config, cells, runs, workers);
      harness::EmitReport(result, config, out);
      std::cout << Summary(command, result, out).dump() << std::endl;
    } else if (run->parsed()) {
      const auto cells = PrepareCells(config);
      const auto runs = harness::Generate(config, cells, workers);
      const harness::AuditReport result =
          harness::Evaluate(config, cells, runs, workers);
      harness::EmitReport(result, config, out);
      std::cout << Summary(command, result, out).dump() << std::endl;
    } else if (report->parsed()) {
      std::ifstream in(out / "records.csv");
      if (!in) throw IoError("cannot open " + (out / "records.csv").string());
      harness::AuditReport result;
      result.records = harness::ReadRecordsCsv(in);
      if (std::ifstream fin(out / "failures.csv"); fin) {
        result.failures = harness::ReadFailuresCsv(fin);
      }
      harness::ExperimentConfig echo = config;
      if (flags.config.empty() && fs::exists(out / "config.json")) {
        echo = harness::ExperimentConfig::Load(out / "config.json");
        echo.output_dir = out;
      }
      harness::EmitReport(result, echo, out);
      std::cout << Summary(command, result, out).dump() << std::endl;
    }
  } catch (const Error& e) {
    return Fail(command, e.kind(), e.what());
  } catch (const std::exception& e) {
    return Fail(command, "internal", e.what());
  }
  return EXIT_SUCCESS;
}
