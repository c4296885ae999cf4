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
// Writes the desk-scale dataset and its schema.
#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "dpsynth/data.h"
#include "dpsynth/desk.h"
#include "dpsynth/errors.h"

int main(int argc, char** argv) {
  CLI::App app{"Write the desk-scale census-like dataset"};
  std::string out = "data";
  std::uint64_t seed = dpsynth::desk::kDefaultSeed;
  std::size_t rows = dpsynth::desk::kRows;
  std::size_t minority = dpsynth::desk::kMinorityRows;
  app.add_option("--out", out, "Output directory");
  app.add_option("--seed", seed, "Generator seed");
  app.add_option("--rows", rows, "Row count");
  app.add_option("--minority", minority, "Rows of the minority income class");
  CLI11_PARSE(app, argc, argv);
  try {
    std::filesystem::create_directories(out);
    const auto ds = dpsynth::desk::Generate(seed, rows, minority);
    dpsynth::data::SaveCsv(ds, std::filesystem::path(out) / "desk.csv");
    std::ofstream schema(std::filesystem::path(out) / "desk.schema.json");
    schema << ds.schema().ToJson() << '\n';
    if (!schema) throw dpsynth::IoError("cannot write desk.schema.json");
  } catch (const std::exception& e) {
    std::cerr << "dpsynth_desk: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
