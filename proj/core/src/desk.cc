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
#include "dpsynth/desk.h"

#include <algorithm>
#include <array>
#include <span>
#include <vector>

#include "dpsynth/errors.h"
#include "dpsynth/rng.h"

namespace dpsynth::desk {
namespace {

enum Col { kAge, kSex, kRace, kEducation, kHours, kIncome, kCols };

int Draw(std::span<const double> probs, Rng& rng) {
  double u = rng.Uniform();
  for (std::size_t i = 0; i + 1 < probs.size(); ++i) {
    if (u < probs[i]) return static_cast<int>(i);
    u -= probs[i];
  }
  return static_cast<int>(probs.size()) - 1;
}

// Indexed by income.
constexpr std::array<double, 2> kMaleGivenIncome = {0.60, 0.85};
constexpr std::array<std::array<double, 4>, 2> kAgeGivenIncome = {{
    {0.35, 0.30, 0.22, 0.13},
    {0.08, 0.40, 0.40, 0.12},
}};
constexpr std::array<std::array<double, 3>, 2> kRaceGivenIncome = {{
    {0.80, 0.11, 0.09},
    {0.88, 0.05, 0.07},
}};
constexpr std::array<std::array<double, 4>, 2> kEducationGivenIncome = {{
    {0.45, 0.30, 0.18, 0.07},
    {0.12, 0.23, 0.38, 0.27},
}};
// Indexed by [income][sex].
constexpr std::array<std::array<std::array<double, 3>, 2>, 2> kHoursGivenIncomeSex = {{
    {{{0.45, 0.45, 0.10}, {0.20, 0.62, 0.18}}},
    {{{0.15, 0.60, 0.25}, {0.06, 0.50, 0.44}}},
}};

}  // namespace

std::shared_ptr<const data::Schema> Schema() {
  using data::Column;
  static const auto schema = std::make_shared<const data::Schema>(
      std::vector<Column>{
          Column::Categorical("age", {"17-30", "31-45", "46-60", "61+"}),
          Column::Categorical("sex", {"Female", "Male"}),
          Column::Categorical("race", {"White", "Black", "Other"}),
          Column::Categorical("education",
                              {"HS", "Some-college", "Bachelors", "Advanced"}),
          Column::Categorical("hours", {"<35", "35-45", ">45"}),
          Column::Categorical("income", {"<=50K", ">50K"}),
      },
      "income", std::vector<std::string>{"sex", "age", "race"});
  return schema;
}

data::TabularDataset Generate(std::uint64_t seed, std::size_t rows,
                              std::size_t minority_rows) {
  if (rows == 0 || minority_rows > rows) {
    throw InvalidArgumentError("desk dataset needs 0 <= minority <= rows > 0");
  }
  Rng rng(seed);
  std::vector<int> income(rows, 0);
  std::fill(income.begin(), income.begin() + minority_rows, 1);
  std::shuffle(income.begin(), income.end(), rng.engine());
  std::vector<std::int32_t> cells(rows * kCols);
  for (std::size_t r = 0; r < rows; ++r) {
    const int y = income[r];
    std::int32_t* row = cells.data() + r * kCols;
    const int sex = rng.Uniform() < kMaleGivenIncome[y] ? 1 : 0;
    row[kAge] = Draw(kAgeGivenIncome[y], rng);
    row[kSex] = sex;
    row[kRace] = Draw(kRaceGivenIncome[y], rng);
    row[kEducation] = Draw(kEducationGivenIncome[y], rng);
    row[kHours] = Draw(kHoursGivenIncomeSex[y][sex], rng);
    row[kIncome] = y;
  }
  return data::TabularDataset(Schema(), std::move(cells));
}

}  // namespace dpsynth::desk
