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
// A small seeded census-like dataset for desk-scale reproduction runs:
// 5,000 rows, six categorical columns, exactly 1,000 rows of the minority
// income class.
#ifndef DPSYNTH_DESK_H_
#define DPSYNTH_DESK_H_

#include <cstddef>
#include <cstdint>
#include <memory>

#include "dpsynth/data.h"

namespace dpsynth::desk {

inline constexpr std::size_t kRows = 5000;
inline constexpr std::size_t kMinorityRows = 1000;
inline constexpr std::uint64_t kDefaultSeed = 20260101;

// Columns age, sex, race, education, hours, income; class income, subgroup
// columns sex, age and race.
std::shared_ptr<const data::Schema> Schema();

// Income is drawn first with an exact class count; the remaining columns
// follow a fixed network conditioned on it.
data::TabularDataset Generate(std::uint64_t seed = kDefaultSeed,
                              std::size_t rows = kRows,
                              std::size_t minority_rows = kMinorityRows);

}  // namespace dpsynth::desk

#endif  // DPSYNTH_DESK_H_
