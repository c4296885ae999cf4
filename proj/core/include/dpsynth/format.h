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
#ifndef DPSYNTH_FORMAT_H_
#define DPSYNTH_FORMAT_H_

#include <string>
#include <string_view>

namespace dpsynth {

// Shortest representation that round-trips; "inf", "-inf" and "nan" for
// non-finite values. Output is locale independent.
std::string FormatDouble(double v);

// Accepts anything FormatDouble produces plus "infinity"/"Infinity"/"inf".
// Throws InvalidArgumentError on junk.
double ParseDouble(std::string_view s);

}  // namespace dpsynth

#endif  // DPSYNTH_FORMAT_H_
