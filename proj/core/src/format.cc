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
#include "dpsynth/format.h"

#include <charconv>
#include <cmath>
#include <limits>

#include "dpsynth/errors.h"

namespace dpsynth {

std::string FormatDouble(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

double ParseDouble(std::string_view s) {
  if (s == "inf" || s == "infinity" || s == "Infinity" || s == "INF" ||
      s == "+inf") {
    return std::numeric_limits<double>::infinity();
  }
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  if (s == "nan" || s == "NA") return std::numeric_limits<double>::quiet_NaN();
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw InvalidArgumentError("not a number: '" + std::string(s) + "'");
  }
  return v;
}

}  // namespace dpsynth
