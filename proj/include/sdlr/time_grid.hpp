// Copyright 2026 The sdlr Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cmath>
#include <cstdint>
#include <string>

#include "sdlr/error.hpp"

namespace sdlr {

// Number of fixed steps of size dt needed to reach horizon T. The final
// time is count * dt; T is rounded to the nearest multiple of dt.
inline std::int64_t step_count(double horizon, double dt) {
  if (!(dt > 0.0) || !std::isfinite(dt)) {
    throw DomainError("time step must be positive and finite, got " +
                      std::to_string(dt));
  }
  if (!(horizon >= 0.0) || !std::isfinite(horizon)) {
    throw DomainError("horizon must be non-negative and finite, got " +
                      std::to_string(horizon));
  }
  return static_cast<std::int64_t>(std::llround(horizon / dt));
}

// Steps between recorded snapshots so that about `per_unit_time` records
// land in each unit of time. Never less than one.
inline std::int64_t record_stride(double dt, double per_unit_time) {
  if (!(per_unit_time > 0.0)) return 1;
  const auto s = static_cast<std::int64_t>(std::llround(1.0 / (per_unit_time * dt)));
  return s < 1 ? 1 : s;
}

}  // namespace sdlr
