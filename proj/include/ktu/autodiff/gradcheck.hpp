/*
 * Copyright (c) 2026 The ktu Authors
 *
 * Licensed under the Apache License, Version 2.0;
 * You may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an 'AS IS' BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <cstddef>
#include <functional>
#include <string>

#include "ktu/autodiff/tape.hpp"

namespace ktu::ad {

// Builds a scalar loss on `tape`, registering each entry of `params` through
// Tape::parameter under its table name.
using ScalarObjective = std::function<Var(Tape& tape, const ParamTable& params)>;

struct GradCheckReport {
  double max_relative_error = 0.0;
  std::string worst_parameter;
  std::size_t worst_index = 0;
  std::size_t coordinates_checked = 0;
};

/// Central finite differences against Tape::backward, coordinate by
/// coordinate. Error per coordinate is |g_ad - g_fd| / max(1, |g_ad|, |g_fd|).
///
/// `max_coords_per_param` > 0 checks an evenly strided subset of each table.
GradCheckReport gradient_check(const ScalarObjective& f, const ParamTable& point, double h,
                               std::size_t max_coords_per_param = 0);

}  // namespace ktu::ad
