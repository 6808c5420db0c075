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

#include "ktu/autodiff/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace ktu::ad {

namespace {

double evaluate(const ScalarObjective& f, const ParamTable& params) {
  Tape tape;
  Var loss = f(tape, params);
  if (loss.value().size() != 1) {
    throw ShapeError("gradient_check: objective is not scalar, shape " +
                     shape_string(loss.value().shape()));
  }
  return loss.value()[0];
}

NdArray with_coordinate(const NdArray& a, std::size_t i, double value) {
  std::vector<double> v(a.values().begin(), a.values().end());
  v[i] = value;
  return NdArray(a.shape(), std::move(v));
}

}  // namespace

GradCheckReport gradient_check(const ScalarObjective& f, const ParamTable& point, double h,
                               std::size_t max_coords_per_param) {
  if (!(h >= 1e-6 && h <= 1e-3)) {
    throw std::invalid_argument("gradient_check: step must lie in [1e-6, 1e-3]");
  }

  GradientTable analytic;
  {
    Tape tape;
    Var loss = f(tape, point);
    if (loss.value().size() != 1) {
      throw ShapeError("gradient_check: objective is not scalar, shape " +
                       shape_string(loss.value().shape()));
    }
    analytic = tape.backward(loss);
  }

  GradCheckReport report;
  ParamTable probe = point;
  for (const auto& [name, value] : point) {
    auto it = analytic.find(name);
    const std::size_t n = value.size();
    std::size_t stride = 1;
    if (max_coords_per_param > 0 && n > max_coords_per_param) {
      stride = (n + max_coords_per_param - 1) / max_coords_per_param;
    }
    for (std::size_t i = 0; i < n; i += stride) {
      const double x = value[i];
      probe[name] = with_coordinate(value, i, x + h);
      const double up = evaluate(f, probe);
      probe[name] = with_coordinate(value, i, x - h);
      const double down = evaluate(f, probe);
      probe[name] = value;

      const double fd = (up - down) / (2.0 * h);
      const double ad = it == analytic.end() ? 0.0 : it->second[i];
      const double err = std::abs(ad - fd) / std::max({1.0, std::abs(ad), std::abs(fd)});
      ++report.coordinates_checked;
      if (err > report.max_relative_error || report.worst_parameter.empty()) {
        if (err >= report.max_relative_error) {
          report.max_relative_error = err;
          report.worst_parameter = name;
          report.worst_index = i;
        }
      }
    }
  }
  return report;
}

}  // namespace ktu::ad
