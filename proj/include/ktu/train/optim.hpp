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
#include <map>
#include <string>

#include "ktu/autodiff/tape.hpp"

namespace ktu::train {

// Linear warmup from 0 to peak over warmup_steps, then half a cosine down to
// 0 at total_steps.
struct LrSchedule {
  double peak_lr = 3e-4;
  std::size_t warmup_steps = 0;
  std::size_t total_steps = 0;
};

LrSchedule make_schedule(double peak_lr, double warmup_fraction, std::size_t total_steps);

// step may be fractional; throws std::out_of_range outside [0, total_steps].
double lr_at_step(const LrSchedule& schedule, double step);

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  std::size_t step = 0;
  std::map<std::string, ad::NdArray> first_moment;
  std::map<std::string, ad::NdArray> second_moment;
};

// One bias-corrected Adam update of every parameter in `params`. Each needs a
// gradient of the same shape; non-finite gradients raise NumericError.
void adam_step(ad::ParamTable& params, const ad::GradientTable& grads, AdamState& state, double lr,
               const AdamConfig& config = {});

double global_norm(const ad::GradientTable& grads);

// Rescales all gradients together when their global L2 norm exceeds
// max_norm. Returns the norm before clipping.
double clip_by_global_norm(ad::GradientTable& grads, double max_norm);

}  // namespace ktu::train
