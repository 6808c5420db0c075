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

#include "ktu/train/optim.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include "ktu/error.hpp"

namespace ktu::train {

LrSchedule make_schedule(double peak_lr, double warmup_fraction, std::size_t total_steps) {
  if (!(peak_lr > 0) || !std::isfinite(peak_lr)) throw std::invalid_argument("make_schedule: peak_lr must be positive");
  if (!(warmup_fraction >= 0 && warmup_fraction < 1))
    throw std::invalid_argument("make_schedule: warmup_fraction must lie in [0, 1)");
  LrSchedule s;
  s.peak_lr = peak_lr;
  s.total_steps = total_steps;
  s.warmup_steps = static_cast<std::size_t>(std::llround(warmup_fraction * static_cast<double>(total_steps)));
  return s;
}

double lr_at_step(const LrSchedule& s, double step) {
  if (!(step >= 0) || step > static_cast<double>(s.total_steps))
    throw std::out_of_range("lr_at_step: step " + std::to_string(step) + " outside [0, " +
                            std::to_string(s.total_steps) + "]");
  const double warmup = static_cast<double>(s.warmup_steps);
  if (step < warmup) return s.peak_lr * step / warmup;
  const double decay_span = static_cast<double>(s.total_steps) - warmup;
  if (decay_span <= 0) return s.peak_lr;
  const double progress = (step - warmup) / decay_span;
  return s.peak_lr * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
}

void adam_step(ad::ParamTable& params, const ad::GradientTable& grads, AdamState& state, double lr,
               const AdamConfig& c) {
  if (!(lr >= 0) || !std::isfinite(lr)) throw std::invalid_argument("adam_step: learning rate must be finite and >= 0");
  for (const auto& [name, value] : params) {
    auto g = grads.find(name);
    if (g == grads.end()) throw std::invalid_argument("adam_step: no gradient for " + name);
    if (g->second.shape() != value.shape())
      throw ShapeError("adam_step: gradient shape " + ad::shape_string(g->second.shape()) + " for " + name + " " +
                       ad::shape_string(value.shape()));
    const auto gv = g->second.values();
    for (std::size_t i = 0; i < gv.size(); ++i)
      if (!std::isfinite(gv[i])) throw NumericError("adam_step: non-finite gradient in " + name + "[" + std::to_string(i) + "]");
  }
  for (const auto& [name, g] : grads)
    if (!params.count(name)) throw std::invalid_argument("adam_step: gradient for unknown parameter " + name);

  ++state.step;
  const double t = static_cast<double>(state.step);
  const double correct1 = 1.0 - std::pow(c.beta1, t);
  const double correct2 = 1.0 - std::pow(c.beta2, t);
  for (auto& [name, value] : params) {
    const auto g = grads.at(name).values();
    const std::size_t n = g.size();
    auto m_it = state.first_moment.find(name);
    auto v_it = state.second_moment.find(name);
    std::vector<double> m = m_it == state.first_moment.end() ? std::vector<double>(n, 0.0)
                                                             : std::vector<double>(m_it->second.values().begin(), m_it->second.values().end());
    std::vector<double> v = v_it == state.second_moment.end() ? std::vector<double>(n, 0.0)
                                                              : std::vector<double>(v_it->second.values().begin(), v_it->second.values().end());
    std::vector<double> p(value.values().begin(), value.values().end());
    for (std::size_t i = 0; i < n; ++i) {
      m[i] = c.beta1 * m[i] + (1 - c.beta1) * g[i];
      v[i] = c.beta2 * v[i] + (1 - c.beta2) * g[i] * g[i];
      const double m_hat = m[i] / correct1;
      const double v_hat = v[i] / correct2;
      p[i] -= lr * m_hat / (std::sqrt(v_hat) + c.epsilon);
    }
    const ad::Shape shape = value.shape();
    value = ad::NdArray(shape, std::move(p));
    state.first_moment[name] = ad::NdArray::unchecked(shape, std::move(m));
    state.second_moment[name] = ad::NdArray::unchecked(shape, std::move(v));
  }
}

double global_norm(const ad::GradientTable& grads) {
  double sq = 0;
  for (const auto& [name, g] : grads)
    for (double x : g.values()) sq += x * x;
  return std::sqrt(sq);
}

double clip_by_global_norm(ad::GradientTable& grads, double max_norm) {
  if (!(max_norm > 0)) throw std::invalid_argument("clip_by_global_norm: max_norm must be positive");
  const double norm = global_norm(grads);
  if (!std::isfinite(norm)) throw NumericError("clip_by_global_norm: gradient norm is not finite");
  if (norm > max_norm) {
    const double scale = max_norm / norm;
    for (auto& [name, g] : grads) {
      std::vector<double> v(g.values().begin(), g.values().end());
      for (double& x : v) x *= scale;
      g = ad::NdArray(g.shape(), std::move(v));
    }
  }
  return norm;
}

}  // namespace ktu::train
