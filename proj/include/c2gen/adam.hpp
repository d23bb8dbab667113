// Copyright 2026 The C2Gen Authors
// SPDX-License-Identifier: Apache-2.0
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

#pragma once

#include <cmath>
#include <cstdint>

#include "c2gen/model.hpp"

namespace c2gen::nn {

struct AdamState {
  ModelParams m;
  ModelParams v;
  std::uint64_t step = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  static AdamState for_params(const ModelParams& p) {
    AdamState s;
    s.m = p.zeros_like();
    s.v = p.zeros_like();
    return s;
  }
};

/// One bias-corrected Adam update, in place.
inline void adam_step(ModelParams& params, AdamState& state, const Gradient& grad, double lr) {
  if (!(lr > 0.0)) throw Error("adam_step: learning rate must be positive");
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);
  auto tp = params.tensors();
  auto tm = state.m.tensors();
  auto tv = state.v.tensors();
  auto tg = grad.tensors();
  for (std::size_t i = 0; i < kTensorCount; ++i) {
    *tm[i] = state.beta1 * *tm[i] + (1.0 - state.beta1) * *tg[i];
    *tv[i] = state.beta2 * *tv[i] + (1.0 - state.beta2) * tg[i]->cwiseProduct(*tg[i]);
    tp[i]->array() -=
        lr * (tm[i]->array() / c1) / ((tv[i]->array() / c2).sqrt() + state.eps);
  }
}

}  // namespace c2gen::nn
