// core/src/adam.cc

// Copyright (c) 2026 The reprogsv Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "reprogsv/adam.h"

#include <cmath>

namespace reprogsv {

void adam_step(std::span<Tensor> params, AdamState& state) {
  for (auto& p : params) {
    if (!p.has_grad()) {
      throw Error("adam_step: parameter '" +
                  (p.name().empty() ? std::string("<unnamed>") : p.name()) +
                  "' has no gradient");
    }
  }
  state.step += 1;
  double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (auto& p : params) {
    auto data = p.mutable_data();
    auto grad = p.grad();
    auto& mom = state.moments[p.impl_.get()];
    if (mom.m.size() != data.size()) {
      mom.m.assign(data.size(), 0.0);
      mom.v.assign(data.size(), 0.0);
    }
    for (size_t i = 0; i < data.size(); ++i) {
      double g = grad[i] + state.weight_decay * data[i];
      mom.m[i] = state.beta1 * mom.m[i] + (1.0 - state.beta1) * g;
      mom.v[i] = state.beta2 * mom.v[i] + (1.0 - state.beta2) * g * g;
      double mhat = mom.m[i] / bc1;
      double vhat = mom.v[i] / bc2;
      data[i] -= state.learning_rate * mhat / (std::sqrt(vhat) + state.epsilon);
    }
  }
}

}  // namespace reprogsv
