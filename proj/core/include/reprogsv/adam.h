// core/include/reprogsv/adam.h

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

#ifndef REPROGSV_ADAM_H_
#define REPROGSV_ADAM_H_

#include <cstdint>
#include <unordered_map>
#include <vector>

#include "reprogsv/tensor.h"

namespace reprogsv {

// Adam with classic L2-coupled weight decay: the decay term is added to the
// gradient before the moment updates.
struct AdamState {
  double learning_rate = 1e-3;
  double weight_decay = 0.0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  int64_t step = 0;

  struct Moments {
    std::vector<double> m;
    std::vector<double> v;
  };
  std::unordered_map<const void*, Moments> moments;
};

// One update over all params. Every param must have a populated gradient.
void adam_step(std::span<Tensor> params, AdamState& state);

}  // namespace reprogsv

#endif  // REPROGSV_ADAM_H_
