// core/include/reprogsv/gradcheck.h

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

#ifndef REPROGSV_GRADCHECK_H_
#define REPROGSV_GRADCHECK_H_

#include <functional>
#include <span>

#include "reprogsv/tensor.h"

namespace reprogsv {

// Compares reverse-mode gradients of a scalar function against central
// finite differences. Returns the maximum over coordinates of
//   |analytic - numeric| / (|analytic| + |numeric| + 1e-12).
//
// `exclude` lists coordinates to skip; use it for inputs sitting exactly on
// a kink (relu/sqrt at 0), where finite differences are unreliable.
double check_gradients(const std::function<Tensor(const Tensor&)>& f,
                       const Tensor& point, double eps,
                       std::span<const int64_t> exclude = {});

}  // namespace reprogsv

#endif  // REPROGSV_GRADCHECK_H_
