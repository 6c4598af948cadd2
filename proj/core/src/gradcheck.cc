// core/src/gradcheck.cc

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

#include "reprogsv/gradcheck.h"

#include <cmath>
#include <unordered_set>

namespace reprogsv {

double check_gradients(const std::function<Tensor(const Tensor&)>& f,
                       const Tensor& point, double eps,
                       std::span<const int64_t> exclude) {
  if (!(eps > 0.0)) throw Error("check_gradients: eps must be positive");

  // Analytic side: fresh tape, fresh leaf.
  Tensor x = point.detach();
  x.set_requires_grad(true);
  std::vector<double> analytic(static_cast<size_t>(x.numel()), 0.0);
  {
    Tape tape;
    TapeScope scope(&tape);
    Tensor loss = f(x);
    if (loss.numel() != 1) {
      throw Error("check_gradients: f must be scalar-valued, got shape " +
                  shape_str(loss.shape()));
    }
    if (!std::isfinite(loss.value())) {
      throw Error("check_gradients: f is not finite at the given point");
    }
    backward(loss);
    if (x.has_grad()) {
      auto g = x.grad();
      analytic.assign(g.begin(), g.end());
    }
  }

  std::unordered_set<int64_t> skip(exclude.begin(), exclude.end());

  // Numeric side: value-only evaluations with recording suppressed, so a
  // caller's active tape never sees the probe points.
  TapeScope no_tape(nullptr);
  Tensor probe = point.detach();
  auto vals = probe.mutable_data();
  double max_rel = 0.0;
  for (int64_t i = 0; i < probe.numel(); ++i) {
    if (skip.count(i)) continue;
    double orig = vals[static_cast<size_t>(i)];
    vals[static_cast<size_t>(i)] = orig + eps;
    double fp = f(probe).value();
    vals[static_cast<size_t>(i)] = orig - eps;
    double fm = f(probe).value();
    vals[static_cast<size_t>(i)] = orig;
    if (!std::isfinite(fp) || !std::isfinite(fm)) {
      throw Error("check_gradients: f is not finite near coordinate " + std::to_string(i));
    }
    double numeric = (fp - fm) / (2.0 * eps);
    double a = analytic[static_cast<size_t>(i)];
    double rel = std::abs(a - numeric) / (std::abs(a) + std::abs(numeric) + 1e-12);
    if (rel > max_rel) max_rel = rel;
  }
  return max_rel;
}

}  // namespace reprogsv
