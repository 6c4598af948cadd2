// core/include/reprogsv/tensor.h

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

#ifndef REPROGSV_TENSOR_H_
#define REPROGSV_TENSOR_H_

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "reprogsv/rng.h"

namespace reprogsv {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ConfigError : Error {
  using Error::Error;
};
struct IoError : Error {
  using Error::Error;
};

class Tape;
struct TensorImpl;

// Dense row-major double tensor. Copies share storage; ops below record
// backward rules on the active tape when an operand participates in
// differentiation.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(std::vector<int64_t> shape, bool requires_grad = false);
  static Tensor full(std::vector<int64_t> shape, double value);
  static Tensor from_data(std::vector<double> data, std::vector<int64_t> shape,
                          bool requires_grad = false);
  static Tensor scalar(double value);
  static Tensor randn(std::vector<int64_t> shape, Rng& rng, double stddev = 1.0,
                      bool requires_grad = false);

  bool defined() const { return impl_ != nullptr; }
  const std::vector<int64_t>& shape() const;
  int ndim() const;
  int64_t dim(int i) const;
  int64_t numel() const;

  std::span<const double> data() const;
  // Direct mutation is for leaf tensors (parameters, buffers); mutating a
  // tensor that a recorded backward rule still references invalidates it.
  std::span<double> mutable_data();

  double value() const;  // scalar tensors only
  double at(int64_t i) const;
  double at(int64_t i, int64_t j) const;

  bool requires_grad() const;
  void set_requires_grad(bool v);  // leaves only
  bool is_leaf() const;

  bool has_grad() const;
  std::span<const double> grad() const;
  std::span<double> mutable_grad();
  void ensure_grad();  // allocate a zero grad buffer if absent
  void zero_grad();    // allocate if needed, then fill with zeros

  // Constant copy of the values; the result is a fresh leaf with
  // requires_grad=false and no tape history.
  Tensor detach() const;

  const std::string& name() const;
  void set_name(std::string name);

  // Counts backward-pass accumulations into this tensor's gradient.
  // Used to witness that a frozen/black-box model is never back-propagated.
  void set_grad_probe(int* counter);

  std::shared_ptr<TensorImpl> impl_;  // internal; exposed for tape machinery

  explicit Tensor(std::shared_ptr<TensorImpl> impl) : impl_(std::move(impl)) {}
};

// One recorded operation: forward already happened, backward_fn reads the
// output gradient and accumulates into the inputs' gradient sinks.
class BackwardCtx;
struct TapeNode {
  const char* op = nullptr;
  std::vector<std::shared_ptr<TensorImpl>> inputs;
  std::shared_ptr<TensorImpl> output;
  std::function<void(const std::vector<double>&, BackwardCtx&)> backward_fn;
};

// Append-only op record. Nodes are stored in execution order, so topological
// order holds by construction and one reverse scan visits each op once.
class Tape {
 public:
  Tape();
  ~Tape();
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  void clear();  // drops all nodes; derived tensors may no longer be backprop'd
  size_t size() const { return nodes_.size(); }
  int64_t generation() const { return generation_; }

  std::vector<TapeNode> nodes_;

 private:
  int64_t generation_ = 0;
};

// RAII scope selecting the tape that ops record onto. Pass nullptr to
// suppress recording entirely (value-only evaluation).
class TapeScope {
 public:
  explicit TapeScope(Tape* tape);
  ~TapeScope();
  TapeScope(const TapeScope&) = delete;
  TapeScope& operator=(const TapeScope&) = delete;

 private:
  Tape* prev_;
};

Tape* active_tape();

// Per-backward-call gradient routing: leaves accumulate into their persistent
// grad buffer, intermediates into scratch keyed by impl.
class BackwardCtx {
 public:
  // Returns the buffer to accumulate dLoss/dInput into, or nullptr when the
  // input does not participate in differentiation.
  std::vector<double>* sink(const std::shared_ptr<TensorImpl>& t);
  const std::vector<double>* grad_of(const TensorImpl* t) const;

  std::unordered_map<const TensorImpl*, std::vector<double>> scratch_;
};

// dLoss/dLeaf for every requires_grad leaf reachable from `loss`.
// Gradients accumulate across calls until explicitly zeroed.
void backward(const Tensor& loss);

void zero_grads(std::span<Tensor> tensors);

// ---- operation set ----
// Shapes are validated before compute; mismatches throw Error naming the op
// and both shapes. Elementwise binary ops accept equal shapes, a scalar on
// either side, or matrix [R x C] against vector [C] (broadcast over rows).

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);

// out = op_a(a) * op_b(b) with optional transposes; 1-D operands are treated
// as a single row (lhs) or column (rhs) and the result drops that axis.
Tensor matmul(const Tensor& a, const Tensor& b, bool trans_a = false,
              bool trans_b = false);

// x: [T x Cin], w: [Cout x Cin x K]; valid convolution over the first axis,
// output [T-K+1 x Cout].
Tensor conv1d(const Tensor& x, const Tensor& w);

Tensor relu(const Tensor& x);  // subgradient at 0 is 0

Tensor mean_all(const Tensor& x);       // -> [1]
Tensor mean_axis0(const Tensor& x);     // [R x C] -> [C]
Tensor variance_axis0(const Tensor& x); // population variance, [R x C] -> [C]

Tensor concat(const std::vector<Tensor>& parts);          // 1-D
Tensor slice(const Tensor& x, int64_t start, int64_t len); // 1-D

// [T] -> [F x frame_len] with F = floor((T - frame_len)/shift) + 1.
// Trailing samples that do not complete a frame are dropped.
Tensor frame_signal(const Tensor& x, int64_t frame_len, int64_t shift);

Tensor log(const Tensor& x);   // requires strictly positive input
Tensor exp(const Tensor& x);
Tensor power(const Tensor& x, double exponent);
Tensor sqrt(const Tensor& x);  // subgradient at 0 is 0

Tensor cosine_similarity(const Tensor& a, const Tensor& b);  // 1-D -> [1]
Tensor softmax_rows(const Tensor& x);                        // [R x C]
Tensor softmax_cross_entropy(const Tensor& logits, int64_t label);  // 1-D -> [1]

std::string shape_str(const std::vector<int64_t>& shape);

}  // namespace reprogsv

#endif  // REPROGSV_TENSOR_H_
