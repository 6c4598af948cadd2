// core/src/tensor.cc

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

#include "reprogsv/tensor.h"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace reprogsv {

struct TensorImpl {
  std::vector<int64_t> shape;
  std::vector<double> data;
  std::vector<double> grad;
  bool has_grad_buf = false;  // distinguishes "absent" from zero-length buffers
  bool requires_grad = false;
  bool is_leaf = true;
  Tape* tape = nullptr;
  int64_t tape_gen = -1;
  int64_t node_index = -1;
  std::string name;
  int* grad_probe = nullptr;

  int64_t numel() const {
    int64_t n = 1;
    for (int64_t d : shape) n *= d;
    return n;
  }
};

std::string shape_str(const std::vector<int64_t>& shape) {
  std::ostringstream os;
  os << "[";
  for (size_t i = 0; i < shape.size(); ++i) {
    if (i) os << " x ";
    os << shape[i];
  }
  os << "]";
  return os.str();
}

namespace {

thread_local Tape* g_active_tape = nullptr;

std::shared_ptr<TensorImpl> make_impl(std::vector<double> data,
                                      std::vector<int64_t> shape) {
  auto impl = std::make_shared<TensorImpl>();
  impl->shape = std::move(shape);
  impl->data = std::move(data);
  int64_t n = impl->numel();
  if (static_cast<int64_t>(impl->data.size()) != n) {
    throw Error("tensor: data length " + std::to_string(impl->data.size()) +
                " does not match shape " + shape_str(impl->shape));
  }
  for (int64_t d : impl->shape) {
    if (d < 0) throw Error("tensor: negative dimension in " + shape_str(impl->shape));
  }
  return impl;
}

}  // namespace

Tape* active_tape() { return g_active_tape; }

Tape::Tape() = default;
Tape::~Tape() = default;

void Tape::clear() {
  nodes_.clear();
  ++generation_;
}

TapeScope::TapeScope(Tape* tape) : prev_(g_active_tape) { g_active_tape = tape; }
TapeScope::~TapeScope() { g_active_tape = prev_; }

// ---- Tensor ----

Tensor Tensor::zeros(std::vector<int64_t> shape, bool requires_grad) {
  int64_t n = 1;
  for (int64_t d : shape) n *= d;
  Tensor t(make_impl(std::vector<double>(static_cast<size_t>(n), 0.0), std::move(shape)));
  t.impl_->requires_grad = requires_grad;
  return t;
}

Tensor Tensor::full(std::vector<int64_t> shape, double value) {
  int64_t n = 1;
  for (int64_t d : shape) n *= d;
  return Tensor(make_impl(std::vector<double>(static_cast<size_t>(n), value),
                          std::move(shape)));
}

Tensor Tensor::from_data(std::vector<double> data, std::vector<int64_t> shape,
                         bool requires_grad) {
  Tensor t(make_impl(std::move(data), std::move(shape)));
  t.impl_->requires_grad = requires_grad;
  return t;
}

Tensor Tensor::scalar(double value) {
  return Tensor(make_impl({value}, {1}));
}

Tensor Tensor::randn(std::vector<int64_t> shape, Rng& rng, double stddev,
                     bool requires_grad) {
  int64_t n = 1;
  for (int64_t d : shape) n *= d;
  std::vector<double> data(static_cast<size_t>(n));
  for (auto& v : data) v = rng.normal(0.0, stddev);
  Tensor t(make_impl(std::move(data), std::move(shape)));
  t.impl_->requires_grad = requires_grad;
  return t;
}

const std::vector<int64_t>& Tensor::shape() const { return impl_->shape; }
int Tensor::ndim() const { return static_cast<int>(impl_->shape.size()); }
int64_t Tensor::dim(int i) const { return impl_->shape.at(static_cast<size_t>(i)); }
int64_t Tensor::numel() const { return impl_->numel(); }

std::span<const double> Tensor::data() const { return impl_->data; }
std::span<double> Tensor::mutable_data() { return impl_->data; }

double Tensor::value() const {
  if (numel() != 1) {
    throw Error("tensor: value() requires a scalar, got shape " + shape_str(impl_->shape));
  }
  return impl_->data[0];
}

double Tensor::at(int64_t i) const { return impl_->data.at(static_cast<size_t>(i)); }
double Tensor::at(int64_t i, int64_t j) const {
  return impl_->data.at(static_cast<size_t>(i * impl_->shape.at(1) + j));
}

bool Tensor::requires_grad() const { return impl_->requires_grad; }

void Tensor::set_requires_grad(bool v) {
  if (!impl_->is_leaf) {
    throw Error("tensor: set_requires_grad is only valid on leaf tensors");
  }
  impl_->requires_grad = v;
}

bool Tensor::is_leaf() const { return impl_->is_leaf; }

bool Tensor::has_grad() const { return impl_->has_grad_buf; }

std::span<const double> Tensor::grad() const {
  if (!impl_->has_grad_buf) {
    throw Error("tensor: no gradient populated for '" + impl_->name + "'");
  }
  return impl_->grad;
}

std::span<double> Tensor::mutable_grad() {
  ensure_grad();
  return impl_->grad;
}

void Tensor::ensure_grad() {
  if (!impl_->has_grad_buf) {
    impl_->grad.assign(static_cast<size_t>(numel()), 0.0);
    impl_->has_grad_buf = true;
  }
}

void Tensor::zero_grad() {
  impl_->grad.assign(static_cast<size_t>(numel()), 0.0);
  impl_->has_grad_buf = true;
}

Tensor Tensor::detach() const {
  return Tensor(make_impl(impl_->data, impl_->shape));
}

const std::string& Tensor::name() const { return impl_->name; }
void Tensor::set_name(std::string name) { impl_->name = std::move(name); }
void Tensor::set_grad_probe(int* counter) { impl_->grad_probe = counter; }

void zero_grads(std::span<Tensor> tensors) {
  for (auto& t : tensors) t.zero_grad();
}

// ---- recording ----

namespace {

bool wants_tape(std::initializer_list<const Tensor*> inputs) {
  if (!g_active_tape) return false;
  for (const Tensor* t : inputs) {
    if (t->impl_->requires_grad) return true;
  }
  return false;
}

void check_same_tape(const char* op, const Tensor& t) {
  const TensorImpl* im = t.impl_.get();
  if (im->is_leaf) return;
  if (im->tape != g_active_tape || im->tape_gen != g_active_tape->generation()) {
    throw Error(std::string(op) + ": input was produced on a different or cleared tape");
  }
}

void record(const char* op, std::initializer_list<const Tensor*> inputs, Tensor& out,
            std::function<void(const std::vector<double>&, BackwardCtx&)> backward_fn) {
  Tape* tape = g_active_tape;
  TapeNode node;
  node.op = op;
  for (const Tensor* t : inputs) {
    check_same_tape(op, *t);
    node.inputs.push_back(t->impl_);
  }
  out.impl_->requires_grad = true;
  out.impl_->is_leaf = false;
  out.impl_->tape = tape;
  out.impl_->tape_gen = tape->generation();
  out.impl_->node_index = static_cast<int64_t>(tape->nodes_.size());
  node.output = out.impl_;
  node.backward_fn = std::move(backward_fn);
  tape->nodes_.push_back(std::move(node));
}

}  // namespace

std::vector<double>* BackwardCtx::sink(const std::shared_ptr<TensorImpl>& t) {
  TensorImpl* im = t.get();
  if (!im->requires_grad) return nullptr;
  if (im->grad_probe) ++(*im->grad_probe);
  if (im->is_leaf) {
    if (!im->has_grad_buf) {
      im->grad.assign(static_cast<size_t>(im->numel()), 0.0);
      im->has_grad_buf = true;
    }
    return &im->grad;
  }
  auto [it, inserted] = scratch_.try_emplace(im);
  if (inserted) it->second.assign(static_cast<size_t>(im->numel()), 0.0);
  return &it->second;
}

const std::vector<double>* BackwardCtx::grad_of(const TensorImpl* t) const {
  auto it = scratch_.find(t);
  return it == scratch_.end() ? nullptr : &it->second;
}

void backward(const Tensor& loss) {
  TensorImpl* li = loss.impl_.get();
  if (li->numel() != 1) {
    throw Error("backward: loss must be a scalar, got shape " + shape_str(li->shape));
  }
  if (li->is_leaf || li->tape == nullptr) {
    throw Error("backward: loss is detached (no operations recorded on a tape)");
  }
  Tape* tape = li->tape;
  if (li->tape_gen != tape->generation()) {
    throw Error("backward: loss belongs to a cleared tape");
  }
  BackwardCtx ctx;
  ctx.scratch_[li] = {1.0};
  for (int64_t i = li->node_index; i >= 0; --i) {
    TapeNode& node = tape->nodes_[static_cast<size_t>(i)];
    auto it = ctx.scratch_.find(node.output.get());
    if (it == ctx.scratch_.end()) continue;  // not reachable from the loss
    node.backward_fn(it->second, ctx);
  }
}

// ---- elementwise binary ops ----

namespace {

enum class Bcast { kSame, kScalarA, kScalarB, kRowVecA, kRowVecB };

Bcast classify_bcast(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape() == b.shape()) return Bcast::kSame;
  if (b.numel() == 1) return Bcast::kScalarB;
  if (a.numel() == 1) return Bcast::kScalarA;
  if (a.ndim() == 2 && b.ndim() == 1 && a.dim(1) == b.dim(0)) return Bcast::kRowVecB;
  if (b.ndim() == 2 && a.ndim() == 1 && b.dim(1) == a.dim(0)) return Bcast::kRowVecA;
  throw Error(std::string(op) + ": incompatible shapes " + shape_str(a.shape()) +
              " and " + shape_str(b.shape()));
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  Bcast mode = classify_bcast("add", a, b);
  const auto& av = a.impl_->data;
  const auto& bv = b.impl_->data;
  std::vector<double> out;
  std::vector<int64_t> oshape;
  switch (mode) {
    case Bcast::kSame: {
      oshape = a.shape();
      out.resize(av.size());
      for (size_t i = 0; i < av.size(); ++i) out[i] = av[i] + bv[i];
      break;
    }
    case Bcast::kScalarA: {
      oshape = b.shape();
      out.resize(bv.size());
      for (size_t i = 0; i < bv.size(); ++i) out[i] = av[0] + bv[i];
      break;
    }
    case Bcast::kScalarB: {
      oshape = a.shape();
      out.resize(av.size());
      for (size_t i = 0; i < av.size(); ++i) out[i] = av[i] + bv[0];
      break;
    }
    case Bcast::kRowVecB: {
      oshape = a.shape();
      int64_t rows = a.dim(0), cols = a.dim(1);
      out.resize(av.size());
      for (int64_t r = 0; r < rows; ++r)
        for (int64_t c = 0; c < cols; ++c)
          out[static_cast<size_t>(r * cols + c)] = av[static_cast<size_t>(r * cols + c)] + bv[static_cast<size_t>(c)];
      break;
    }
    case Bcast::kRowVecA: {
      oshape = b.shape();
      int64_t rows = b.dim(0), cols = b.dim(1);
      out.resize(bv.size());
      for (int64_t r = 0; r < rows; ++r)
        for (int64_t c = 0; c < cols; ++c)
          out[static_cast<size_t>(r * cols + c)] = av[static_cast<size_t>(c)] + bv[static_cast<size_t>(r * cols + c)];
      break;
    }
  }
  Tensor result = Tensor::from_data(std::move(out), std::move(oshape));
  if (wants_tape({&a, &b})) {
    auto ai = a.impl_, bi = b.impl_;
    record("add", {&a, &b}, result, [ai, bi, mode](const std::vector<double>& g, BackwardCtx& ctx) {
      if (auto* ga = ctx.sink(ai)) {
        switch (mode) {
          case Bcast::kSame:
          case Bcast::kScalarB:
            for (size_t i = 0; i < g.size(); ++i) (*ga)[i] += g[i];
            break;
          case Bcast::kScalarA: {
            double s = 0;
            for (double v : g) s += v;
            (*ga)[0] += s;
            break;
          }
          case Bcast::kRowVecB:
            for (size_t i = 0; i < g.size(); ++i) (*ga)[i] += g[i];
            break;
          case Bcast::kRowVecA: {
            int64_t cols = static_cast<int64_t>(ga->size());
            int64_t rows = static_cast<int64_t>(g.size()) / cols;
            for (int64_t r = 0; r < rows; ++r)
              for (int64_t c = 0; c < cols; ++c)
                (*ga)[static_cast<size_t>(c)] += g[static_cast<size_t>(r * cols + c)];
            break;
          }
        }
      }
      if (auto* gb = ctx.sink(bi)) {
        switch (mode) {
          case Bcast::kSame:
          case Bcast::kScalarA:
            for (size_t i = 0; i < g.size(); ++i) (*gb)[i] += g[i];
            break;
          case Bcast::kScalarB: {
            double s = 0;
            for (double v : g) s += v;
            (*gb)[0] += s;
            break;
          }
          case Bcast::kRowVecA:
            for (size_t i = 0; i < g.size(); ++i) (*gb)[i] += g[i];
            break;
          case Bcast::kRowVecB: {
            int64_t cols = static_cast<int64_t>(gb->size());
            int64_t rows = static_cast<int64_t>(g.size()) / cols;
            for (int64_t r = 0; r < rows; ++r)
              for (int64_t c = 0; c < cols; ++c)
                (*gb)[static_cast<size_t>(c)] += g[static_cast<size_t>(r * cols + c)];
            break;
          }
        }
      }
    });
  }
  return result;
}

Tensor sub(const Tensor& a, const Tensor& b) {
  Bcast mode = classify_bcast("sub", a, b);
  const auto& av = a.impl_->data;
  const auto& bv = b.impl_->data;
  std::vector<double> out;
  std::vector<int64_t> oshape;
  switch (mode) {
    case Bcast::kSame: {
      oshape = a.shape();
      out.resize(av.size());
      for (size_t i = 0; i < av.size(); ++i) out[i] = av[i] - bv[i];
      break;
    }
    case Bcast::kScalarA: {
      oshape = b.shape();
      out.resize(bv.size());
      for (size_t i = 0; i < bv.size(); ++i) out[i] = av[0] - bv[i];
      break;
    }
    case Bcast::kScalarB: {
      oshape = a.shape();
      out.resize(av.size());
      for (size_t i = 0; i < av.size(); ++i) out[i] = av[i] - bv[0];
      break;
    }
    case Bcast::kRowVecB: {
      oshape = a.shape();
      int64_t rows = a.dim(0), cols = a.dim(1);
      out.resize(av.size());
      for (int64_t r = 0; r < rows; ++r)
        for (int64_t c = 0; c < cols; ++c)
          out[static_cast<size_t>(r * cols + c)] = av[static_cast<size_t>(r * cols + c)] - bv[static_cast<size_t>(c)];
      break;
    }
    case Bcast::kRowVecA: {
      oshape = b.shape();
      int64_t rows = b.dim(0), cols = b.dim(1);
      out.resize(bv.size());
      for (int64_t r = 0; r < rows; ++r)
        for (int64_t c = 0; c < cols; ++c)
          out[static_cast<size_t>(r * cols + c)] = av[static_cast<size_t>(c)] - bv[static_cast<size_t>(r * cols + c)];
      break;
    }
  }
  Tensor result = Tensor::from_data(std::move(out), std::move(oshape));
  if (wants_tape({&a, &b})) {
    auto ai = a.impl_, bi = b.impl_;
    record("sub", {&a, &b}, result, [ai, bi, mode](const std::vector<double>& g, BackwardCtx& ctx) {
      if (auto* ga = ctx.sink(ai)) {
        if (mode == Bcast::kScalarA) {
          double s = 0;
          for (double v : g) s += v;
          (*ga)[0] += s;
        } else if (mode == Bcast::kRowVecA) {
          int64_t cols = static_cast<int64_t>(ga->size());
          int64_t rows = static_cast<int64_t>(g.size()) / cols;
          for (int64_t r = 0; r < rows; ++r)
            for (int64_t c = 0; c < cols; ++c)
              (*ga)[static_cast<size_t>(c)] += g[static_cast<size_t>(r * cols + c)];
        } else {
          for (size_t i = 0; i < g.size(); ++i) (*ga)[i] += g[i];
        }
      }
      if (auto* gb = ctx.sink(bi)) {
        if (mode == Bcast::kScalarB) {
          double s = 0;
          for (double v : g) s += v;
          (*gb)[0] -= s;
        } else if (mode == Bcast::kRowVecB) {
          int64_t cols = static_cast<int64_t>(gb->size());
          int64_t rows = static_cast<int64_t>(g.size()) / cols;
          for (int64_t r = 0; r < rows; ++r)
            for (int64_t c = 0; c < cols; ++c)
              (*gb)[static_cast<size_t>(c)] -= g[static_cast<size_t>(r * cols + c)];
        } else {
          for (size_t i = 0; i < g.size(); ++i) (*gb)[i] -= g[i];
        }
      }
    });
  }
  return result;
}

Tensor mul(const Tensor& a, const Tensor& b) {
  Bcast mode = classify_bcast("mul", a, b);
  const auto& av = a.impl_->data;
  const auto& bv = b.impl_->data;
  std::vector<double> out;
  std::vector<int64_t> oshape;
  switch (mode) {
    case Bcast::kSame: {
      oshape = a.shape();
      out.resize(av.size());
      for (size_t i = 0; i < av.size(); ++i) out[i] = av[i] * bv[i];
      break;
    }
    case Bcast::kScalarA: {
      oshape = b.shape();
      out.resize(bv.size());
      for (size_t i = 0; i < bv.size(); ++i) out[i] = av[0] * bv[i];
      break;
    }
    case Bcast::kScalarB: {
      oshape = a.shape();
      out.resize(av.size());
      for (size_t i = 0; i < av.size(); ++i) out[i] = av[i] * bv[0];
      break;
    }
    case Bcast::kRowVecB: {
      oshape = a.shape();
      int64_t rows = a.dim(0), cols = a.dim(1);
      out.resize(av.size());
      for (int64_t r = 0; r < rows; ++r)
        for (int64_t c = 0; c < cols; ++c)
          out[static_cast<size_t>(r * cols + c)] = av[static_cast<size_t>(r * cols + c)] * bv[static_cast<size_t>(c)];
      break;
    }
    case Bcast::kRowVecA: {
      oshape = b.shape();
      int64_t rows = b.dim(0), cols = b.dim(1);
      out.resize(bv.size());
      for (int64_t r = 0; r < rows; ++r)
        for (int64_t c = 0; c < cols; ++c)
          out[static_cast<size_t>(r * cols + c)] = av[static_cast<size_t>(c)] * bv[static_cast<size_t>(r * cols + c)];
      break;
    }
  }
  Tensor result = Tensor::from_data(std::move(out), std::move(oshape));
  if (wants_tape({&a, &b})) {
    auto ai = a.impl_, bi = b.impl_;
    record("mul", {&a, &b}, result, [ai, bi, mode](const std::vector<double>& g, BackwardCtx& ctx) {
      const auto& av = ai->data;
      const auto& bv = bi->data;
      if (auto* ga = ctx.sink(ai)) {
        switch (mode) {
          case Bcast::kSame:
            for (size_t i = 0; i < g.size(); ++i) (*ga)[i] += g[i] * bv[i];
            break;
          case Bcast::kScalarA: {
            double s = 0;
            for (size_t i = 0; i < g.size(); ++i) s += g[i] * bv[i];
            (*ga)[0] += s;
            break;
          }
          case Bcast::kScalarB:
            for (size_t i = 0; i < g.size(); ++i) (*ga)[i] += g[i] * bv[0];
            break;
          case Bcast::kRowVecB: {
            int64_t cols = static_cast<int64_t>(bv.size());
            int64_t rows = static_cast<int64_t>(g.size()) / cols;
            for (int64_t r = 0; r < rows; ++r)
              for (int64_t c = 0; c < cols; ++c)
                (*ga)[static_cast<size_t>(r * cols + c)] += g[static_cast<size_t>(r * cols + c)] * bv[static_cast<size_t>(c)];
            break;
          }
          case Bcast::kRowVecA: {
            int64_t cols = static_cast<int64_t>(av.size());
            int64_t rows = static_cast<int64_t>(g.size()) / cols;
            for (int64_t r = 0; r < rows; ++r)
              for (int64_t c = 0; c < cols; ++c)
                (*ga)[static_cast<size_t>(c)] += g[static_cast<size_t>(r * cols + c)] * bv[static_cast<size_t>(r * cols + c)];
            break;
          }
        }
      }
      if (auto* gb = ctx.sink(bi)) {
        switch (mode) {
          case Bcast::kSame:
            for (size_t i = 0; i < g.size(); ++i) (*gb)[i] += g[i] * av[i];
            break;
          case Bcast::kScalarB: {
            double s = 0;
            for (size_t i = 0; i < g.size(); ++i) s += g[i] * av[i];
            (*gb)[0] += s;
            break;
          }
          case Bcast::kScalarA:
            for (size_t i = 0; i < g.size(); ++i) (*gb)[i] += g[i] * av[0];
            break;
          case Bcast::kRowVecA: {
            int64_t cols = static_cast<int64_t>(av.size());
            int64_t rows = static_cast<int64_t>(g.size()) / cols;
            for (int64_t r = 0; r < rows; ++r)
              for (int64_t c = 0; c < cols; ++c)
                (*gb)[static_cast<size_t>(r * cols + c)] += g[static_cast<size_t>(r * cols + c)] * av[static_cast<size_t>(c)];
            break;
          }
          case Bcast::kRowVecB: {
            int64_t cols = static_cast<int64_t>(bv.size());
            int64_t rows = static_cast<int64_t>(g.size()) / cols;
            for (int64_t r = 0; r < rows; ++r)
              for (int64_t c = 0; c < cols; ++c)
                (*gb)[static_cast<size_t>(c)] += g[static_cast<size_t>(r * cols + c)] * av[static_cast<size_t>(r * cols + c)];
            break;
          }
        }
      }
    });
  }
  return result;
}

// ---- matmul ----

namespace {

// C += A * B, all row-major, no transposes.
void mm_nn(const double* a, const double* b, double* c, int64_t m, int64_t k, int64_t n) {
  for (int64_t i = 0; i < m; ++i) {
    double* ci = c + i * n;
    const double* ai = a + i * k;
    for (int64_t kk = 0; kk < k; ++kk) {
      double av = ai[kk];
      const double* bk = b + kk * n;
      for (int64_t j = 0; j < n; ++j) ci[j] += av * bk[j];
    }
  }
}

// C += A * B^T with A [m x k], B [n x k].
void mm_nt(const double* a, const double* b, double* c, int64_t m, int64_t k, int64_t n) {
  for (int64_t i = 0; i < m; ++i) {
    const double* ai = a + i * k;
    double* ci = c + i * n;
    for (int64_t j = 0; j < n; ++j) {
      const double* bj = b + j * k;
      double acc = 0;
      for (int64_t kk = 0; kk < k; ++kk) acc += ai[kk] * bj[kk];
      ci[j] += acc;
    }
  }
}

// C += A^T * B with A [k x m], B [k x n].
void mm_tn(const double* a, const double* b, double* c, int64_t m, int64_t k, int64_t n) {
  for (int64_t kk = 0; kk < k; ++kk) {
    const double* ak = a + kk * m;
    const double* bk = b + kk * n;
    for (int64_t i = 0; i < m; ++i) {
      double av = ak[i];
      double* ci = c + i * n;
      for (int64_t j = 0; j < n; ++j) ci[j] += av * bk[j];
    }
  }
}

std::vector<double> transpose_copy(const double* a, int64_t rows, int64_t cols) {
  std::vector<double> t(static_cast<size_t>(rows * cols));
  for (int64_t i = 0; i < rows; ++i)
    for (int64_t j = 0; j < cols; ++j)
      t[static_cast<size_t>(j * rows + i)] = a[i * cols + j];
  return t;
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b, bool trans_a, bool trans_b) {
  if (a.ndim() < 1 || a.ndim() > 2 || b.ndim() < 1 || b.ndim() > 2) {
    throw Error("matmul: operands must be 1-D or 2-D, got " + shape_str(a.shape()) +
                " and " + shape_str(b.shape()));
  }
  bool a_vec = a.ndim() == 1;
  bool b_vec = b.ndim() == 1;
  if (a_vec && trans_a) throw Error("matmul: cannot transpose a 1-D lhs");
  if (b_vec && trans_b) throw Error("matmul: cannot transpose a 1-D rhs");

  // Effective 2-D dims: vectors act as [1 x K] on the left, [K x 1] on the right.
  int64_t ar = a_vec ? 1 : a.dim(0), ac = a_vec ? a.dim(0) : a.dim(1);
  int64_t br = b_vec ? b.dim(0) : b.dim(0), bc = b_vec ? 1 : b.dim(1);
  int64_t m = trans_a ? ac : ar;
  int64_t ka = trans_a ? ar : ac;
  int64_t kb = trans_b ? bc : br;
  int64_t n = trans_b ? br : bc;
  if (ka != kb) {
    throw Error("matmul: incompatible shapes " + shape_str(a.shape()) + " and " +
                shape_str(b.shape()) + (trans_a ? " (lhs transposed)" : "") +
                (trans_b ? " (rhs transposed)" : ""));
  }
  int64_t k = ka;

  std::vector<double> out(static_cast<size_t>(m * n), 0.0);
  const double* ap = a.impl_->data.data();
  const double* bp = b.impl_->data.data();
  if (!trans_a && !trans_b) {
    mm_nn(ap, bp, out.data(), m, k, n);
  } else if (!trans_a && trans_b) {
    mm_nt(ap, bp, out.data(), m, k, n);
  } else if (trans_a && !trans_b) {
    mm_tn(ap, bp, out.data(), m, k, n);
  } else {
    auto bt = transpose_copy(bp, br, bc);  // tt: materialize B^T, then A^T * (B^T)
    mm_tn(ap, bt.data(), out.data(), m, k, n);
  }

  std::vector<int64_t> oshape;
  if (a_vec && b_vec) {
    oshape = {1};
  } else if (a_vec) {
    oshape = {n};
  } else if (b_vec) {
    oshape = {m};
  } else {
    oshape = {m, n};
  }
  Tensor result = Tensor::from_data(std::move(out), std::move(oshape));

  if (wants_tape({&a, &b})) {
    auto ai = a.impl_, bi = b.impl_;
    record("matmul", {&a, &b}, result,
           [ai, bi, trans_a, trans_b, m, k, n, ar, ac, br, bc](const std::vector<double>& g,
                                                               BackwardCtx& ctx) {
      const double* ap = ai->data.data();
      const double* bp = bi->data.data();
      // g is the gradient of the effective [m x n] output.
      if (auto* ga = ctx.sink(ai)) {
        if (!trans_a) {
          // dA = g * opb(B)^T
          if (!trans_b) {
            mm_nt(g.data(), bp, ga->data(), m, n, k);
          } else {
            mm_nn(g.data(), bp, ga->data(), m, n, k);
          }
        } else {
          // A was used transposed: dA = opb(B) * g^T, laid out as A's [ar x ac].
          std::vector<double> gt = transpose_copy(g.data(), m, n);  // [n x m]
          if (!trans_b) {
            // B [k x n]: dA[k x m] = B * g^T
            mm_nn(bp, gt.data(), ga->data(), ar, n, ac);
          } else {
            // B [n x k]: dA[k x m] = B^T * g^T
            mm_tn(bp, gt.data(), ga->data(), ar, n, ac);
          }
        }
      }
      if (auto* gb = ctx.sink(bi)) {
        if (!trans_b) {
          // dB = opa(A)^T * g
          if (!trans_a) {
            mm_tn(ap, g.data(), gb->data(), k, m, n);
          } else {
            mm_nn(ap, g.data(), gb->data(), k, m, n);
          }
        } else {
          // B was used transposed: dB[br x bc] = g^T * opa(A)
          if (!trans_a) {
            mm_tn(g.data(), ap, gb->data(), n, m, k);
          } else {
            std::vector<double> at = transpose_copy(ap, ar, ac);  // [ac x ar] = [m x k]
            mm_tn(g.data(), at.data(), gb->data(), n, m, k);
          }
        }
      }
    });
  }
  return result;
}

// ---- conv1d ----

Tensor conv1d(const Tensor& x, const Tensor& w) {
  if (x.ndim() != 2 || w.ndim() != 3) {
    throw Error("conv1d: expected input [T x Cin] and weight [Cout x Cin x K], got " +
                shape_str(x.shape()) + " and " + shape_str(w.shape()));
  }
  int64_t t_in = x.dim(0), cin = x.dim(1);
  int64_t cout = w.dim(0), wcin = w.dim(1), kw = w.dim(2);
  if (cin != wcin) {
    throw Error("conv1d: channel mismatch between input " + shape_str(x.shape()) +
                " and weight " + shape_str(w.shape()));
  }
  if (t_in < kw) {
    throw Error("conv1d: input has " + std::to_string(t_in) +
                " frames, fewer than kernel size " + std::to_string(kw));
  }
  int64_t t_out = t_in - kw + 1;
  std::vector<double> out(static_cast<size_t>(t_out * cout), 0.0);
  const double* xp = x.impl_->data.data();
  const double* wp = w.impl_->data.data();
  for (int64_t co = 0; co < cout; ++co) {
    for (int64_t ci = 0; ci < cin; ++ci) {
      for (int64_t kk = 0; kk < kw; ++kk) {
        double wv = wp[(co * cin + ci) * kw + kk];
        for (int64_t t = 0; t < t_out; ++t) {
          out[static_cast<size_t>(t * cout + co)] += wv * xp[(t + kk) * cin + ci];
        }
      }
    }
  }
  Tensor result = Tensor::from_data(std::move(out), {t_out, cout});
  if (wants_tape({&x, &w})) {
    auto xi = x.impl_, wi = w.impl_;
    record("conv1d", {&x, &w}, result,
           [xi, wi, t_in, cin, cout, kw, t_out](const std::vector<double>& g, BackwardCtx& ctx) {
      const double* xp = xi->data.data();
      const double* wp = wi->data.data();
      if (auto* gx = ctx.sink(xi)) {
        // dX[tau, ci] = sum_{kk, co, t=tau-kk valid} g[t, co] * w[co, ci, kk]
        for (int64_t co = 0; co < cout; ++co) {
          for (int64_t ci = 0; ci < cin; ++ci) {
            for (int64_t kk = 0; kk < kw; ++kk) {
              double wv = wp[(co * cin + ci) * kw + kk];
              for (int64_t t = 0; t < t_out; ++t) {
                (*gx)[static_cast<size_t>((t + kk) * cin + ci)] +=
                    g[static_cast<size_t>(t * cout + co)] * wv;
              }
            }
          }
        }
      }
      if (auto* gw = ctx.sink(wi)) {
        for (int64_t co = 0; co < cout; ++co) {
          for (int64_t ci = 0; ci < cin; ++ci) {
            for (int64_t kk = 0; kk < kw; ++kk) {
              double acc = 0;
              for (int64_t t = 0; t < t_out; ++t) {
                acc += g[static_cast<size_t>(t * cout + co)] * xp[(t + kk) * cin + ci];
              }
              (*gw)[static_cast<size_t>((co * cin + ci) * kw + kk)] += acc;
            }
          }
        }
      }
    });
  }
  return result;
}

// ---- elementwise unary ops ----

Tensor relu(const Tensor& x) {
  const auto& xv = x.impl_->data;
  std::vector<double> out(xv.size());
  for (size_t i = 0; i < xv.size(); ++i) out[i] = xv[i] > 0 ? xv[i] : 0.0;
  Tensor result = Tensor::from_data(std::move(out), x.shape());
  if (wants_tape({&x})) {
    auto xi = x.impl_;
    record("relu", {&x}, result, [xi](const std::vector<double>& g, BackwardCtx& ctx) {
      if (auto* gx = ctx.sink(xi)) {
        for (size_t i = 0; i < g.size(); ++i) {
          if (xi->data[i] > 0) (*gx)[i] += g[i];
        }
      }
    });
  }
  return result;
}

Tensor log(const Tensor& x) {
  const auto& xv = x.impl_->data;
  std::vector<double> out(xv.size());
  for (size_t i = 0; i < xv.size(); ++i) {
    if (!(xv[i] > 0.0)) {
      throw Error("log: input must be strictly positive, got " + std::to_string(xv[i]) +
                  " at index " + std::to_string(i));
    }
    out[i] = std::log(xv[i]);
  }
  Tensor result = Tensor::from_data(std::move(out), x.shape());
  if (wants_tape({&x})) {
    auto xi = x.impl_;
    record("log", {&x}, result, [xi](const std::vector<double>& g, BackwardCtx& ctx) {
      if (auto* gx = ctx.sink(xi)) {
        for (size_t i = 0; i < g.size(); ++i) (*gx)[i] += g[i] / xi->data[i];
      }
    });
  }
  return result;
}

Tensor exp(const Tensor& x) {
  const auto& xv = x.impl_->data;
  std::vector<double> out(xv.size());
  for (size_t i = 0; i < xv.size(); ++i) out[i] = std::exp(xv[i]);
  Tensor result = Tensor::from_data(std::move(out), x.shape());
  if (wants_tape({&x})) {
    auto xi = x.impl_;
    auto oi = result.impl_;
    record("exp", {&x}, result, [xi, oi](const std::vector<double>& g, BackwardCtx& ctx) {
      if (auto* gx = ctx.sink(xi)) {
        for (size_t i = 0; i < g.size(); ++i) (*gx)[i] += g[i] * oi->data[i];
      }
    });
  }
  return result;
}

Tensor power(const Tensor& x, double exponent) {
  const auto& xv = x.impl_->data;
  std::vector<double> out(xv.size());
  for (size_t i = 0; i < xv.size(); ++i) out[i] = std::pow(xv[i], exponent);
  Tensor result = Tensor::from_data(std::move(out), x.shape());
  if (wants_tape({&x})) {
    auto xi = x.impl_;
    record("power", {&x}, result, [xi, exponent](const std::vector<double>& g, BackwardCtx& ctx) {
      if (auto* gx = ctx.sink(xi)) {
        for (size_t i = 0; i < g.size(); ++i) {
          (*gx)[i] += g[i] * exponent * std::pow(xi->data[i], exponent - 1.0);
        }
      }
    });
  }
  return result;
}

Tensor sqrt(const Tensor& x) {
  const auto& xv = x.impl_->data;
  std::vector<double> out(xv.size());
  for (size_t i = 0; i < xv.size(); ++i) {
    if (xv[i] < 0.0) {
      throw Error("sqrt: negative input " + std::to_string(xv[i]) + " at index " +
                  std::to_string(i));
    }
    out[i] = std::sqrt(xv[i]);
  }
  Tensor result = Tensor::from_data(std::move(out), x.shape());
  if (wants_tape({&x})) {
    auto xi = x.impl_;
    auto oi = result.impl_;
    record("sqrt", {&x}, result, [xi, oi](const std::vector<double>& g, BackwardCtx& ctx) {
      if (auto* gx = ctx.sink(xi)) {
        for (size_t i = 0; i < g.size(); ++i) {
          // subgradient 0 at the kink, same convention as relu
          if (oi->data[i] > 0.0) (*gx)[i] += g[i] * 0.5 / oi->data[i];
        }
      }
    });
  }
  return result;
}

// ---- reductions ----

Tensor mean_all(const Tensor& x) {
  int64_t n = x.numel();
  if (n == 0) throw Error("mean_all: empty tensor");
  double s = 0;
  for (double v : x.impl_->data) s += v;
  Tensor result = Tensor::scalar(s / static_cast<double>(n));
  if (wants_tape({&x})) {
    auto xi = x.impl_;
    record("mean_all", {&x}, result, [xi, n](const std::vector<double>& g, BackwardCtx& ctx) {
      if (auto* gx = ctx.sink(xi)) {
        double gi = g[0] / static_cast<double>(n);
        for (auto& v : *gx) v += gi;
      }
    });
  }
  return result;
}

Tensor mean_axis0(const Tensor& x) {
  if (x.ndim() != 2) {
    throw Error("mean_axis0: expected a 2-D tensor, got " + shape_str(x.shape()));
  }
  int64_t rows = x.dim(0), cols = x.dim(1);
  if (rows == 0) throw Error("mean_axis0: zero rows");
  std::vector<double> out(static_cast<size_t>(cols), 0.0);
  const auto& xv = x.impl_->data;
  for (int64_t r = 0; r < rows; ++r)
    for (int64_t c = 0; c < cols; ++c) out[static_cast<size_t>(c)] += xv[static_cast<size_t>(r * cols + c)];
  for (auto& v : out) v /= static_cast<double>(rows);
  Tensor result = Tensor::from_data(std::move(out), {cols});
  if (wants_tape({&x})) {
    auto xi = x.impl_;
    record("mean_axis0", {&x}, result, [xi, rows, cols](const std::vector<double>& g, BackwardCtx& ctx) {
      if (auto* gx = ctx.sink(xi)) {
        for (int64_t r = 0; r < rows; ++r)
          for (int64_t c = 0; c < cols; ++c)
            (*gx)[static_cast<size_t>(r * cols + c)] += g[static_cast<size_t>(c)] / static_cast<double>(rows);
      }
    });
  }
  return result;
}

Tensor variance_axis0(const Tensor& x) {
  if (x.ndim() != 2) {
    throw Error("variance_axis0: expected a 2-D tensor, got " + shape_str(x.shape()));
  }
  int64_t rows = x.dim(0), cols = x.dim(1);
  if (rows == 0) throw Error("variance_axis0: zero rows");
  const auto& xv = x.impl_->data;
  std::vector<double> mean(static_cast<size_t>(cols), 0.0);
  for (int64_t r = 0; r < rows; ++r)
    for (int64_t c = 0; c < cols; ++c) mean[static_cast<size_t>(c)] += xv[static_cast<size_t>(r * cols + c)];
  for (auto& v : mean) v /= static_cast<double>(rows);
  std::vector<double> out(static_cast<size_t>(cols), 0.0);
  for (int64_t r = 0; r < rows; ++r)
    for (int64_t c = 0; c < cols; ++c) {
      double d = xv[static_cast<size_t>(r * cols + c)] - mean[static_cast<size_t>(c)];
      out[static_cast<size_t>(c)] += d * d;
    }
  for (auto& v : out) v /= static_cast<double>(rows);
  Tensor result = Tensor::from_data(std::move(out), {cols});
  if (wants_tape({&x})) {
    auto xi = x.impl_;
    record("variance_axis0", {&x}, result,
           [xi, rows, cols, mean](const std::vector<double>& g, BackwardCtx& ctx) {
      if (auto* gx = ctx.sink(xi)) {
        double inv = 2.0 / static_cast<double>(rows);
        for (int64_t r = 0; r < rows; ++r)
          for (int64_t c = 0; c < cols; ++c) {
            double d = xi->data[static_cast<size_t>(r * cols + c)] - mean[static_cast<size_t>(c)];
            (*gx)[static_cast<size_t>(r * cols + c)] += g[static_cast<size_t>(c)] * inv * d;
          }
      }
    });
  }
  return result;
}

// ---- shape ops ----

Tensor concat(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw Error("concat: no operands");
  int64_t total = 0;
  for (const auto& p : parts) {
    if (p.ndim() != 1) {
      throw Error("concat: expected 1-D operands, got " + shape_str(p.shape()));
    }
    total += p.numel();
  }
  std::vector<double> out;
  out.reserve(static_cast<size_t>(total));
  for (const auto& p : parts) {
    out.insert(out.end(), p.impl_->data.begin(), p.impl_->data.end());
  }
  Tensor result = Tensor::from_data(std::move(out), {total});
  bool taped = false;
  if (g_active_tape) {
    for (const auto& p : parts) {
      if (p.impl_->requires_grad) { taped = true; break; }
    }
  }
  if (taped) {
    std::vector<std::shared_ptr<TensorImpl>> impls;
    impls.reserve(parts.size());
    for (const auto& p : parts) {
      check_same_tape("concat", p);
      impls.push_back(p.impl_);
    }
    record("concat", {}, result, [impls](const std::vector<double>& g, BackwardCtx& ctx) {
      size_t off = 0;
      for (const auto& im : impls) {
        size_t n = im->data.size();
        if (auto* gp = ctx.sink(im)) {
          for (size_t i = 0; i < n; ++i) (*gp)[i] += g[off + i];
        }
        off += n;
      }
    });
    // record() did not see the inputs; attach them for the node structure.
    g_active_tape->nodes_.back().inputs = impls;
  }
  return result;
}

Tensor slice(const Tensor& x, int64_t start, int64_t len) {
  if (x.ndim() != 1) {
    throw Error("slice: expected a 1-D tensor, got " + shape_str(x.shape()));
  }
  int64_t n = x.numel();
  if (start < 0 || len < 0 || start + len > n) {
    throw Error("slice: range [" + std::to_string(start) + ", " +
                std::to_string(start + len) + ") out of bounds for length " +
                std::to_string(n));
  }
  std::vector<double> out(x.impl_->data.begin() + start, x.impl_->data.begin() + start + len);
  Tensor result = Tensor::from_data(std::move(out), {len});
  if (wants_tape({&x})) {
    auto xi = x.impl_;
    record("slice", {&x}, result, [xi, start](const std::vector<double>& g, BackwardCtx& ctx) {
      if (auto* gx = ctx.sink(xi)) {
        for (size_t i = 0; i < g.size(); ++i) (*gx)[static_cast<size_t>(start) + i] += g[i];
      }
    });
  }
  return result;
}

Tensor frame_signal(const Tensor& x, int64_t frame_len, int64_t shift) {
  if (x.ndim() != 1) {
    throw Error("frame_signal: expected a 1-D waveform, got " + shape_str(x.shape()));
  }
  if (frame_len <= 0 || shift <= 0) {
    throw Error("frame_signal: frame_len and shift must be positive");
  }
  int64_t t = x.numel();
  if (t < frame_len) {
    throw Error("frame_signal: waveform of " + std::to_string(t) +
                " samples is shorter than one frame of " + std::to_string(frame_len));
  }
  int64_t frames = (t - frame_len) / shift + 1;
  std::vector<double> out(static_cast<size_t>(frames * frame_len));
  const auto& xv = x.impl_->data;
  for (int64_t f = 0; f < frames; ++f) {
    const double* src = xv.data() + f * shift;
    double* dst = out.data() + f * frame_len;
    std::copy(src, src + frame_len, dst);
  }
  Tensor result = Tensor::from_data(std::move(out), {frames, frame_len});
  if (wants_tape({&x})) {
    auto xi = x.impl_;
    record("frame_signal", {&x}, result,
           [xi, frames, frame_len, shift](const std::vector<double>& g, BackwardCtx& ctx) {
      if (auto* gx = ctx.sink(xi)) {
        for (int64_t f = 0; f < frames; ++f) {
          const double* gsrc = g.data() + f * frame_len;
          double* gdst = gx->data() + f * shift;
          for (int64_t s = 0; s < frame_len; ++s) gdst[s] += gsrc[s];
        }
      }
    });
  }
  return result;
}

// ---- similarity and losses ----

Tensor cosine_similarity(const Tensor& a, const Tensor& b) {
  if (a.ndim() != 1 || b.ndim() != 1 || a.numel() != b.numel() || a.numel() == 0) {
    throw Error("cosine_similarity: expected equal-length 1-D tensors, got " +
                shape_str(a.shape()) + " and " + shape_str(b.shape()));
  }
  const auto& av = a.impl_->data;
  const auto& bv = b.impl_->data;
  double dot = 0, na2 = 0, nb2 = 0;
  for (size_t i = 0; i < av.size(); ++i) {
    dot += av[i] * bv[i];
    na2 += av[i] * av[i];
    nb2 += bv[i] * bv[i];
  }
  if (na2 == 0.0 || nb2 == 0.0) {
    throw Error("cosine_similarity: zero-norm operand");
  }
  double na = std::sqrt(na2), nb = std::sqrt(nb2);
  double val = dot / (na * nb);
  Tensor result = Tensor::scalar(val);
  if (wants_tape({&a, &b})) {
    auto ai = a.impl_, bi = b.impl_;
    record("cosine_similarity", {&a, &b}, result,
           [ai, bi, na, nb, val](const std::vector<double>& g, BackwardCtx& ctx) {
      const auto& av = ai->data;
      const auto& bv = bi->data;
      double g0 = g[0];
      if (auto* ga = ctx.sink(ai)) {
        for (size_t i = 0; i < av.size(); ++i) {
          (*ga)[i] += g0 * (bv[i] / (na * nb) - val * av[i] / (na * na));
        }
      }
      if (auto* gb = ctx.sink(bi)) {
        for (size_t i = 0; i < bv.size(); ++i) {
          (*gb)[i] += g0 * (av[i] / (na * nb) - val * bv[i] / (nb * nb));
        }
      }
    });
  }
  return result;
}

Tensor softmax_rows(const Tensor& x) {
  if (x.ndim() != 2) {
    throw Error("softmax_rows: expected a 2-D tensor, got " + shape_str(x.shape()));
  }
  int64_t rows = x.dim(0), cols = x.dim(1);
  if (cols == 0) throw Error("softmax_rows: zero columns");
  std::vector<double> out(static_cast<size_t>(rows * cols));
  const auto& xv = x.impl_->data;
  for (int64_t r = 0; r < rows; ++r) {
    const double* xr = xv.data() + r * cols;
    double* orow = out.data() + r * cols;
    double mx = xr[0];
    for (int64_t c = 1; c < cols; ++c) mx = std::max(mx, xr[c]);
    double denom = 0;
    for (int64_t c = 0; c < cols; ++c) {
      orow[c] = std::exp(xr[c] - mx);
      denom += orow[c];
    }
    for (int64_t c = 0; c < cols; ++c) orow[c] /= denom;
  }
  Tensor result = Tensor::from_data(std::move(out), {rows, cols});
  if (wants_tape({&x})) {
    auto xi = x.impl_;
    auto oi = result.impl_;
    record("softmax_rows", {&x}, result,
           [xi, oi, rows, cols](const std::vector<double>& g, BackwardCtx& ctx) {
      if (auto* gx = ctx.sink(xi)) {
        for (int64_t r = 0; r < rows; ++r) {
          const double* s = oi->data.data() + r * cols;
          const double* gr = g.data() + r * cols;
          double dot = 0;
          for (int64_t c = 0; c < cols; ++c) dot += gr[c] * s[c];
          double* gxr = gx->data() + r * cols;
          for (int64_t c = 0; c < cols; ++c) gxr[c] += s[c] * (gr[c] - dot);
        }
      }
    });
  }
  return result;
}

Tensor softmax_cross_entropy(const Tensor& logits, int64_t label) {
  if (logits.ndim() != 1 || logits.numel() == 0) {
    throw Error("softmax_cross_entropy: expected a non-empty 1-D logits tensor, got " +
                shape_str(logits.shape()));
  }
  int64_t n = logits.numel();
  if (label < 0 || label >= n) {
    throw Error("softmax_cross_entropy: label " + std::to_string(label) +
                " out of range for " + std::to_string(n) + " classes");
  }
  const auto& zv = logits.impl_->data;
  double mx = zv[0];
  for (int64_t i = 1; i < n; ++i) mx = std::max(mx, zv[static_cast<size_t>(i)]);
  double denom = 0;
  for (int64_t i = 0; i < n; ++i) denom += std::exp(zv[static_cast<size_t>(i)] - mx);
  double loss = mx + std::log(denom) - zv[static_cast<size_t>(label)];
  Tensor result = Tensor::scalar(loss);
  if (wants_tape({&logits})) {
    auto zi = logits.impl_;
    record("softmax_cross_entropy", {&logits}, result,
           [zi, label, mx, denom](const std::vector<double>& g, BackwardCtx& ctx) {
      if (auto* gz = ctx.sink(zi)) {
        double g0 = g[0];
        for (size_t i = 0; i < zi->data.size(); ++i) {
          double p = std::exp(zi->data[i] - mx) / denom;
          (*gz)[i] += g0 * (p - (static_cast<int64_t>(i) == label ? 1.0 : 0.0));
        }
      }
    });
  }
  return result;
}

}  // namespace reprogsv
