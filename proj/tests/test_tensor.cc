// tests/test_tensor.cc

#include <cmath>

#include "doctest.h"
#include "reprogsv/adam.h"
#include "reprogsv/gradcheck.h"
#include "reprogsv/tensor.h"
#include "test_support.h"

using namespace reprogsv;

namespace {

std::vector<double> to_vec(const Tensor& t) {
  return {t.data().begin(), t.data().end()};
}

Tensor sum_of_squares(const Tensor& x) {
  // sum(x*x) = mean(x*x) * numel
  return mul(mean_all(mul(x, x)), Tensor::scalar(static_cast<double>(x.numel())));
}

}  // namespace

TEST_CASE("forward values of basic ops") {
  Tensor a = Tensor::from_data({1, 2}, {2});
  Tensor b = Tensor::from_data({3, 4}, {2});
  CHECK(to_vec(add(a, b)) == std::vector<double>{4, 6});

  Tensor r = relu(Tensor::from_data({-1, 0, 2}, {3}));
  CHECK(to_vec(r) == std::vector<double>{0, 0, 2});

  Tensor ones23 = Tensor::full({2, 3}, 1.0);
  Tensor ones31 = Tensor::full({3, 1}, 1.0);
  Tensor mm = matmul(ones23, ones31);
  CHECK(mm.shape() == std::vector<int64_t>{2, 1});
  CHECK(to_vec(mm) == std::vector<double>{3, 3});
}

TEST_CASE("shape mismatch errors name the op and shapes") {
  Tensor a = Tensor::from_data({1, 2}, {2});
  Tensor b = Tensor::from_data({1, 2, 3}, {3});
  CHECK_THROWS_WITH_AS(add(a, b), doctest::Contains("add"), Error);
  CHECK_THROWS_WITH_AS(matmul(Tensor::full({2, 3}, 1.0), Tensor::full({2, 3}, 1.0)),
                       doctest::Contains("[2 x 3]"), Error);
  CHECK_THROWS_AS(conv1d(Tensor::full({2, 3}, 1.0), Tensor::full({1, 3, 5}, 1.0)), Error);
  CHECK_THROWS_AS(slice(Tensor::full({4}, 1.0), 2, 5), Error);
  CHECK_THROWS_AS(softmax_cross_entropy(Tensor::full({3}, 0.0), 5), Error);
}

TEST_CASE("backward populates leaf gradients") {
  Tensor x = Tensor::from_data({1, 2, 3}, {3}, /*requires_grad=*/true);
  Tape tape;
  TapeScope scope(&tape);
  Tensor loss = sum_of_squares(x);
  backward(loss);
  auto g = x.grad();
  CHECK(g[0] == doctest::Approx(2.0));
  CHECK(g[1] == doctest::Approx(4.0));
  CHECK(g[2] == doctest::Approx(6.0));
}

TEST_CASE("backward on a detached loss is an error") {
  Tensor c = Tensor::scalar(5.0);
  CHECK_THROWS_WITH_AS(backward(c), doctest::Contains("detached"), Error);

  // Also detached when produced with no active tape.
  Tensor x = Tensor::from_data({1, 2}, {2}, true);
  Tensor loss = mean_all(mul(x, x));
  CHECK_THROWS_AS(backward(loss), Error);
}

TEST_CASE("backward requires a scalar loss") {
  Tensor x = Tensor::from_data({1, 2}, {2}, true);
  Tape tape;
  TapeScope scope(&tape);
  Tensor y = mul(x, x);
  CHECK_THROWS_WITH_AS(backward(y), doctest::Contains("scalar"), Error);
}

TEST_CASE("gradients accumulate until zeroed") {
  Tensor x = Tensor::from_data({1.5, -2.0}, {2}, true);
  Tape tape;
  TapeScope scope(&tape);
  Tensor loss = sum_of_squares(x);
  backward(loss);
  std::vector<double> once = {x.grad().begin(), x.grad().end()};
  backward(loss);
  auto twice = x.grad();
  for (size_t i = 0; i < once.size(); ++i) {
    CHECK(twice[i] == doctest::Approx(2.0 * once[i]));
  }
  x.zero_grad();
  for (double v : x.grad()) CHECK(v == 0.0);
}

TEST_CASE("forward with requires_grad=false is bit-identical to the taped path") {
  Rng rng(99);
  Tensor x = Tensor::randn({6, 5}, rng);
  Tensor w = Tensor::randn({5, 4}, rng);

  Tensor plain = matmul(relu(x), w);

  Tensor xg = x.detach();
  xg.set_requires_grad(true);
  Tape tape;
  TapeScope scope(&tape);
  Tensor taped = matmul(relu(xg), w);
  CHECK(tape.size() == 2);
  REQUIRE(plain.numel() == taped.numel());
  for (int64_t i = 0; i < plain.numel(); ++i) {
    CHECK(plain.data()[i] == taped.data()[i]);  // exact
  }
}

TEST_CASE("tape replay is deterministic") {
  auto run = [](uint64_t seed) {
    Rng rng(seed);
    Tensor x = Tensor::randn({12}, rng, 1.0, true);
    Tape tape;
    TapeScope scope(&tape);
    Tensor h = relu(slice(x, 0, 12));
    Tensor loss = mean_all(mul(h, exp(mul(h, Tensor::scalar(0.5)))));
    backward(loss);
    return std::vector<double>{x.grad().begin(), x.grad().end()};
  };
  auto g1 = run(1234);
  auto g2 = run(1234);
  CHECK(g1 == g2);  // bitwise
}

TEST_CASE("backward through a cleared tape is rejected") {
  Tensor x = Tensor::from_data({1, 2}, {2}, true);
  Tape tape;
  TapeScope scope(&tape);
  Tensor loss = mean_all(mul(x, x));
  tape.clear();
  CHECK_THROWS_AS(backward(loss), Error);
}

TEST_CASE("adam: zero gradient leaves the parameter unchanged") {
  Tensor p = Tensor::from_data({0.7}, {1}, true);
  p.zero_grad();
  AdamState st;
  st.learning_rate = 1e-3;
  st.weight_decay = 0.0;
  std::vector<Tensor> params{p};
  adam_step(params, st);
  CHECK(p.value() == doctest::Approx(0.7));
}

TEST_CASE("adam: first step moves a unit-gradient scalar by about lr") {
  // Hand evaluation of the update at t=1 with defaults: m_hat = g, v_hat = g^2,
  // delta = lr * 1 / (1 + eps).
  Tensor p = Tensor::from_data({2.0}, {1}, true);
  p.mutable_grad()[0] = 1.0;
  AdamState st;
  st.learning_rate = 1e-3;
  std::vector<Tensor> params{p};
  adam_step(params, st);
  double delta = 2.0 - p.value();
  CHECK(delta == doctest::Approx(1e-3).epsilon(1e-6));
  CHECK(st.step == 1);
}

TEST_CASE("adam: weight decay alone shrinks the parameter") {
  Tensor p = Tensor::from_data({1.0}, {1}, true);
  p.zero_grad();
  AdamState st;
  st.learning_rate = 1e-3;
  st.weight_decay = 1e-4;
  std::vector<Tensor> params{p};
  adam_step(params, st);
  CHECK(p.value() < 1.0);
}

TEST_CASE("adam: missing gradient is an error naming the parameter") {
  Tensor p = Tensor::from_data({1.0}, {1}, true);
  p.set_name("head.projection");
  AdamState st;
  std::vector<Tensor> params{p};
  CHECK_THROWS_WITH_AS(adam_step(params, st), doctest::Contains("head.projection"), Error);
}

TEST_CASE("check_gradients: quadratic is near-exact under central differences") {
  Tensor x = Tensor::from_data({1, 2}, {2});
  double err = check_gradients([](const Tensor& t) { return sum_of_squares(t); }, x, 1e-5);
  CHECK(err < 1e-6);
}

TEST_CASE("check_gradients: linear f matches to machine precision") {
  Tensor w = Tensor::from_data({0.3, -1.2, 2.5}, {3});
  Tensor x = Tensor::from_data({0.1, 0.2, -0.4}, {3});
  double err = check_gradients(
      [&](const Tensor& t) { return mean_all(mul(t, w)); }, x, 1e-5);
  CHECK(err < 1e-9);
}

TEST_CASE("check_gradients: relu kink is excluded via the exclusion list") {
  Tensor x = Tensor::from_data({0.0, 1.0, -1.0}, {3});
  std::vector<int64_t> exclude{0};
  double err = check_gradients(
      [](const Tensor& t) { return mean_all(relu(t)); }, x, 1e-5, exclude);
  CHECK(err < 1e-8);
}

TEST_CASE("check_gradients: non-finite f is an error") {
  Tensor x = Tensor::from_data({1.0}, {1});
  CHECK_THROWS_AS(check_gradients(
                      [](const Tensor& t) {
                        return mul(t, Tensor::scalar(std::numeric_limits<double>::infinity()));
                      },
                      x, 1e-5),
                  Error);
}

TEST_CASE("every op passes finite-difference checks on random inputs") {
  auto results = reprogsv::testing::run_op_gradchecks(/*seed=*/42, /*instances=*/20);
  for (const auto& r : results) {
    INFO("op: ", r.op);
    CHECK(r.max_rel_error < 1e-4);
  }
}

TEST_CASE("frozen inputs receive no gradient buffers") {
  Tensor x = Tensor::from_data({1, 2, 3}, {3}, true);
  Tensor w = Tensor::from_data({2, 2, 2}, {3}, false);  // frozen
  Tape tape;
  TapeScope scope(&tape);
  Tensor loss = mean_all(mul(x, w));
  backward(loss);
  CHECK(x.has_grad());
  CHECK_FALSE(w.has_grad());
}

TEST_CASE("grad probe counts backward accumulations") {
  Tensor x = Tensor::from_data({1, 2}, {2}, true);
  int touches = 0;
  x.set_grad_probe(&touches);
  Tape tape;
  TapeScope scope(&tape);
  Tensor loss = mean_all(mul(x, x));
  backward(loss);
  CHECK(touches > 0);
}

TEST_CASE("empty tensors flow through concat and slice") {
  Tensor empty = Tensor::zeros({0});
  Tensor x = Tensor::from_data({1, 2, 3}, {3});
  Tensor c = concat({empty, x, empty});
  CHECK(to_vec(c) == std::vector<double>{1, 2, 3});
  Tensor s = slice(x, 3, 0);
  CHECK(s.numel() == 0);
}
