#include <doctest.h>

#include <cmath>

#include "helpers.hpp"

using namespace omnifd;
using omnifd::testing::grad_check;
using omnifd::testing::random_tensor;

namespace {
Value scalarize(const Value& v, const Tensor& weights) {
  // reduce any tensor to a scalar through fixed random weights so the
  // gradient exercises every entry
  return ops::sum_all(ops::mul(v, ops::constant(weights)));
}
}  // namespace

TEST_CASE("elementwise and matmul ops match finite differences") {
  Rng rng(7);
  Value a = Value::leaf(random_tensor({3, 4}, rng), true);
  Value b = Value::leaf(random_tensor({3, 4}, rng), true);
  Value m = Value::leaf(random_tensor({4, 5}, rng), true);
  Tensor w34 = random_tensor({3, 4}, rng);
  Tensor w35 = random_tensor({3, 5}, rng);
  Tensor w33 = random_tensor({3, 3}, rng);

  CHECK(grad_check([&] { return scalarize(ops::add(a, b), w34); }, a) < 1e-6);
  CHECK(grad_check([&] { return scalarize(ops::sub(a, b), w34); }, b) < 1e-6);
  CHECK(grad_check([&] { return scalarize(ops::mul(a, b), w34); }, a) < 1e-6);
  CHECK(grad_check([&] { return scalarize(ops::mul_scalar(a, -2.5), w34); }, a) < 1e-6);
  CHECK(grad_check([&] { return scalarize(ops::matmul(a, m), w35); }, a) < 1e-6);
  CHECK(grad_check([&] { return scalarize(ops::matmul(a, m), w35); }, m) < 1e-6);
  CHECK(grad_check([&] { return scalarize(ops::matmul_nt(a, b), w33); }, a) < 1e-6);
  CHECK(grad_check([&] { return scalarize(ops::matmul_nt(a, b), w33); }, b) < 1e-6);
}

TEST_CASE("row/col structure ops match finite differences") {
  Rng rng(11);
  Value x = Value::leaf(random_tensor({4, 6}, rng), true);
  Value table = Value::leaf(random_tensor({3, 6}, rng), true);
  Tensor w26 = random_tensor({2, 6}, rng);
  Tensor w43 = random_tensor({4, 3}, rng);
  Tensor w46 = random_tensor({4, 6}, rng);
  Tensor w56 = random_tensor({5, 6}, rng);
  Tensor w412 = random_tensor({4, 12}, rng);

  CHECK(grad_check([&] { return scalarize(ops::slice_rows(x, 1, 3), w26); }, x) < 1e-6);
  CHECK(grad_check([&] { return scalarize(ops::slice_cols(x, 2, 5), w43); }, x) < 1e-6);
  CHECK(grad_check([&] { return scalarize(ops::concat_rows({ops::slice_rows(x, 0, 2), ops::slice_rows(x, 1, 4)}), w56); }, x) < 1e-6);
  CHECK(grad_check([&] { return scalarize(ops::concat_cols({x, x}), w412); }, x) < 1e-6);
  CHECK(grad_check([&] { return scalarize(ops::gather_rows(x, {2, 0, 2, 1, 3}), w56); }, x) < 1e-6);
  CHECK(grad_check([&] { return scalarize(ops::add_gathered(x, table, {1, 0, 2, 1}), w46); }, x) < 1e-6);
  CHECK(grad_check([&] { return scalarize(ops::add_gathered(x, table, {1, 0, 2, 1}), w46); }, table) < 1e-6);
  Tensor w212 = random_tensor({2, 12}, rng);
  CHECK(grad_check([&] { return scalarize(ops::reshape(x, {2, 12}), w212); }, x) < 1e-5);
}

TEST_CASE("nonlinearities match finite differences") {
  Rng rng(13);
  Value x = Value::leaf(random_tensor({3, 5}, rng), true);
  Tensor w = random_tensor({3, 5}, rng);
  CHECK(grad_check([&] { return scalarize(ops::softmax_rows(x), w); }, x) < 1e-6);
  CHECK(grad_check([&] { return scalarize(ops::gelu(x), w); }, x) < 1e-6);
  CHECK(grad_check([&] { return scalarize(ops::sigmoid(x), w); }, x) < 1e-6);
  CHECK(grad_check([&] { return scalarize(ops::softplus(x), w); }, x) < 1e-6);
}

TEST_CASE("layer norm matches finite differences") {
  Rng rng(17);
  Value x = Value::leaf(random_tensor({4, 6}, rng), true);
  Value gamma = Value::leaf(random_tensor({1, 6}, rng, 0.5), true);
  Value beta = Value::leaf(random_tensor({1, 6}, rng, 0.5), true);
  Tensor w = random_tensor({4, 6}, rng);
  auto f = [&] { return scalarize(ops::layer_norm(x, gamma, beta), w); };
  CHECK(grad_check(f, x) < 1e-5);
  CHECK(grad_check(f, gamma) < 1e-6);
  CHECK(grad_check(f, beta) < 1e-6);
}

TEST_CASE("reductions match finite differences") {
  Rng rng(19);
  Value x = Value::leaf(random_tensor({6, 4}, rng), true);
  Tensor w14 = random_tensor({1, 4}, rng);
  Tensor w24 = random_tensor({2, 4}, rng);
  CHECK(grad_check([&] { return scalarize(ops::mean_rows(x), w14); }, x) < 1e-6);
  CHECK(grad_check([&] { return ops::mean_all(x); }, x) < 1e-6);
  CHECK(grad_check([&] { return ops::sum_all(x); }, x) < 1e-6);
  CHECK(grad_check([&] { return scalarize(ops::group_mean_rows(x, 3), w24); }, x) < 1e-6);
}

TEST_CASE("conv1d and bilinear resize match finite differences") {
  Rng rng(23);
  Value x = Value::leaf(random_tensor({5, 3}, rng), true);
  Value w = Value::leaf(random_tensor({2, 3, 3}, rng), true);
  Value b = Value::leaf(random_tensor({1, 2}, rng), true);
  Tensor wout = random_tensor({5, 2}, rng);
  auto f = [&] { return scalarize(ops::conv1d_k3(x, w, b), wout); };
  CHECK(grad_check(f, x) < 1e-6);
  CHECK(grad_check(f, w) < 1e-6);
  CHECK(grad_check(f, b) < 1e-6);

  Value grid = Value::leaf(random_tensor({6, 2}, rng), true);  // 2x3 grid, 2 channels
  Tensor wres = random_tensor({20, 2}, rng);                   // 4x5 output grid
  CHECK(grad_check([&] { return scalarize(ops::bilinear_resize(grid, 2, 3, 4, 5), wres); }, grid) < 1e-6);
}

TEST_CASE("attention ops match finite differences") {
  Rng rng(29);
  Value q = Value::leaf(random_tensor({3, 4}, rng), true);
  Value k = Value::leaf(random_tensor({5, 4}, rng), true);
  Value v = Value::leaf(random_tensor({5, 4}, rng), true);
  Tensor w = random_tensor({3, 4}, rng);
  auto f = [&] { return scalarize(ops::attention(q, k, v, 0.5), w); };
  CHECK(grad_check(f, q) < 1e-6);
  CHECK(grad_check(f, k) < 1e-6);
  CHECK(grad_check(f, v) < 1e-6);

  Value qs = Value::leaf(random_tensor({6, 4}, rng), true);
  Value ks = Value::leaf(random_tensor({6, 4}, rng), true);
  Value vs = Value::leaf(random_tensor({6, 4}, rng), true);
  Tensor ws = random_tensor({6, 4}, rng);
  auto fw = [&] { return scalarize(ops::window_attention(qs, ks, vs, 3, 0.5), ws); };
  CHECK(grad_check(fw, qs) < 1e-6);
  CHECK(grad_check(fw, ks) < 1e-6);
  CHECK(grad_check(fw, vs) < 1e-6);
}

TEST_CASE("attention probabilities are row-normalized") {
  Rng rng(31);
  Value q = Value::leaf(random_tensor({4, 6}, rng));
  Value k = Value::leaf(random_tensor({7, 6}, rng));
  Value v = Value::leaf(random_tensor({7, 6}, rng));
  Tensor probs;
  ops::attention(q, k, v, 0.3, &probs);
  for (long r = 0; r < probs.rows(); ++r) {
    double s = 0;
    for (long c = 0; c < probs.cols(); ++c) {
      s += probs[r * probs.cols() + c];
      CHECK(probs[r * probs.cols() + c] >= 0.0);
    }
    CHECK(s == doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("loss ops match finite differences") {
  Rng rng(37);
  Value z = Value::leaf(random_tensor({4, 3}, rng), true);
  Tensor targets({4, 3});
  for (long i = 0; i < targets.numel(); ++i) targets[i] = rng.bernoulli(0.5) ? 1.0 : 0.0;
  Tensor w = random_tensor({4, 3}, rng);
  CHECK(grad_check([&] { return scalarize(ops::bce_with_logits(z, targets), w); }, z) < 1e-6);
  CHECK(grad_check([&] { return scalarize(ops::focal_bce_logits(z, targets, 0.25, 2.0), w); }, z) < 1e-6);

  Value s_reg = Value::leaf(random_tensor({5, 2}, rng, 0.4), true);
  for (long i = 0; i < 10; ++i) s_reg.mutable_val()[i] = std::fabs(s_reg.val()[i]) + 0.05;
  std::vector<long> pos = {1, 3};
  std::vector<std::pair<double, double>> gts = {{0.4, 2.3}, {2.8, 4.6}};
  Tensor wp = random_tensor({2, 1}, rng);
  CHECK(grad_check([&] { return scalarize(ops::diou_1d(s_reg, pos, gts), wp); }, s_reg) < 1e-5);
}

TEST_CASE("backward accumulates into shared leaves once per path") {
  // y = a*a contributes twice to da
  Value a = Value::leaf(Tensor::scalar(3.0), true);
  GradMap sink;
  backward(ops::mul(a, a), sink);
  const Tensor* g = sink.find(a.node());
  REQUIRE(g != nullptr);
  CHECK((*g)[0] == doctest::Approx(6.0));
}

TEST_CASE("no-grad scope skips graph construction") {
  Value a = Value::leaf(Tensor::scalar(2.0), true);
  {
    NoGradGuard guard;
    Value y = ops::mul(a, a);
    CHECK_FALSE(y.needs_grad());
  }
  Value y = ops::mul(a, a);
  CHECK(y.needs_grad());
}
