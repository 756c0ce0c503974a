#include <catch2/catch_amalgamated.hpp>

#include "oracles.hpp"

#include <evikit/errors.hpp>
#include <evikit/tensor.hpp>

#include <random>

using namespace evikit;
using namespace evikit::nn;

namespace {

// Projects an op result to a scalar through fixed random weights.
Tensor project(const Tensor& out, std::uint64_t seed)
{
  std::mt19937_64 rng(seed);
  return sum(mul(out, scene::random_tensor(rng, out.shape(), -1, 1, 0, false)));
}

void expect_grads(const std::function<Tensor()>& f, const std::vector<NamedParameter>& leaves)
{
  const auto r = oracle::gradcheck(f, leaves);
  INFO("worst tensor " << r.worst_tensor);
  CHECK(r.worst_error < 1e-6);
}

} // namespace

TEST_CASE("shapes and construction")
{
  CHECK(numel({2, 3, 4}) == 24);
  CHECK(to_string({2, 3}) == "[2, 3]");
  CHECK_THROWS_AS(Tensor({2, 2}, {1.0, 2.0}), ValidationError);
  CHECK(Tensor::full({2}, 3.0).data()[1] == 3.0);
  CHECK(Tensor::scalar(4.0).item() == 4.0);
  CHECK_THROWS_AS(Tensor::zeros({2}).item(), ValidationError);
  CHECK_THROWS_AS(add(Tensor::zeros({2}), Tensor::zeros({3})), ValidationError);
  CHECK_THROWS_AS(Tensor::zeros({2}).backward(), ValidationError);
}

TEST_CASE("forward values")
{
  const Tensor a({2}, {1.0, -2.0}), b({2}, {3.0, 0.5});
  CHECK(add(a, b).data()[1] == -1.5);
  CHECK(sub(a, b).data()[0] == -2.0);
  CHECK(mul(a, b).data()[1] == -1.0);
  CHECK(scale(a, 2.0).data()[1] == -4.0);
  CHECK(relu(a).data()[1] == 0.0);
  CHECK(leaky_relu(a, 0.1).data()[1] == Catch::Approx(-0.2));
  CHECK(sigmoid(Tensor({1}, {0.0})).item() == 0.5);
  CHECK(sigmoid(Tensor({1}, {-800.0})).item() >= 0.0);
  CHECK(sigmoid(Tensor({1}, {800.0})).item() == 1.0);
  CHECK(sum(a).item() == -1.0);
  CHECK(mean(a).item() == -0.5);

  const Tensor x({2, 1, 2}, {1, 2, 3, 4});
  CHECK(global_avg_pool(x).data()[1] == 3.5);
  CHECK(mul_channels(x, Tensor({2}, {2, -1})).data()[3] == -4.0);
  const auto c = concat({x, Tensor({1, 1, 2}, {5, 6})});
  CHECK(c.shape() == Shape{3, 1, 2});
  CHECK(c.data()[5] == 6.0);
  CHECK(dense(Tensor({2}, {1, 2}), Tensor({1, 2}, {3, 4}), Tensor({1}, {0.5})).item() == 11.5);
}

TEST_CASE("convolution forward")
{
  // 1x3x3 input, identity-centred 3x3 kernel, padding 1
  const Tensor x({1, 3, 3}, {1, 2, 3, 4, 5, 6, 7, 8, 9});
  std::vector<double> k(9, 0.0);
  k[4] = 1.0;
  const auto same = conv2d(x, Tensor({1, 1, 3, 3}, k), Tensor::zeros({1}), 1, 1);
  CHECK(same.shape() == Shape{1, 3, 3});
  for (int i = 0; i < 9; ++i)
    CHECK(same.data()[i] == x.data()[i]);

  const auto box = conv2d(x, Tensor::full({1, 1, 3, 3}, 1.0), Tensor({1}, {1.0}), 2, 1);
  CHECK(box.shape() == Shape{1, 2, 2});
  CHECK(box.data()[0] == 1.0 + 1 + 2 + 4 + 5);
  CHECK(box.data()[3] == 1.0 + 5 + 6 + 8 + 9);

  const auto up = transposed_conv2d(Tensor({1, 1, 2}, {1, 2}), Tensor::full({1, 1, 2, 2}, 1.0), Tensor::zeros({1}), 2, 0);
  CHECK(up.shape() == Shape{1, 2, 4});
  CHECK(up.data()[0] == 1.0);
  CHECK(up.data()[3] == 2.0);
  CHECK(up.data()[6] == 2.0);

  CHECK_THROWS_AS(conv2d(x, Tensor::zeros({1, 2, 3, 3}), Tensor::zeros({1})), ValidationError);
}

TEST_CASE("gradient checks for every op")
{
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    std::mt19937_64 rng(seed);
    auto a = scene::random_tensor(rng, {2, 3, 4}, -1, 1, 0.05);
    auto b = scene::random_tensor(rng, {2, 3, 4}, -1, 1, 0.05);
    auto w = scene::random_tensor(rng, {2});
    const std::vector<NamedParameter> ab = {{"a", a}, {"b", b}};

    expect_grads([&] { return project(add(a, b), seed); }, ab);
    expect_grads([&] { return project(sub(a, b), seed); }, ab);
    expect_grads([&] { return project(mul(a, b), seed); }, ab);
    expect_grads([&] { return project(scale(a, -1.7), seed); }, {{"a", a}});
    expect_grads([&] { return project(relu(a), seed); }, {{"a", a}});
    expect_grads([&] { return project(leaky_relu(a, 0.1), seed); }, {{"a", a}});
    expect_grads([&] { return project(sigmoid(scale(a, 3.0)), seed); }, {{"a", a}});
    expect_grads([&] { return mul(sum(a), sum(b)); }, ab);
    expect_grads([&] { return mul(mean(a), mean(mul(a, b))); }, ab);
    expect_grads([&] { return project(concat({a, b, a}), seed); }, ab);
    expect_grads([&] { return project(global_avg_pool(mul(a, a)), seed); }, {{"a", a}});
    expect_grads([&] { return project(mul_channels(a, w), seed); }, {{"a", a}, {"w", w}});

    auto v = scene::random_tensor(rng, {5});
    auto dw = scene::random_tensor(rng, {3, 5});
    auto db = scene::random_tensor(rng, {3});
    expect_grads([&] { return project(dense(v, dw, db), seed); }, {{"x", v}, {"w", dw}, {"b", db}});

    auto x = scene::random_tensor(rng, {2, 5, 6});
    auto k = scene::random_tensor(rng, {3, 2, 3, 3});
    auto kb = scene::random_tensor(rng, {3});
    for (int stride : {1, 2})
      for (int pad : {0, 1})
        expect_grads([&] { return project(conv2d(x, k, kb, stride, pad), seed); }, {{"x", x}, {"w", k}, {"b", kb}});
    auto k1 = scene::random_tensor(rng, {3, 2, 1, 1});
    expect_grads([&] { return project(conv2d(x, k1, kb), seed); }, {{"x", x}, {"w", k1}, {"b", kb}});

    auto tk = scene::random_tensor(rng, {2, 3, 2, 2});
    expect_grads([&] { return project(transposed_conv2d(x, tk, kb, 2, 0), seed); }, {{"x", x}, {"w", tk}, {"b", kb}});
    auto tk3 = scene::random_tensor(rng, {2, 3, 3, 3});
    expect_grads([&] { return project(transposed_conv2d(x, tk3, kb, 2, 1), seed); },
                 {{"x", x}, {"w", tk3}, {"b", kb}});

    expect_grads([&] { return charbonnier_loss(a, b); }, ab);
  }
}

TEST_CASE("gradients accumulate over shared uses and reset")
{
  Tensor a({2}, {1.0, 2.0}, true);
  Tensor l = sum(add(mul(a, a), a));
  l.backward();
  CHECK(a.grad()[0] == 3.0);
  CHECK(a.grad()[1] == 5.0);
  a.zero_grad();
  CHECK(a.grad().empty());
  sum(a).backward();
  CHECK(a.grad()[0] == 1.0);

  const Tensor d = a.detach();
  CHECK(!d.requires_grad());
  CHECK(d.data()[1] == 2.0);
}
