#include <catch2/catch_amalgamated.hpp>

#include "oracles.hpp"

#include <evikit/errors.hpp>
#include <evikit/nn.hpp>

#include <cmath>
#include <random>

using namespace evikit;
using namespace evikit::nn;

namespace {

Tensor project(const Tensor& out, std::uint64_t seed)
{
  std::mt19937_64 rng(seed);
  return sum(mul(out, scene::random_tensor(rng, out.shape(), -1, 1, 0, false)));
}

} // namespace

TEST_CASE("kaiming init bounds and zero biases")
{
  std::mt19937_64 rng(1);
  Conv2d conv(4, 6, 3, 1, 1, rng);
  const double bound = std::sqrt(6.0 / (1.01 * 36.0));
  double max_abs = 0.0;
  for (double v : conv.weight.data())
    max_abs = std::max(max_abs, std::abs(v));
  CHECK(max_abs <= bound);
  CHECK(max_abs > 0.8 * bound);
  for (double v : conv.bias.data())
    CHECK(v == 0.0);
  CHECK(conv.weight.requires_grad());

  ParameterList params;
  conv.collect("c", params);
  REQUIRE(params.size() == 2);
  CHECK(params[0].name == "c.weight");
  CHECK(params[1].name == "c.bias");
}

TEST_CASE("layer shapes")
{
  std::mt19937_64 rng(2);
  const auto x = scene::random_tensor(rng, {4, 8, 6}, -1, 1, 0, false);
  CHECK(Conv2d(4, 5, 3, 2, 1, rng)(x).shape() == Shape{5, 4, 3});
  CHECK(TransposedConv2d(4, 3, 2, 2, rng)(x).shape() == Shape{3, 16, 12});
  CHECK(ResidualBlock(4, rng)(x).shape() == x.shape());
  CHECK(ChannelSqueeze(4, 2, rng)(x).shape() == Shape{4});
  CHECK(Egaca(4, 2, false, rng)(x, x).shape() == x.shape());
  const auto out = EvrBlock(4, 2, rng)(x, Tensor::zeros({4, 8, 6}));
  CHECK(out.features.shape() == x.shape());
  CHECK(out.hidden.shape() == x.shape());

  CHECK_THROWS_AS(ChannelSqueeze(6, 4, rng), ValidationError);
  CHECK_THROWS_AS(Egaca(4, 2, false, rng)(x, Tensor::zeros({4, 8, 5})), ValidationError);
  CHECK_THROWS_AS(EvrBlock(4, 1, rng)(x, Tensor::zeros({3, 8, 6})), ValidationError);
}

TEST_CASE("channel squeeze matches explicit loops")
{
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 10; ++trial) {
    ChannelSqueeze cs(8, 4, rng);
    // non-zero biases so they are exercised
    for (auto& b : cs.reduce.bias.data())
      b = std::uniform_real_distribution<double>(-0.2, 0.2)(rng);
    for (auto& b : cs.expand.bias.data())
      b = std::uniform_real_distribution<double>(-0.2, 0.2)(rng);
    const auto feat = scene::random_tensor(rng, {8, 5, 7}, -2, 2, 0, false);
    const auto got = cs(feat);
    const auto want = oracle::brute_channel_squeeze(cs, feat);
    for (std::size_t c = 0; c < 8; ++c) {
      CHECK(got.data()[c] == Catch::Approx(want[c]).epsilon(1e-12));
      CHECK(got.data()[c] > 0.0);
      CHECK(got.data()[c] < 1.0);
    }
  }
}

TEST_CASE("EGACA gates")
{
  std::mt19937_64 rng(4);
  Egaca separate(8, 4, false, rng);
  Egaca shared(8, 4, true, rng);
  const auto e = scene::random_tensor(rng, {8, 4, 4}, -1, 1, 0, false);
  auto [s1, c1] = separate.channel_weights(e);
  CHECK(s1.data()[0] != c1.data()[0]);
  auto [s2, c2] = shared.channel_weights(e);
  for (std::size_t i = 0; i < 8; ++i)
    CHECK(s2.data()[i] == c2.data()[i]);

  ParameterList ps, pp;
  separate.collect("g", ps);
  shared.collect("g", pp);
  CHECK(ps.size() == pp.size() + 4);

  // image features reach the output
  const auto img = scene::random_tensor(rng, {8, 4, 4}, -1, 1, 0, false);
  CHECK(!(separate(e, img).data()[0] == separate(e, Tensor::zeros({8, 4, 4})).data()[0]));
}

TEST_CASE("EGACA and EVR gradients")
{
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    std::mt19937_64 rng(100 + seed);
    Egaca g(4, 2, seed == 1, rng);
    auto ev = scene::random_tensor(rng, {4, 5, 5});
    auto im = scene::random_tensor(rng, {4, 5, 5});
    ParameterList leaves = {{"event", ev}, {"image", im}};
    g.collect("egaca", leaves);
    auto r = oracle::gradcheck([&] { return project(g(ev, im), seed); }, leaves);
    INFO(r.worst_tensor);
    CHECK(r.worst_error < 1e-4);

    EvrBlock evr(4, 1, rng);
    auto x = scene::random_tensor(rng, {4, 5, 5});
    auto h = scene::random_tensor(rng, {4, 5, 5});
    ParameterList el = {{"x", x}, {"h", h}};
    evr.collect("evr", el);
    auto f = [&] {
      auto o1 = evr(x, h);
      auto o2 = evr(o1.features, o1.hidden);
      return add(project(o2.features, seed), project(o2.hidden, seed + 7));
    };
    r = oracle::gradcheck(f, el);
    INFO(r.worst_tensor);
    CHECK(r.worst_error < 1e-4);
  }
}

TEST_CASE("Adam minimizes a quadratic")
{
  Tensor w({3}, {1.0, -2.0, 0.5}, true);
  const Tensor target({3}, {0.3, 0.1, -0.4});
  Adam adam({{"w", w}}, 0.05);
  double first = 0.0, last = 0.0;
  for (int step = 0; step < 300; ++step) {
    adam.zero_grad();
    const Tensor d = sub(w, target);
    const Tensor loss = sum(mul(d, d));
    if (step == 0)
      first = loss.item();
    last = loss.item();
    loss.backward();
    adam.step();
  }
  CHECK(adam.steps_taken() == 300);
  CHECK(last < 1e-3 * first);

  // First step moves every coordinate by lr against the gradient sign.
  Tensor v({2}, {1.0, -1.0}, true);
  Adam one({{"v", v}}, 0.1);
  sum(mul(v, v)).backward();
  one.step();
  CHECK(v.data()[0] == Catch::Approx(0.9).epsilon(1e-6));
  CHECK(v.data()[1] == Catch::Approx(-0.9).epsilon(1e-6));
}
