#pragma once

#include <evikit/tensor.hpp>

#include <random>
#include <string>
#include <utility>
#include <vector>

namespace evikit::nn {

struct NamedParameter {
  std::string name;
  Tensor tensor;
};
using ParameterList = std::vector<NamedParameter>;

/// Negative slope of the leaky ReLU used throughout the network.
inline constexpr double kActivationSlope = 0.1;

inline Tensor activation(const Tensor& x) { return leaky_relu(x, kActivationSlope); }

/// Kaiming-uniform weights for a leaky-ReLU network; biases start at zero.
Tensor kaiming_uniform(Shape shape, std::size_t fan_in, std::mt19937_64& rng);

class Conv2d {
public:
  Conv2d() = default;
  Conv2d(int in_channels, int out_channels, int kernel, int stride, int pad, std::mt19937_64& rng);

  Tensor operator()(const Tensor& x) const { return conv2d(x, weight, bias, stride, pad); }
  void collect(const std::string& prefix, ParameterList& out) const;

  Tensor weight;
  Tensor bias;
  int stride = 1;
  int pad = 0;
};

class TransposedConv2d {
public:
  TransposedConv2d() = default;
  TransposedConv2d(int in_channels, int out_channels, int kernel, int stride, std::mt19937_64& rng);

  Tensor operator()(const Tensor& x) const { return transposed_conv2d(x, weight, bias, stride, 0); }
  void collect(const std::string& prefix, ParameterList& out) const;

  Tensor weight;
  Tensor bias;
  int stride = 2;
};

class Dense {
public:
  Dense() = default;
  Dense(int in_features, int out_features, std::mt19937_64& rng);

  Tensor operator()(const Tensor& x) const { return dense(x, weight, bias); }
  void collect(const std::string& prefix, ParameterList& out) const;

  Tensor weight;
  Tensor bias;
};

/// x + conv(act(conv(x))), both 3x3 with padding 1.
class ResidualBlock {
public:
  ResidualBlock() = default;
  ResidualBlock(int channels, std::mt19937_64& rng);

  Tensor operator()(const Tensor& x) const;
  void collect(const std::string& prefix, ParameterList& out) const;

  Conv2d first;
  Conv2d second;
};

/// Squeeze-and-excitation channel weights: pool, C -> C/r, relu, C/r -> C, sigmoid.
class ChannelSqueeze {
public:
  ChannelSqueeze() = default;
  ChannelSqueeze(int channels, int reduction, std::mt19937_64& rng);

  Tensor operator()(const Tensor& feat) const;
  void collect(const std::string& prefix, ParameterList& out) const;

  Dense reduce;
  Dense expand;
};

/// Event-guided channel attention. Both gates are computed from the event
/// features: one re-weights the event features, the other the image features,
/// and a 1x1 conv / activation / 1x1 conv network fuses the two.
class Egaca {
public:
  Egaca() = default;
  Egaca(int channels, int reduction, bool shared_squeeze, std::mt19937_64& rng);

  Tensor operator()(const Tensor& event_feat, const Tensor& image_feat) const;

  /// (self weights, cross weights) for the given event features.
  std::pair<Tensor, Tensor> channel_weights(const Tensor& event_feat) const;
  void collect(const std::string& prefix, ParameterList& out) const;

  bool shared = false;
  ChannelSqueeze self_squeeze;
  ChannelSqueeze cross_squeeze;
  Conv2d ffn_in;
  Conv2d ffn_out;
};

struct EvrOutput {
  Tensor features;
  Tensor hidden;
};

/// Recurrent residual block: concat(input, state) -> channel-reducing conv ->
/// residual blocks. The result is passed on as features and, through one more
/// conv + activation, becomes the next hidden state.
class EvrBlock {
public:
  EvrBlock() = default;
  EvrBlock(int channels, int residual_blocks, std::mt19937_64& rng);

  EvrOutput operator()(const Tensor& x, const Tensor& hidden) const;
  void collect(const std::string& prefix, ParameterList& out) const;

  Conv2d reduce;
  std::vector<ResidualBlock> blocks;
  Conv2d state;
};

/// Adam with bias correction.
class Adam {
public:
  Adam(ParameterList params, double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

  void zero_grad();
  void step();
  std::size_t steps_taken() const noexcept { return t_; }

private:
  ParameterList params_;
  double lr_, beta1_, beta2_, eps_;
  std::vector<std::vector<double>> m_, v_;
  std::size_t t_ = 0;
};

} // namespace evikit::nn
