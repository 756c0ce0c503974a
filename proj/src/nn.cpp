#include <evikit/nn.hpp>

#include <evikit/errors.hpp>

#include <cmath>

namespace evikit::nn {

Tensor kaiming_uniform(Shape shape, std::size_t fan_in, std::mt19937_64& rng)
{
  const double bound = std::sqrt(6.0 / ((1.0 + kActivationSlope * kActivationSlope) * static_cast<double>(fan_in)));
  std::uniform_real_distribution<double> dist(-bound, bound);
  std::vector<double> v(numel(shape));
  for (auto& e : v)
    e = dist(rng);
  return Tensor(std::move(shape), std::move(v), true);
}

Conv2d::Conv2d(int in_channels, int out_channels, int kernel, int stride_, int pad_, std::mt19937_64& rng)
    : weight(kaiming_uniform({std::size_t(out_channels), std::size_t(in_channels), std::size_t(kernel),
                              std::size_t(kernel)},
                             std::size_t(in_channels) * kernel * kernel, rng)),
      bias(Tensor::zeros({std::size_t(out_channels)}, true)), stride(stride_), pad(pad_)
{
}

void Conv2d::collect(const std::string& prefix, ParameterList& out) const
{
  out.push_back({prefix + ".weight", weight});
  out.push_back({prefix + ".bias", bias});
}

TransposedConv2d::TransposedConv2d(int in_channels, int out_channels, int kernel, int stride_, std::mt19937_64& rng)
    : weight(kaiming_uniform({std::size_t(in_channels), std::size_t(out_channels), std::size_t(kernel),
                              std::size_t(kernel)},
                             std::size_t(in_channels) * kernel * kernel / (std::size_t(stride_) * stride_), rng)),
      bias(Tensor::zeros({std::size_t(out_channels)}, true)), stride(stride_)
{
}

void TransposedConv2d::collect(const std::string& prefix, ParameterList& out) const
{
  out.push_back({prefix + ".weight", weight});
  out.push_back({prefix + ".bias", bias});
}

Dense::Dense(int in_features, int out_features, std::mt19937_64& rng)
    : weight(kaiming_uniform({std::size_t(out_features), std::size_t(in_features)}, std::size_t(in_features), rng)),
      bias(Tensor::zeros({std::size_t(out_features)}, true))
{
}

void Dense::collect(const std::string& prefix, ParameterList& out) const
{
  out.push_back({prefix + ".weight", weight});
  out.push_back({prefix + ".bias", bias});
}

ResidualBlock::ResidualBlock(int channels, std::mt19937_64& rng)
    : first(channels, channels, 3, 1, 1, rng), second(channels, channels, 3, 1, 1, rng)
{
}

Tensor ResidualBlock::operator()(const Tensor& x) const
{
  return add(x, second(activation(first(x))));
}

void ResidualBlock::collect(const std::string& prefix, ParameterList& out) const
{
  first.collect(prefix + ".conv1", out);
  second.collect(prefix + ".conv2", out);
}

ChannelSqueeze::ChannelSqueeze(int channels, int reduction, std::mt19937_64& rng)
{
  if (reduction < 1 || channels % reduction != 0 || channels / reduction < 1)
    throw ValidationError("channel squeeze: " + std::to_string(channels) + " channels not divisible by reduction " +
                          std::to_string(reduction));
  reduce = Dense(channels, channels / reduction, rng);
  expand = Dense(channels / reduction, channels, rng);
}

Tensor ChannelSqueeze::operator()(const Tensor& feat) const
{
  if (feat.rank() != 3 || feat.dim(0) != expand.bias.dim(0))
    throw ValidationError("channel squeeze expects " + std::to_string(expand.bias.dim(0)) + "xHxW, got " +
                          to_string(feat.shape()));
  return sigmoid(expand(relu(reduce(global_avg_pool(feat)))));
}

void ChannelSqueeze::collect(const std::string& prefix, ParameterList& out) const
{
  reduce.collect(prefix + ".reduce", out);
  expand.collect(prefix + ".expand", out);
}

Egaca::Egaca(int channels, int reduction, bool shared_squeeze, std::mt19937_64& rng)
    : shared(shared_squeeze), self_squeeze(channels, reduction, rng)
{
  cross_squeeze = shared ? self_squeeze : ChannelSqueeze(channels, reduction, rng);
  ffn_in = Conv2d(2 * channels, channels, 1, 1, 0, rng);
  ffn_out = Conv2d(channels, channels, 1, 1, 0, rng);
}

std::pair<Tensor, Tensor> Egaca::channel_weights(const Tensor& event_feat) const
{
  Tensor w_self = self_squeeze(event_feat);
  Tensor w_cross = shared ? w_self : cross_squeeze(event_feat);
  return {w_self, w_cross};
}

Tensor Egaca::operator()(const Tensor& event_feat, const Tensor& image_feat) const
{
  if (event_feat.shape() != image_feat.shape())
    throw ValidationError("egaca: event features " + to_string(event_feat.shape()) + " vs image features " +
                          to_string(image_feat.shape()));
  auto [w_self, w_cross] = channel_weights(event_feat);
  Tensor mixed = concat({mul_channels(event_feat, w_self), mul_channels(image_feat, w_cross)});
  return ffn_out(activation(ffn_in(mixed)));
}

void Egaca::collect(const std::string& prefix, ParameterList& out) const
{
  self_squeeze.collect(prefix + ".cs_self", out);
  if (!shared)
    cross_squeeze.collect(prefix + ".cs_cross", out);
  ffn_in.collect(prefix + ".ffn_in", out);
  ffn_out.collect(prefix + ".ffn_out", out);
}

EvrBlock::EvrBlock(int channels, int residual_blocks, std::mt19937_64& rng)
    : reduce(2 * channels, channels, 3, 1, 1, rng)
{
  for (int b = 0; b < residual_blocks; ++b)
    blocks.emplace_back(channels, rng);
  state = Conv2d(channels, channels, 3, 1, 1, rng);
}

EvrOutput EvrBlock::operator()(const Tensor& x, const Tensor& hidden) const
{
  if (x.shape() != hidden.shape())
    throw ValidationError("evr: input " + to_string(x.shape()) + " and hidden state " + to_string(hidden.shape()) +
                          " differ");
  Tensor y = activation(reduce(concat({x, hidden})));
  for (const auto& block : blocks)
    y = block(y);
  return {y, activation(state(y))};
}

void EvrBlock::collect(const std::string& prefix, ParameterList& out) const
{
  reduce.collect(prefix + ".reduce", out);
  for (std::size_t b = 0; b < blocks.size(); ++b)
    blocks[b].collect(prefix + ".res" + std::to_string(b), out);
  state.collect(prefix + ".state", out);
}

Adam::Adam(ParameterList params, double lr, double beta1, double beta2, double eps)
    : params_(std::move(params)), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps)
{
  for (const auto& p : params_) {
    m_.emplace_back(p.tensor.numel(), 0.0);
    v_.emplace_back(p.tensor.numel(), 0.0);
  }
}

void Adam::zero_grad()
{
  for (auto& p : params_)
    p.tensor.zero_grad();
}

void Adam::step()
{
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t k = 0; k < params_.size(); ++k) {
    Tensor& t = params_[k].tensor;
    auto g = t.grad();
    if (g.empty())
      continue;
    auto w = t.data();
    auto& m = m_[k];
    auto& v = v_[k];
    for (std::size_t i = 0; i < w.size(); ++i) {
      m[i] = beta1_ * m[i] + (1.0 - beta1_) * g[i];
      v[i] = beta2_ * v[i] + (1.0 - beta2_) * g[i] * g[i];
      w[i] -= lr_ * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps_);
    }
  }
}

} // namespace evikit::nn
