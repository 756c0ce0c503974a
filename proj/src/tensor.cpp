#include <evikit/tensor.hpp>

#include <evikit/errors.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <unordered_set>

namespace evikit::nn {

namespace {

std::atomic<std::uint64_t> next_node_id{1};

void require_same_shape(const Tensor& a, const Tensor& b, const char* op)
{
  if (a.shape() != b.shape())
    throw ValidationError(std::string(op) + ": shape mismatch " + to_string(a.shape()) + " vs " +
                          to_string(b.shape()));
}

void require_rank(const Tensor& t, std::size_t rank, const char* op, const char* what)
{
  if (t.rank() != rank)
    throw ValidationError(std::string(op) + ": " + what + " must have rank " + std::to_string(rank) + ", got " +
                          to_string(t.shape()));
}

// Output positions o in [0, n_out) with o * stride + offset inside [0, n_in).
std::pair<long, long> valid_range(long n_out, long n_in, long stride, long offset)
{
  long lo = 0;
  if (offset < 0)
    lo = (-offset + stride - 1) / stride;
  long hi = n_out; // exclusive
  const long limit = n_in - 1 - offset;
  if (limit < 0)
    return {0, 0};
  hi = std::min(hi, limit / stride + 1);
  return {lo, std::max(lo, hi)};
}

} // namespace

std::size_t numel(const Shape& shape)
{
  std::size_t n = 1;
  for (auto d : shape)
    n *= d;
  return n;
}

std::string to_string(const Shape& shape)
{
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i)
      s += ", ";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

Tensor::Tensor(Shape shape, std::vector<double> data, bool requires_grad)
    : node_(std::make_shared<TensorNode>())
{
  if (data.size() != nn::numel(shape))
    throw ValidationError("tensor data length " + std::to_string(data.size()) + " does not match shape " +
                          nn::to_string(shape));
  node_->shape = std::move(shape);
  node_->value = std::move(data);
  node_->requires_grad = requires_grad;
  node_->id = next_node_id++;
}

Tensor Tensor::zeros(Shape shape, bool requires_grad)
{
  const auto n = nn::numel(shape);
  return Tensor(std::move(shape), std::vector<double>(n, 0.0), requires_grad);
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad)
{
  const auto n = nn::numel(shape);
  return Tensor(std::move(shape), std::vector<double>(n, value), requires_grad);
}

Tensor Tensor::scalar(double value, bool requires_grad)
{
  return Tensor(Shape{1}, {value}, requires_grad);
}

double Tensor::item() const
{
  if (numel() != 1)
    throw ValidationError("item() on tensor of shape " + nn::to_string(shape()));
  return node_->value[0];
}

Tensor Tensor::detach() const
{
  return Tensor(node_->shape, node_->value, false);
}

Tensor Tensor::make_result(Shape shape, std::vector<double> value, std::vector<Tensor> inputs,
                           std::function<void(TensorNode&)> backward)
{
  Tensor out(std::move(shape), std::move(value), false);
  const bool any = std::any_of(inputs.begin(), inputs.end(), [](const Tensor& t) { return t.requires_grad(); });
  if (any) {
    out.node_->requires_grad = true;
    out.node_->backward = std::move(backward);
    out.node_->parents.reserve(inputs.size());
    for (auto& in : inputs)
      out.node_->parents.push_back(in.node_);
  }
  return out;
}

void Tensor::backward() const
{
  if (numel() != 1)
    throw ValidationError("backward() needs a scalar, got shape " + nn::to_string(shape()));
  if (!node_->requires_grad)
    return;

  std::vector<TensorNode*> tape;
  std::unordered_set<TensorNode*> seen;
  std::vector<TensorNode*> stack{node_.get()};
  seen.insert(node_.get());
  while (!stack.empty()) {
    TensorNode* n = stack.back();
    stack.pop_back();
    tape.push_back(n);
    for (auto& p : n->parents)
      if (p->requires_grad && seen.insert(p.get()).second)
        stack.push_back(p.get());
  }
  std::sort(tape.begin(), tape.end(), [](const TensorNode* a, const TensorNode* b) { return a->id > b->id; });

  node_->ensure_grad();
  node_->grad[0] += 1.0;
  for (TensorNode* n : tape) {
    if (!n->backward || n->grad.empty())
      continue;
    for (auto& p : n->parents)
      if (p->requires_grad)
        p->ensure_grad();
    n->backward(*n);
  }
}

Tensor add(const Tensor& a, const Tensor& b)
{
  require_same_shape(a, b, "add");
  std::vector<double> v(a.numel());
  auto x = a.data(), y = b.data();
  for (std::size_t i = 0; i < v.size(); ++i)
    v[i] = x[i] + y[i];
  return Tensor::make_result(a.shape(), std::move(v), {a, b}, [](TensorNode& self) {
    for (auto& p : self.parents)
      if (p->requires_grad)
        for (std::size_t i = 0; i < self.grad.size(); ++i)
          p->grad[i] += self.grad[i];
  });
}

Tensor sub(const Tensor& a, const Tensor& b)
{
  require_same_shape(a, b, "sub");
  std::vector<double> v(a.numel());
  auto x = a.data(), y = b.data();
  for (std::size_t i = 0; i < v.size(); ++i)
    v[i] = x[i] - y[i];
  return Tensor::make_result(a.shape(), std::move(v), {a, b}, [](TensorNode& self) {
    auto& pa = *self.parents[0];
    auto& pb = *self.parents[1];
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      if (pa.requires_grad)
        pa.grad[i] += self.grad[i];
      if (pb.requires_grad)
        pb.grad[i] -= self.grad[i];
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b)
{
  require_same_shape(a, b, "mul");
  std::vector<double> v(a.numel());
  auto x = a.data(), y = b.data();
  for (std::size_t i = 0; i < v.size(); ++i)
    v[i] = x[i] * y[i];
  return Tensor::make_result(a.shape(), std::move(v), {a, b}, [](TensorNode& self) {
    auto& pa = *self.parents[0];
    auto& pb = *self.parents[1];
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      if (pa.requires_grad)
        pa.grad[i] += self.grad[i] * pb.value[i];
      if (pb.requires_grad)
        pb.grad[i] += self.grad[i] * pa.value[i];
    }
  });
}

Tensor scale(const Tensor& a, double s)
{
  std::vector<double> v(a.data().begin(), a.data().end());
  for (auto& e : v)
    e *= s;
  return Tensor::make_result(a.shape(), std::move(v), {a}, [s](TensorNode& self) {
    auto& p = *self.parents[0];
    for (std::size_t i = 0; i < self.grad.size(); ++i)
      p.grad[i] += s * self.grad[i];
  });
}

Tensor relu(const Tensor& x)
{
  return leaky_relu(x, 0.0);
}

Tensor leaky_relu(const Tensor& x, double slope)
{
  std::vector<double> v(x.numel());
  auto in = x.data();
  for (std::size_t i = 0; i < v.size(); ++i)
    v[i] = in[i] > 0.0 ? in[i] : slope * in[i];
  return Tensor::make_result(x.shape(), std::move(v), {x}, [slope](TensorNode& self) {
    auto& p = *self.parents[0];
    for (std::size_t i = 0; i < self.grad.size(); ++i)
      p.grad[i] += p.value[i] > 0.0 ? self.grad[i] : slope * self.grad[i];
  });
}

Tensor sigmoid(const Tensor& x)
{
  std::vector<double> v(x.numel());
  auto in = x.data();
  for (std::size_t i = 0; i < v.size(); ++i) {
    // Branches keep exp() from overflowing for large |x|.
    if (in[i] >= 0.0) {
      v[i] = 1.0 / (1.0 + std::exp(-in[i]));
    } else {
      const double e = std::exp(in[i]);
      v[i] = e / (1.0 + e);
    }
  }
  return Tensor::make_result(x.shape(), std::move(v), {x}, [](TensorNode& self) {
    auto& p = *self.parents[0];
    for (std::size_t i = 0; i < self.grad.size(); ++i)
      p.grad[i] += self.grad[i] * self.value[i] * (1.0 - self.value[i]);
  });
}

Tensor sum(const Tensor& x)
{
  double s = 0.0;
  for (double v : x.data())
    s += v;
  return Tensor::make_result(Shape{1}, {s}, {x}, [](TensorNode& self) {
    auto& p = *self.parents[0];
    for (auto& g : p.grad)
      g += self.grad[0];
  });
}

Tensor mean(const Tensor& x)
{
  if (x.numel() == 0)
    throw ValidationError("mean of an empty tensor");
  return scale(sum(x), 1.0 / static_cast<double>(x.numel()));
}

Tensor concat(const std::vector<Tensor>& parts)
{
  if (parts.empty())
    throw ValidationError("concat of zero tensors");
  const Shape& first = parts.front().shape();
  if (first.empty())
    throw ValidationError("concat needs tensors of rank >= 1");
  Shape out_shape = first;
  out_shape[0] = 0;
  for (const auto& t : parts) {
    if (t.rank() != first.size() || !std::equal(first.begin() + 1, first.end(), t.shape().begin() + 1))
      throw ValidationError("concat: trailing dims of " + to_string(t.shape()) + " do not match " + to_string(first));
    out_shape[0] += t.dim(0);
  }
  std::vector<double> v;
  v.reserve(numel(out_shape));
  for (const auto& t : parts)
    v.insert(v.end(), t.data().begin(), t.data().end());
  return Tensor::make_result(out_shape, std::move(v), parts, [](TensorNode& self) {
    std::size_t offset = 0;
    for (auto& p : self.parents) {
      if (p->requires_grad)
        for (std::size_t i = 0; i < p->value.size(); ++i)
          p->grad[i] += self.grad[offset + i];
      offset += p->value.size();
    }
  });
}

Tensor global_avg_pool(const Tensor& x)
{
  require_rank(x, 3, "global_avg_pool", "input");
  const std::size_t c = x.dim(0);
  const std::size_t hw = x.dim(1) * x.dim(2);
  if (hw == 0)
    throw ValidationError("global_avg_pool: empty spatial extent " + to_string(x.shape()));
  std::vector<double> v(c, 0.0);
  auto in = x.data();
  for (std::size_t ch = 0; ch < c; ++ch) {
    double s = 0.0;
    for (std::size_t i = 0; i < hw; ++i)
      s += in[ch * hw + i];
    v[ch] = s / static_cast<double>(hw);
  }
  return Tensor::make_result(Shape{c}, std::move(v), {x}, [c, hw](TensorNode& self) {
    auto& p = *self.parents[0];
    const double inv = 1.0 / static_cast<double>(hw);
    for (std::size_t ch = 0; ch < c; ++ch)
      for (std::size_t i = 0; i < hw; ++i)
        p.grad[ch * hw + i] += self.grad[ch] * inv;
  });
}

Tensor mul_channels(const Tensor& x, const Tensor& w)
{
  require_rank(x, 3, "mul_channels", "input");
  require_rank(w, 1, "mul_channels", "weights");
  if (w.dim(0) != x.dim(0))
    throw ValidationError("mul_channels: " + std::to_string(w.dim(0)) + " weights for input " + to_string(x.shape()));
  const std::size_t c = x.dim(0);
  const std::size_t hw = x.dim(1) * x.dim(2);
  std::vector<double> v(x.numel());
  auto in = x.data();
  auto wt = w.data();
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t i = 0; i < hw; ++i)
      v[ch * hw + i] = in[ch * hw + i] * wt[ch];
  return Tensor::make_result(x.shape(), std::move(v), {x, w}, [c, hw](TensorNode& self) {
    auto& px = *self.parents[0];
    auto& pw = *self.parents[1];
    for (std::size_t ch = 0; ch < c; ++ch) {
      double gw = 0.0;
      for (std::size_t i = 0; i < hw; ++i) {
        const double g = self.grad[ch * hw + i];
        if (px.requires_grad)
          px.grad[ch * hw + i] += g * pw.value[ch];
        gw += g * px.value[ch * hw + i];
      }
      if (pw.requires_grad)
        pw.grad[ch] += gw;
    }
  });
}

Tensor dense(const Tensor& x, const Tensor& weight, const Tensor& bias)
{
  require_rank(x, 1, "dense", "input");
  require_rank(weight, 2, "dense", "weight");
  require_rank(bias, 1, "dense", "bias");
  const std::size_t out = weight.dim(0);
  const std::size_t in = weight.dim(1);
  if (x.dim(0) != in || bias.dim(0) != out)
    throw ValidationError("dense: input " + to_string(x.shape()) + ", weight " + to_string(weight.shape()) +
                          ", bias " + to_string(bias.shape()) + " are incompatible");
  std::vector<double> v(out);
  auto xv = x.data(), wv = weight.data(), bv = bias.data();
  for (std::size_t o = 0; o < out; ++o) {
    double s = bv[o];
    for (std::size_t i = 0; i < in; ++i)
      s += wv[o * in + i] * xv[i];
    v[o] = s;
  }
  return Tensor::make_result(Shape{out}, std::move(v), {x, weight, bias}, [out, in](TensorNode& self) {
    auto& px = *self.parents[0];
    auto& pw = *self.parents[1];
    auto& pb = *self.parents[2];
    for (std::size_t o = 0; o < out; ++o) {
      const double g = self.grad[o];
      if (pb.requires_grad)
        pb.grad[o] += g;
      for (std::size_t i = 0; i < in; ++i) {
        if (pw.requires_grad)
          pw.grad[o * in + i] += g * px.value[i];
        if (px.requires_grad)
          px.grad[i] += g * pw.value[o * in + i];
      }
    }
  });
}

Tensor conv2d(const Tensor& x, const Tensor& weight, const Tensor& bias, int stride, int pad)
{
  require_rank(x, 3, "conv2d", "input");
  require_rank(weight, 4, "conv2d", "weight");
  require_rank(bias, 1, "conv2d", "bias");
  const long ci_n = static_cast<long>(x.dim(0)), h = static_cast<long>(x.dim(1)), w = static_cast<long>(x.dim(2));
  const long co_n = static_cast<long>(weight.dim(0));
  const long k = static_cast<long>(weight.dim(2));
  if (weight.dim(1) != x.dim(0) || weight.dim(3) != weight.dim(2) || bias.dim(0) != weight.dim(0))
    throw ValidationError("conv2d: input " + to_string(x.shape()) + ", weight " + to_string(weight.shape()) +
                          ", bias " + to_string(bias.shape()) + " are incompatible");
  if (stride < 1 || pad < 0)
    throw ValidationError("conv2d: stride must be >= 1 and pad >= 0");
  const long s = stride, p = pad;
  if (h + 2 * p < k || w + 2 * p < k)
    throw ValidationError("conv2d: kernel " + std::to_string(k) + " larger than padded input " + to_string(x.shape()));
  const long ho = (h + 2 * p - k) / s + 1;
  const long wo = (w + 2 * p - k) / s + 1;

  std::vector<double> out(static_cast<std::size_t>(co_n * ho * wo));
  auto in = x.data();
  auto wt = weight.data();
  auto bs = bias.data();
  for (long co = 0; co < co_n; ++co) {
    double* o = out.data() + co * ho * wo;
    std::fill(o, o + ho * wo, bs[co]);
    for (long ci = 0; ci < ci_n; ++ci) {
      const double* src = in.data() + ci * h * w;
      for (long ky = 0; ky < k; ++ky) {
        const auto [oy0, oy1] = valid_range(ho, h, s, ky - p);
        for (long kx = 0; kx < k; ++kx) {
          const double wv = wt[((co * ci_n + ci) * k + ky) * k + kx];
          const auto [ox0, ox1] = valid_range(wo, w, s, kx - p);
          for (long oy = oy0; oy < oy1; ++oy) {
            const double* row = src + (oy * s + ky - p) * w;
            double* orow = o + oy * wo;
            for (long ox = ox0; ox < ox1; ++ox)
              orow[ox] += wv * row[ox * s + kx - p];
          }
        }
      }
    }
  }

  return Tensor::make_result(
      Shape{static_cast<std::size_t>(co_n), static_cast<std::size_t>(ho), static_cast<std::size_t>(wo)}, std::move(out),
      {x, weight, bias}, [=](TensorNode& self) {
        auto& px = *self.parents[0];
        auto& pw = *self.parents[1];
        auto& pb = *self.parents[2];
        for (long co = 0; co < co_n; ++co) {
          const double* g = self.grad.data() + co * ho * wo;
          if (pb.requires_grad) {
            double acc = 0.0;
            for (long i = 0; i < ho * wo; ++i)
              acc += g[i];
            pb.grad[co] += acc;
          }
          for (long ci = 0; ci < ci_n; ++ci) {
            const double* src = px.value.data() + ci * h * w;
            double* gsrc = px.requires_grad ? px.grad.data() + ci * h * w : nullptr;
            for (long ky = 0; ky < k; ++ky) {
              const auto [oy0, oy1] = valid_range(ho, h, s, ky - p);
              for (long kx = 0; kx < k; ++kx) {
                const std::size_t widx = static_cast<std::size_t>(((co * ci_n + ci) * k + ky) * k + kx);
                const double wv = pw.value[widx];
                const auto [ox0, ox1] = valid_range(wo, w, s, kx - p);
                double gw = 0.0;
                for (long oy = oy0; oy < oy1; ++oy) {
                  const long off = (oy * s + ky - p) * w;
                  const double* grow = g + oy * wo;
                  const double* row = src + off;
                  for (long ox = ox0; ox < ox1; ++ox)
                    gw += grow[ox] * row[ox * s + kx - p];
                  if (gsrc) {
                    double* growin = gsrc + off;
                    for (long ox = ox0; ox < ox1; ++ox)
                      growin[ox * s + kx - p] += wv * grow[ox];
                  }
                }
                if (pw.requires_grad)
                  pw.grad[widx] += gw;
              }
            }
          }
        }
      });
}

Tensor transposed_conv2d(const Tensor& x, const Tensor& weight, const Tensor& bias, int stride, int pad)
{
  require_rank(x, 3, "transposed_conv2d", "input");
  require_rank(weight, 4, "transposed_conv2d", "weight");
  require_rank(bias, 1, "transposed_conv2d", "bias");
  const long ci_n = static_cast<long>(x.dim(0)), h = static_cast<long>(x.dim(1)), w = static_cast<long>(x.dim(2));
  const long co_n = static_cast<long>(weight.dim(1));
  const long k = static_cast<long>(weight.dim(2));
  if (weight.dim(0) != x.dim(0) || weight.dim(3) != weight.dim(2) || bias.dim(0) != weight.dim(1))
    throw ValidationError("transposed_conv2d: input " + to_string(x.shape()) + ", weight " +
                          to_string(weight.shape()) + ", bias " + to_string(bias.shape()) + " are incompatible");
  if (stride < 1 || pad < 0)
    throw ValidationError("transposed_conv2d: stride must be >= 1 and pad >= 0");
  const long s = stride, p = pad;
  const long ho = (h - 1) * s + k - 2 * p;
  const long wo = (w - 1) * s + k - 2 * p;
  if (ho <= 0 || wo <= 0)
    throw ValidationError("transposed_conv2d: empty output for input " + to_string(x.shape()));

  // Output (oy, ox) = (iy * s + ky - p, ix * s + kx - p): the conv2d index map
  // with input and output roles swapped.
  std::vector<double> out(static_cast<std::size_t>(co_n * ho * wo));
  auto in = x.data();
  auto wt = weight.data();
  auto bs = bias.data();
  for (long co = 0; co < co_n; ++co)
    std::fill(out.begin() + co * ho * wo, out.begin() + (co + 1) * ho * wo, bs[co]);
  for (long ci = 0; ci < ci_n; ++ci) {
    const double* src = in.data() + ci * h * w;
    for (long co = 0; co < co_n; ++co) {
      double* o = out.data() + co * ho * wo;
      for (long ky = 0; ky < k; ++ky) {
        const auto [iy0, iy1] = valid_range(h, ho, s, ky - p);
        for (long kx = 0; kx < k; ++kx) {
          const double wv = wt[((ci * co_n + co) * k + ky) * k + kx];
          const auto [ix0, ix1] = valid_range(w, wo, s, kx - p);
          for (long iy = iy0; iy < iy1; ++iy) {
            double* orow = o + (iy * s + ky - p) * wo;
            const double* row = src + iy * w;
            for (long ix = ix0; ix < ix1; ++ix)
              orow[ix * s + kx - p] += wv * row[ix];
          }
        }
      }
    }
  }

  return Tensor::make_result(
      Shape{static_cast<std::size_t>(co_n), static_cast<std::size_t>(ho), static_cast<std::size_t>(wo)}, std::move(out),
      {x, weight, bias}, [=](TensorNode& self) {
        auto& px = *self.parents[0];
        auto& pw = *self.parents[1];
        auto& pb = *self.parents[2];
        if (pb.requires_grad)
          for (long co = 0; co < co_n; ++co) {
            double acc = 0.0;
            for (long i = 0; i < ho * wo; ++i)
              acc += self.grad[co * ho * wo + i];
            pb.grad[co] += acc;
          }
        for (long ci = 0; ci < ci_n; ++ci) {
          const double* src = px.value.data() + ci * h * w;
          double* gsrc = px.requires_grad ? px.grad.data() + ci * h * w : nullptr;
          for (long co = 0; co < co_n; ++co) {
            const double* g = self.grad.data() + co * ho * wo;
            for (long ky = 0; ky < k; ++ky) {
              const auto [iy0, iy1] = valid_range(h, ho, s, ky - p);
              for (long kx = 0; kx < k; ++kx) {
                const std::size_t widx = static_cast<std::size_t>(((ci * co_n + co) * k + ky) * k + kx);
                const double wv = pw.value[widx];
                const auto [ix0, ix1] = valid_range(w, wo, s, kx - p);
                double gw = 0.0;
                for (long iy = iy0; iy < iy1; ++iy) {
                  const double* grow = g + (iy * s + ky - p) * wo;
                  const double* row = src + iy * w;
                  for (long ix = ix0; ix < ix1; ++ix)
                    gw += grow[ix * s + kx - p] * row[ix];
                  if (gsrc) {
                    double* gin = gsrc + iy * w;
                    for (long ix = ix0; ix < ix1; ++ix)
                      gin[ix] += wv * grow[ix * s + kx - p];
                  }
                }
                if (pw.requires_grad)
                  pw.grad[widx] += gw;
              }
            }
          }
        }
      });
}

Tensor charbonnier_loss(const Tensor& pred, const Tensor& target, double eps)
{
  require_same_shape(pred, target, "charbonnier_loss");
  if (!(eps > 0.0))
    throw ValidationError("charbonnier_loss: eps must be positive");
  if (pred.numel() == 0)
    throw ValidationError("charbonnier_loss: empty tensors");
  // sqrt(d^2 + eps^2) = eps + d^2 / (sqrt(d^2 + eps^2) + eps), so identical
  // inputs give exactly eps and small residuals keep full precision.
  auto a = pred.data(), b = target.data();
  double excess = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    const double d2 = d * d;
    excess += d2 / (std::sqrt(d2 + eps * eps) + eps);
  }
  const double n = static_cast<double>(a.size());
  return Tensor::make_result(Shape{1}, {eps + excess / n}, {pred, target}, [eps, n](TensorNode& self) {
    auto& pp = *self.parents[0];
    auto& pt = *self.parents[1];
    for (std::size_t i = 0; i < pp.value.size(); ++i) {
      const double d = pp.value[i] - pt.value[i];
      const double g = self.grad[0] * d / (std::sqrt(d * d + eps * eps) * n);
      if (pp.requires_grad)
        pp.grad[i] += g;
      if (pt.requires_grad)
        pt.grad[i] -= g;
    }
  });
}

} // namespace evikit::nn
