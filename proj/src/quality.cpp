#include <evikit/quality.hpp>

#include <evikit/errors.hpp>

#include <array>
#include <cmath>
#include <string>

namespace evikit {

void BlurProtocol::validate() const
{
  if (frames_per_blur < 1 || frames_per_blur % 2 == 0)
    throw ValidationError("blur.per_blur must be odd and >= 1, got " + std::to_string(frames_per_blur));
  if (skip < 0)
    throw ValidationError("blur.skip must be >= 0");
  if (!(fps > 0.0) || !std::isfinite(fps))
    throw ValidationError("blur.fps must be positive");
}

BlurredSequence synthesize_blur(const FrameSequence& seq, const BlurProtocol& proto)
{
  proto.validate();
  seq.validate();
  const std::size_t per = std::size_t(proto.frames_per_blur);
  const std::size_t skip = std::size_t(proto.skip);
  if (seq.size() < per + skip)
    throw ValidationError("blur protocol " + std::to_string(per) + "+" + std::to_string(skip) + " needs at least " +
                          std::to_string(per + skip) + " frames, got " + std::to_string(seq.size()));

  BlurredSequence out;
  const std::size_t stride = per + skip;
  for (std::size_t start = 0; start + per <= seq.size(); start += stride) {
    const Frame& first = seq.frames[start];
    Frame mean(first.width(), first.height(), first.channels());
    auto acc = mean.data();
    for (std::size_t k = start; k < start + per; ++k) {
      auto src = seq.frames[k].data();
      for (std::size_t i = 0; i < acc.size(); ++i)
        acc[i] += src[i];
    }
    for (auto& v : acc)
      v /= static_cast<double>(per);
    out.blurry.push_back({std::move(mean), seq.timestamps[start], seq.timestamps[start + per - 1]});
    out.window_starts.push_back(start);
  }
  for (std::size_t w = 0; w + 1 < out.window_starts.size(); ++w)
    for (std::size_t k = out.window_starts[w] + per; k < out.window_starts[w + 1]; ++k)
      out.ground_truth.push_back({seq.frames[k], seq.timestamps[k], k});
  return out;
}

namespace {

void check_pair(const Frame& a, const Frame& b, const char* metric)
{
  if (!a.same_shape(b))
    throw ValidationError(std::string(metric) + ": shape mismatch " + std::to_string(a.channels()) + "x" +
                          std::to_string(a.height()) + "x" + std::to_string(a.width()) + " vs " +
                          std::to_string(b.channels()) + "x" + std::to_string(b.height()) + "x" +
                          std::to_string(b.width()));
  if (a.empty())
    throw ValidationError(std::string(metric) + ": empty images");
}

constexpr int kWindow = 11;
constexpr double kSigma = 1.5;

std::array<double, kWindow> gaussian_taps()
{
  std::array<double, kWindow> taps{};
  double total = 0.0;
  for (int i = 0; i < kWindow; ++i) {
    const double d = i - kWindow / 2;
    taps[i] = std::exp(-d * d / (2.0 * kSigma * kSigma));
    total += taps[i];
  }
  for (auto& t : taps)
    t /= total;
  return taps;
}

// Separable Gaussian over the valid region: (H - 10) x (W - 10).
std::vector<double> filter_valid(const std::vector<double>& img, int h, int w)
{
  static const auto taps = gaussian_taps();
  const int wo = w - kWindow + 1;
  const int ho = h - kWindow + 1;
  std::vector<double> rows(static_cast<std::size_t>(h) * wo, 0.0);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < wo; ++x) {
      double s = 0.0;
      for (int k = 0; k < kWindow; ++k)
        s += taps[k] * img[static_cast<std::size_t>(y) * w + x + k];
      rows[static_cast<std::size_t>(y) * wo + x] = s;
    }
  std::vector<double> out(static_cast<std::size_t>(ho) * wo, 0.0);
  for (int y = 0; y < ho; ++y)
    for (int x = 0; x < wo; ++x) {
      double s = 0.0;
      for (int k = 0; k < kWindow; ++k)
        s += taps[k] * rows[static_cast<std::size_t>(y + k) * wo + x];
      out[static_cast<std::size_t>(y) * wo + x] = s;
    }
  return out;
}

} // namespace

double psnr(const Frame& a, const Frame& b, double peak)
{
  check_pair(a, b, "psnr");
  if (!(peak > 0.0))
    throw ValidationError("psnr: peak must be positive");
  double se = 0.0;
  auto x = a.data(), y = b.data();
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = x[i] - y[i];
    se += d * d;
  }
  const double mse = se / static_cast<double>(x.size());
  if (mse == 0.0)
    return kPsnrCap;
  return std::min(kPsnrCap, 10.0 * std::log10(peak * peak / mse));
}

double ssim(const Frame& a, const Frame& b, double peak)
{
  check_pair(a, b, "ssim");
  if (a.width() < kWindow || a.height() < kWindow)
    throw ValidationError("ssim needs images of at least 11x11, got " + std::to_string(a.width()) + "x" +
                          std::to_string(a.height()));
  const double c1 = (0.01 * peak) * (0.01 * peak);
  const double c2 = (0.03 * peak) * (0.03 * peak);
  const int h = a.height(), w = a.width();
  const std::size_t n = a.plane_size();
  double total = 0.0;
  std::size_t count = 0;
  for (int ch = 0; ch < a.channels(); ++ch) {
    auto pa = a.plane(ch), pb = b.plane(ch);
    std::vector<double> x(pa.begin(), pa.end()), y(pb.begin(), pb.end());
    std::vector<double> xx(n), yy(n), xy(n);
    for (std::size_t i = 0; i < n; ++i) {
      xx[i] = x[i] * x[i];
      yy[i] = y[i] * y[i];
      xy[i] = x[i] * y[i];
    }
    const auto mx = filter_valid(x, h, w), my = filter_valid(y, h, w);
    const auto sxx = filter_valid(xx, h, w), syy = filter_valid(yy, h, w), sxy = filter_valid(xy, h, w);
    for (std::size_t i = 0; i < mx.size(); ++i) {
      const double vx = sxx[i] - mx[i] * mx[i];
      const double vy = syy[i] - my[i] * my[i];
      const double cov = sxy[i] - mx[i] * my[i];
      total += ((2.0 * mx[i] * my[i] + c1) * (2.0 * cov + c2)) /
               ((mx[i] * mx[i] + my[i] * my[i] + c1) * (vx + vy + c2));
    }
    count += mx.size();
  }
  return total / static_cast<double>(count);
}

} // namespace evikit
